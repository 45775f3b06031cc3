#include "shadowad/tensor.hpp"

#include "shadowad/common.hpp"

namespace shadowad {

Tensor Tensor::zeros(int n, int c, int h, int w) {
    require(n >= 1 && c >= 1 && h >= 1 && w >= 1, ErrorKind::validation,
            "Tensor: dimensions must be positive");
    Tensor t;
    t.shape = {n, c, h, w};
    t.v.assign(static_cast<std::size_t>(t.numel()), 0.0f);
    return t;
}

}  // namespace shadowad
