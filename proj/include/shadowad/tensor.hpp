#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace shadowad {

// Dense NCHW float tensor. Parameters and activations are stored in float32
// (checkpoints carry the exact bits); every reduction over tensor elements
// accumulates in double, in a fixed sequential order, so results do not
// depend on the OpenMP thread count.
struct Tensor {
    std::array<int, 4> shape{0, 0, 0, 0};  // n, c, h, w
    std::vector<float> v;

    static Tensor zeros(int n, int c, int h, int w);

    std::int64_t numel() const {
        return static_cast<std::int64_t>(shape[0]) * shape[1] * shape[2] * shape[3];
    }
    int n() const { return shape[0]; }
    int c() const { return shape[1]; }
    int h() const { return shape[2]; }
    int w() const { return shape[3]; }

    float* data() { return v.data(); }
    const float* data() const { return v.data(); }

    float& at(int in, int ic, int iy, int ix) {
        return v[((static_cast<std::int64_t>(in) * shape[1] + ic) * shape[2] + iy) * shape[3] + ix];
    }
    float at(int in, int ic, int iy, int ix) const {
        return v[((static_cast<std::int64_t>(in) * shape[1] + ic) * shape[2] + iy) * shape[3] + ix];
    }
};

}  // namespace shadowad
