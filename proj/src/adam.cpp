#include "shadowad/adam.hpp"

#include <cmath>

#include "shadowad/common.hpp"

namespace shadowad::nets {

void AdamConfig::validate() const {
    require(lr > 0.0 && std::isfinite(lr), ErrorKind::validation, "Adam: lr must be positive");
    require(beta1 >= 0.0 && beta1 < 1.0, ErrorKind::validation, "Adam: beta1 must be in [0,1)");
    require(beta2 >= 0.0 && beta2 < 1.0, ErrorKind::validation, "Adam: beta2 must be in [0,1)");
    require(eps > 0.0, ErrorKind::validation, "Adam: eps must be positive");
}

AdamState AdamState::init(const UNet& net, const AdamConfig& config) {
    config.validate();
    AdamState st;
    st.config = config;
    st.m.resize(net.tensors().size());
    st.v.resize(net.tensors().size());
    for (std::size_t i = 0; i < net.tensors().size(); ++i) {
        if (!net.tensors()[i].trainable) continue;
        st.m[i].assign(net.tensors()[i].v.size(), 0.0f);
        st.v[i].assign(net.tensors()[i].v.size(), 0.0f);
    }
    return st;
}

void adam_step(UNet& net, const ParamGrads& grads, AdamState& state) {
    require(grads.g.size() == net.tensors().size() && state.m.size() == net.tensors().size(),
            ErrorKind::validation, "adam_step: state/gradient layout mismatch");
    require(grads.all_finite(), ErrorKind::numeric,
            "adam_step: non-finite gradient, refusing to update");

    const double b1 = state.config.beta1, b2 = state.config.beta2;
    const std::int64_t t = state.step + 1;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t));
    const double lr = state.config.lr, eps = state.config.eps;

    auto& tensors = net.tensors();
#pragma omp parallel for
    for (std::int64_t ti = 0; ti < static_cast<std::int64_t>(tensors.size()); ++ti) {
        if (!tensors[ti].trainable) continue;
        auto& p = tensors[ti].v;
        auto& m = state.m[ti];
        auto& v = state.v[ti];
        const auto& g = grads.g[ti];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = g[i];
            const double mi = b1 * m[i] + (1.0 - b1) * gi;
            const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
            m[i] = static_cast<float>(mi);
            v[i] = static_cast<float>(vi);
            p[i] = static_cast<float>(p[i] - lr * (mi / bc1) / (std::sqrt(vi / bc2) + eps));
        }
    }
    state.step = t;
    net.note_params_changed();
}

}  // namespace shadowad::nets
