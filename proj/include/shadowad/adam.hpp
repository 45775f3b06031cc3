#pragma once

#include <cstdint>
#include <vector>

#include "shadowad/unet.hpp"

namespace shadowad::nets {

struct AdamConfig {
    double lr = 2e-4;
    double beta1 = 0.5;  // GAN-style low momentum
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const;
};

// First/second-moment state aligned with the network's tensor registry;
// slots for buffers stay empty. `step` counts completed updates.
struct AdamState {
    AdamConfig config;
    std::int64_t step = 0;
    std::vector<std::vector<float>> m, v;

    static AdamState init(const UNet& net, const AdamConfig& config);
};

// One bias-corrected Adam update. Rejects non-finite gradients with a
// numeric error *before* touching parameters or moments — a poisoned batch
// must not corrupt the model. Bumps the network's parameter version.
void adam_step(UNet& net, const ParamGrads& grads, AdamState& state);

}  // namespace shadowad::nets
