#pragma once

#include <vector>

#include "shadowad/image.hpp"
#include "shadowad/physics.hpp"

namespace shadowad {

// L_nsd: mean over non-shadow pixels of the per-pixel L1 norm (sum of the
// three channel absolute differences) between the attenuated and the input
// image, both log domain. The gradient w.r.t. a_log is sign/count outside
// the mask, zero inside, subgradient 0 at exact ties.
struct NonShadowLoss {
    double value = 0.0;
    std::vector<float> grad_a;  // 3*H*W
};
NonShadowLoss loss_nsd(const Image& a_log, const Image& input_log, const BinaryMask& mask);

// L_sd: mean detector output over shadow pixels; pushing it down means the
// detector no longer recognizes the attenuated shadow. Gradient w.r.t. the
// prediction is 1/N_shadow inside the mask, zero outside.
struct ShadowLoss {
    double value = 0.0;
    std::vector<float> grad_d;  // H*W
};
ShadowLoss loss_sd(const PredictionMap& d_on_a, const BinaryMask& mask);

// Full attenuator objective: lambda_nsd*L_nsd + lambda_sd*L_sd +
// lambda_ph*L_ph. grad_a carries the direct terms (nsd + ph) w.r.t. the
// attenuated log image; grad_d_on_a carries the sd term, which the caller
// backpropagates through the detector to reach the attenuator.
struct AttenuatorLoss {
    double total = 0.0;
    double nsd = 0.0;  // unweighted components
    double sd = 0.0;
    double ph = 0.0;
    std::vector<float> grad_a;       // 3*H*W
    std::vector<float> grad_d_on_a;  // H*W
};
AttenuatorLoss attenuator_loss(const Image& input_log, const BinaryMask& mask,
                               const Image& a_log, const PredictionMap& d_on_a,
                               const LossWeights& weights);

// Detector objective for one sample: lambda_real*mean|D(I)-M| +
// lambda_adv*mean|D(A(I))-M|, each mean over all pixels so the weights keep
// their meaning across resolutions. lambda_adv comes from the per-sample
// shadow-strength gate. real_term/adv_term are reported already weighted.
struct DetectorLoss {
    double total = 0.0;
    double real_term = 0.0;
    double adv_term = 0.0;
    std::vector<float> grad_real;  // H*W
    std::vector<float> grad_adv;   // H*W, identically 0 when lambda_adv == 0
};
DetectorLoss detector_loss(const PredictionMap& d_on_real, const PredictionMap& d_on_adv,
                           const BinaryMask& mask, double lambda_adv,
                           const LossWeights& weights);

}  // namespace shadowad
