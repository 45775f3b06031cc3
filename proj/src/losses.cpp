#include "shadowad/losses.hpp"

#include <cmath>

#include "shadowad/common.hpp"

namespace shadowad {

namespace {

void check_prediction(const PredictionMap& map, const BinaryMask& mask, const char* name) {
    require(map.height == mask.height && map.width == mask.width, ErrorKind::validation,
            std::string(name) + ": prediction/mask shape mismatch");
    for (float v : map.data)
        require(v >= 0.0f && v <= 1.0f, ErrorKind::validation,
                std::string(name) + ": prediction outside [0,1]");
}

}  // namespace

NonShadowLoss loss_nsd(const Image& a_log, const Image& input_log, const BinaryMask& mask) {
    require(a_log.height == input_log.height && a_log.width == input_log.width &&
                a_log.height == mask.height && a_log.width == mask.width,
            ErrorKind::validation, "loss_nsd: shape mismatch");
    require(a_log.domain == Domain::log && input_log.domain == Domain::log,
            ErrorKind::validation, "loss_nsd: both images must be log domain");
    const std::size_t plane = a_log.plane();

    std::size_t outside = 0;
    for (std::size_t i = 0; i < plane; ++i) outside += mask.data[i] == 0;
    require(outside > 0, ErrorKind::validation, "loss_nsd: mask covers every pixel");

    NonShadowLoss out;
    out.grad_a.assign(3 * plane, 0.0f);
    double acc = 0.0;
    const double inv = 1.0 / double(outside);
    for (std::size_t i = 0; i < plane; ++i) {
        if (mask.data[i] != 0) continue;
        for (int c = 0; c < 3; ++c) {
            const std::size_t j = static_cast<std::size_t>(c) * plane + i;
            const double d = double(a_log.data[j]) - double(input_log.data[j]);
            acc += std::fabs(d);
            if (d > 0.0)
                out.grad_a[j] = static_cast<float>(inv);
            else if (d < 0.0)
                out.grad_a[j] = static_cast<float>(-inv);
        }
    }
    out.value = acc * inv;
    return out;
}

ShadowLoss loss_sd(const PredictionMap& d_on_a, const BinaryMask& mask) {
    check_prediction(d_on_a, mask, "loss_sd");
    const std::size_t plane = d_on_a.data.size();

    std::size_t inside = 0;
    for (std::size_t i = 0; i < plane; ++i) inside += mask.data[i] != 0;
    require(inside > 0, ErrorKind::validation, "loss_sd: empty shadow mask");

    ShadowLoss out;
    out.grad_d.assign(plane, 0.0f);
    double acc = 0.0;
    const double inv = 1.0 / double(inside);
    for (std::size_t i = 0; i < plane; ++i) {
        if (mask.data[i] == 0) continue;
        acc += double(d_on_a.data[i]);
        out.grad_d[i] = static_cast<float>(inv);
    }
    out.value = acc * inv;
    return out;
}

AttenuatorLoss attenuator_loss(const Image& input_log, const BinaryMask& mask,
                               const Image& a_log, const PredictionMap& d_on_a,
                               const LossWeights& weights) {
    weights.validate();
    NonShadowLoss nsd = loss_nsd(a_log, input_log, mask);
    ShadowLoss sd = loss_sd(d_on_a, mask);

    AttenuatorLoss out;
    out.nsd = nsd.value;
    out.sd = sd.value;
    out.grad_a.assign(nsd.grad_a.size(), 0.0f);
    out.ph = physics_loss(a_log, input_log, mask, out.grad_a);

    // grad_a = lambda_nsd * g_nsd + lambda_ph * g_ph (physics_loss wrote
    // g_ph into the buffer); the sd term travels via grad_d_on_a.
    for (std::size_t i = 0; i < out.grad_a.size(); ++i)
        out.grad_a[i] = static_cast<float>(weights.ph * double(out.grad_a[i]) +
                                           weights.nsd * double(nsd.grad_a[i]));
    out.grad_d_on_a.assign(sd.grad_d.size(), 0.0f);
    for (std::size_t i = 0; i < sd.grad_d.size(); ++i)
        out.grad_d_on_a[i] = static_cast<float>(weights.sd * double(sd.grad_d[i]));

    out.total = weights.nsd * out.nsd + weights.sd * out.sd +
                weights.ph * out.ph;
    return out;
}

DetectorLoss detector_loss(const PredictionMap& d_on_real, const PredictionMap& d_on_adv,
                           const BinaryMask& mask, double lambda_adv,
                           const LossWeights& weights) {
    weights.validate();
    check_prediction(d_on_real, mask, "detector_loss(real)");
    check_prediction(d_on_adv, mask, "detector_loss(adv)");
    require(std::isfinite(lambda_adv) && lambda_adv >= 0.0, ErrorKind::validation,
            "detector_loss: lambda_adv must be finite and nonnegative");

    const std::size_t n = d_on_real.data.size();
    const double inv = 1.0 / double(n);

    DetectorLoss out;
    out.grad_real.assign(n, 0.0f);
    out.grad_adv.assign(n, 0.0f);

    double acc_real = 0.0, acc_adv = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double m = mask.data[i] != 0 ? 1.0 : 0.0;
        const double dr = double(d_on_real.data[i]) - m;
        const double da = double(d_on_adv.data[i]) - m;
        acc_real += std::fabs(dr);
        acc_adv += std::fabs(da);
        if (dr != 0.0)
            out.grad_real[i] = static_cast<float>(weights.real * (dr > 0.0 ? inv : -inv));
        if (lambda_adv != 0.0 && da != 0.0)
            out.grad_adv[i] = static_cast<float>(lambda_adv * (da > 0.0 ? inv : -inv));
    }
    out.real_term = weights.real * acc_real * inv;
    out.adv_term = lambda_adv * acc_adv * inv;
    out.total = out.real_term + out.adv_term;
    return out;
}

}  // namespace shadowad
