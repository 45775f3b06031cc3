#pragma once

#include <array>
#include <span>
#include <vector>

#include "shadowad/image.hpp"

namespace shadowad {

// Two-light model: a pixel either sees the direct light fully, partially or
// not at all (factor k in [0, 1]) while the environment light is always on:
//   I_c = (k * direct_c + environment_c) * reflectance_c.
struct IlluminationParams {
    std::array<float, 3> direct{};
    std::array<float, 3> environment{};

    // Valid when every channel is positive and a fully lit white surface
    // cannot exceed the representable range: max_reflectance*(Ld+Le) <= 1.
    void validate(float max_reflectance) const;
};

// Per-pixel direct-light visibility; 1 = fully lit, 0 = umbra.
struct KFactorMap {
    int height = 0;
    int width = 0;
    std::vector<float> data;

    static KFactorMap ones(int height, int width);
    float at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
    float& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
    void validate() const;  // all values finite and in [0, 1]
};

struct LossWeights {
    double nsd = 30.0;   // lambda_nsd: keep lit pixels untouched
    double sd = 1.0;     // lambda_sd: fool the detector inside the mask
    double ph = 100.0;   // lambda_ph: per-channel log-ratio consistency
    double real = 0.8;   // lambda_real: detector supervision on real images
    double adv0 = 0.2;   // lambda_adv base value before gating
    double epsilon = 0.05;  // gate margin on the shadow-strength ratio

    void validate() const;
};

// Renders reflectance under the two-light model. Reflectance must be linear
// domain with values in [0, 1]; output is linear and guaranteed in [0, 1] by
// the IlluminationParams invariant.
Image render_shadow_image(const Image& reflectance, const KFactorMap& k,
                          const IlluminationParams& lights);

// Per-channel multiplier that removes a constant-k shadow:
//   (Ld_c + Le_c) / (k * Ld_c + Le_c).
std::array<double, 3> shadow_free_ratio(const IlluminationParams& lights, double k);

// Same ratio evaluated on channel means; equals the shadow-strength ratio a
// gray (channel-flat) reflectance produces.
double mean_channel_shadow_free_ratio(const IlluminationParams& lights, double k);

// Ratio of mean intensity just outside the mask boundary to just inside it,
// intensity = (R+G+B)/3. > 1 means a visible shadow remains. The denominator
// is floored at 1/255 so pitch-black interiors cannot blow up the ratio.
double shadow_strength(const Image& image, const BinaryMask& mask, int band_radius);

// Same, with precomputed band pixel indices (row-major offsets into a plane).
double shadow_strength_with_bands(const Image& image, std::span<const std::int32_t> band_in,
                                  std::span<const std::int32_t> band_out);

// lambda_adv for one sample: adv0 while the attenuated image still shows a
// shadow (strength > 1 + epsilon, strict), 0 once it is suppressed.
double adaptive_adv_weight(double k_strength, const LossWeights& weights);

// Physics consistency: sum over RGB of the population variance, inside the
// mask, of log(a) - log(input). Both images must be log domain; values are
// clamped below at log(kEpsLog) before differencing and clamped positions
// get zero gradient. grad_a has size 3*H*W (or empty to skip); the gradient
// is *written*, not accumulated.
double physics_loss(const Image& a_log, const Image& input_log, const BinaryMask& mask,
                    std::span<float> grad_a);

}  // namespace shadowad
