#include "shadowad/physics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "shadowad/common.hpp"
#include "shadowad/morphology.hpp"

namespace shadowad {

namespace {

const float kLogFloor = std::log(kEpsLog);

std::vector<std::int32_t> mask_offsets(const BinaryMask& mask) {
    std::vector<std::int32_t> px;
    for (std::size_t i = 0; i < mask.data.size(); ++i)
        if (mask.data[i]) px.push_back(static_cast<std::int32_t>(i));
    return px;
}

}  // namespace

void IlluminationParams::validate(float max_reflectance) const {
    require(max_reflectance > 0.0f, ErrorKind::validation,
            "IlluminationParams: max_reflectance must be positive");
    for (int c = 0; c < 3; ++c) {
        require(std::isfinite(direct[c]) && direct[c] > 0.0f, ErrorKind::validation,
                "IlluminationParams: direct light must be positive in every channel");
        require(std::isfinite(environment[c]) && environment[c] > 0.0f, ErrorKind::validation,
                "IlluminationParams: environment light must be positive in every channel");
        float peak = max_reflectance * (direct[c] + environment[c]);
        require(peak <= 1.0f + 1e-6f, ErrorKind::validation,
                "IlluminationParams: lights overflow the [0,1] range (channel " +
                    std::to_string(c) + " peaks at " + std::to_string(peak) + ")");
    }
}

KFactorMap KFactorMap::ones(int height, int width) {
    require(height >= 1 && width >= 1, ErrorKind::validation, "KFactorMap: empty dimensions");
    KFactorMap out;
    out.height = height;
    out.width = width;
    out.data.assign(static_cast<std::size_t>(height) * width, 1.0f);
    return out;
}

void KFactorMap::validate() const {
    for (float v : data)
        require(std::isfinite(v) && v >= 0.0f && v <= 1.0f, ErrorKind::validation,
                "KFactorMap: values must lie in [0,1]");
}

void LossWeights::validate() const {
    require(nsd >= 0 && sd >= 0 && ph >= 0 && real >= 0 && adv0 >= 0, ErrorKind::validation,
            "LossWeights: weights must be non-negative");
    require(epsilon > 0, ErrorKind::validation, "LossWeights: epsilon must be positive");
}

Image render_shadow_image(const Image& reflectance, const KFactorMap& k,
                          const IlluminationParams& lights) {
    require(reflectance.domain == Domain::linear, ErrorKind::validation,
            "render_shadow_image: reflectance must be linear domain");
    require(reflectance.height == k.height && reflectance.width == k.width, ErrorKind::validation,
            "render_shadow_image: reflectance/k-map shape mismatch");
    float peak = *std::max_element(reflectance.data.begin(), reflectance.data.end());
    lights.validate(peak);
    Image out = Image::zeros(reflectance.height, reflectance.width);
    const std::size_t plane = out.plane();
    for (int c = 0; c < 3; ++c) {
        const float ld = lights.direct[c];
        const float le = lights.environment[c];
        const float* r = reflectance.data.data() + c * plane;
        float* o = out.data.data() + c * plane;
#pragma omp parallel for
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(plane); ++i)
            o[i] = (k.data[i] * ld + le) * r[i];
    }
    return out;
}

std::array<double, 3> shadow_free_ratio(const IlluminationParams& lights, double k) {
    require(k >= 0.0 && k <= 1.0, ErrorKind::validation, "shadow_free_ratio: k outside [0,1]");
    std::array<double, 3> out{};
    for (int c = 0; c < 3; ++c) {
        double ld = lights.direct[c], le = lights.environment[c];
        require(le > 0.0, ErrorKind::validation, "shadow_free_ratio: zero environment light");
        out[c] = (ld + le) / (k * ld + le);
    }
    return out;
}

double mean_channel_shadow_free_ratio(const IlluminationParams& lights, double k) {
    double ld = (lights.direct[0] + lights.direct[1] + lights.direct[2]) / 3.0;
    double le = (lights.environment[0] + lights.environment[1] + lights.environment[2]) / 3.0;
    require(le > 0.0, ErrorKind::validation, "shadow_free_ratio: zero environment light");
    require(k >= 0.0 && k <= 1.0, ErrorKind::validation, "shadow_free_ratio: k outside [0,1]");
    return (ld + le) / (k * ld + le);
}

double shadow_strength(const Image& image, const BinaryMask& mask, int band_radius) {
    require(image.height == mask.height && image.width == mask.width, ErrorKind::validation,
            "shadow_strength: image/mask shape mismatch");
    BoundaryBands bands = boundary_bands(mask, band_radius);
    std::vector<std::int32_t> in_px = mask_offsets(bands.inside);
    std::vector<std::int32_t> out_px = mask_offsets(bands.outside);
    return shadow_strength_with_bands(image, in_px, out_px);
}

double shadow_strength_with_bands(const Image& image, std::span<const std::int32_t> band_in,
                                  std::span<const std::int32_t> band_out) {
    require(!band_in.empty() && !band_out.empty(), ErrorKind::validation,
            "shadow_strength: empty boundary band");
    const std::size_t plane = image.plane();
    const float* r = image.data.data();
    const float* g = r + plane;
    const float* b = g + plane;
    double sum_in = 0.0, sum_out = 0.0;
    for (std::int32_t i : band_in) sum_in += (r[i] + g[i] + b[i]) / 3.0;
    for (std::int32_t i : band_out) sum_out += (r[i] + g[i] + b[i]) / 3.0;
    double mean_in = sum_in / static_cast<double>(band_in.size());
    double mean_out = sum_out / static_cast<double>(band_out.size());
    return mean_out / std::max(mean_in, static_cast<double>(kEpsLog));
}

double adaptive_adv_weight(double k_strength, const LossWeights& weights) {
    require(std::isfinite(k_strength), ErrorKind::numeric,
            "adaptive_adv_weight: non-finite shadow strength");
    return k_strength > 1.0 + weights.epsilon ? weights.adv0 : 0.0;
}

double physics_loss(const Image& a_log, const Image& input_log, const BinaryMask& mask,
                    std::span<float> grad_a) {
    require(a_log.domain == Domain::log && input_log.domain == Domain::log, ErrorKind::validation,
            "physics_loss: both images must be log domain");
    require(a_log.height == input_log.height && a_log.width == input_log.width &&
                a_log.height == mask.height && a_log.width == mask.width,
            ErrorKind::validation, "physics_loss: shape mismatch");
    require(grad_a.empty() || grad_a.size() == a_log.data.size(), ErrorKind::validation,
            "physics_loss: gradient buffer has wrong size");
    std::vector<std::int32_t> px = mask_offsets(mask);
    require(px.size() >= 2, ErrorKind::validation,
            "physics_loss: variance needs at least two shadow pixels");
    if (!grad_a.empty()) std::fill(grad_a.begin(), grad_a.end(), 0.0f);

    const std::size_t plane = a_log.plane();
    const double n = static_cast<double>(px.size());
    double total = 0.0;
    for (int c = 0; c < 3; ++c) {
        const float* a = a_log.data.data() + c * plane;
        const float* in = input_log.data.data() + c * plane;
        double sum = 0.0;
        for (std::int32_t i : px)
            sum += static_cast<double>(std::max(a[i], kLogFloor)) - std::max(in[i], kLogFloor);
        double mean = sum / n;
        double var = 0.0;
        for (std::int32_t i : px) {
            double d = (static_cast<double>(std::max(a[i], kLogFloor)) - std::max(in[i], kLogFloor)) - mean;
            var += d * d;
        }
        var /= n;
        total += var;
        if (!grad_a.empty()) {
            float* ga = grad_a.data() + c * plane;
            for (std::int32_t i : px) {
                if (a[i] < kLogFloor) continue;  // clamp is flat below the floor
                double d = (static_cast<double>(std::max(a[i], kLogFloor)) - std::max(in[i], kLogFloor)) - mean;
                ga[i] = static_cast<float>(2.0 * d / n);
            }
        }
    }
    return total;
}

}  // namespace shadowad
