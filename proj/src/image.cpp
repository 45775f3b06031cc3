#include "shadowad/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "shadowad/common.hpp"

namespace shadowad {

namespace {

void check_dims(int height, int width) {
    require(height >= 1 && width >= 1, ErrorKind::validation,
            "image dimensions must be positive, got " + std::to_string(height) + "x" +
                std::to_string(width));
}

// Shared bilinear core: planar source, centers at (i + 0.5) / n, edge clamp.
void resample_planes(const float* src, int channels, int ih, int iw, float* dst, int oh, int ow) {
    const double sy = static_cast<double>(ih) / oh;
    const double sx = static_cast<double>(iw) / ow;
#pragma omp parallel for
    for (int oy = 0; oy < oh; ++oy) {
        double fy = (oy + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        double wy = fy - y0;
        int ya = std::clamp(y0, 0, ih - 1);
        int yb = std::clamp(y0 + 1, 0, ih - 1);
        for (int ox = 0; ox < ow; ++ox) {
            double fx = (ox + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            double wx = fx - x0;
            int xa = std::clamp(x0, 0, iw - 1);
            int xb = std::clamp(x0 + 1, 0, iw - 1);
            for (int c = 0; c < channels; ++c) {
                const float* p = src + static_cast<std::size_t>(c) * ih * iw;
                double top = (1.0 - wx) * p[ya * iw + xa] + wx * p[ya * iw + xb];
                double bot = (1.0 - wx) * p[yb * iw + xa] + wx * p[yb * iw + xb];
                dst[(static_cast<std::size_t>(c) * oh + oy) * ow + ox] =
                    static_cast<float>((1.0 - wy) * top + wy * bot);
            }
        }
    }
}

}  // namespace

Image Image::zeros(int height, int width, Domain domain) {
    check_dims(height, width);
    Image out;
    out.height = height;
    out.width = width;
    out.domain = domain;
    out.data.assign(static_cast<std::size_t>(3) * height * width, 0.0f);
    return out;
}

Image Image::constant(int height, int width, float r, float g, float b) {
    Image out = zeros(height, width);
    const float v[3] = {r, g, b};
    for (int c = 0; c < 3; ++c)
        std::fill_n(out.data.begin() + c * out.plane(), out.plane(), v[c]);
    return out;
}

BinaryMask BinaryMask::zeros(int height, int width) {
    check_dims(height, width);
    BinaryMask out;
    out.height = height;
    out.width = width;
    out.data.assign(static_cast<std::size_t>(height) * width, 0);
    return out;
}

std::size_t BinaryMask::count_true() const {
    std::size_t n = 0;
    for (std::uint8_t v : data) n += v != 0;
    return n;
}

PredictionMap PredictionMap::zeros(int height, int width) {
    check_dims(height, width);
    PredictionMap out;
    out.height = height;
    out.width = width;
    out.data.assign(static_cast<std::size_t>(height) * width, 0.0f);
    return out;
}

Image to_log_space(const Image& image, float eps) {
    require(image.domain == Domain::linear, ErrorKind::validation,
            "to_log_space: input already in log domain");
    require(eps > 0.0f, ErrorKind::validation, "to_log_space: eps must be positive");
    Image out = image;
    out.domain = Domain::log;
#pragma omp parallel for
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(out.data.size()); ++i)
        out.data[i] = std::log(std::max(image.data[i], eps));
    return out;
}

Image from_log_space(const Image& image) {
    require(image.domain == Domain::log, ErrorKind::validation,
            "from_log_space: input is not in log domain");
    Image out = image;
    out.domain = Domain::linear;
#pragma omp parallel for
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(out.data.size()); ++i)
        out.data[i] = std::clamp(std::exp(image.data[i]), 0.0f, 1.0f);
    return out;
}

Image resize_image(const Image& image, int out_height, int out_width) {
    check_dims(image.height, image.width);
    check_dims(out_height, out_width);
    if (out_height == image.height && out_width == image.width) return image;
    Image out = Image::zeros(out_height, out_width, image.domain);
    resample_planes(image.data.data(), 3, image.height, image.width, out.data.data(), out_height,
                    out_width);
    return out;
}

PredictionMap resize_prediction(const PredictionMap& map, int out_height, int out_width) {
    check_dims(map.height, map.width);
    check_dims(out_height, out_width);
    if (out_height == map.height && out_width == map.width) return map;
    PredictionMap out = PredictionMap::zeros(out_height, out_width);
    resample_planes(map.data.data(), 1, map.height, map.width, out.data.data(), out_height,
                    out_width);
    return out;
}

BinaryMask resize_mask(const BinaryMask& mask, int out_height, int out_width) {
    check_dims(mask.height, mask.width);
    check_dims(out_height, out_width);
    if (out_height == mask.height && out_width == mask.width) return mask;
    BinaryMask out = BinaryMask::zeros(out_height, out_width);
    const double sy = static_cast<double>(mask.height) / out_height;
    const double sx = static_cast<double>(mask.width) / out_width;
    for (int oy = 0; oy < out_height; ++oy) {
        int y = std::min(static_cast<int>((oy + 0.5) * sy), mask.height - 1);
        for (int ox = 0; ox < out_width; ++ox) {
            int x = std::min(static_cast<int>((ox + 0.5) * sx), mask.width - 1);
            out.set(oy, ox, mask.at(y, x));
        }
    }
    return out;
}

}  // namespace shadowad
