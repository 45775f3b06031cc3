#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace shadowad {

// Floor added before every log so black pixels stay finite; one LSB of 8-bit.
inline constexpr float kEpsLog = 1.0f / 255.0f;

enum class Domain { linear, log };

// Three-channel float image, planar layout (channel, row, column).
// Linear-domain values live in [0, 1]; log-domain values in [log(kEpsLog), 0].
struct Image {
    int height = 0;
    int width = 0;
    Domain domain = Domain::linear;
    std::vector<float> data;  // size 3 * height * width

    static Image zeros(int height, int width, Domain domain = Domain::linear);
    static Image constant(int height, int width, float r, float g, float b);

    std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
    float& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
    float at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
};

// Per-pixel shadow/non-shadow labels; true means shadow.
struct BinaryMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;

    static BinaryMask zeros(int height, int width);

    bool at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int y, int x, bool v) { data[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
    std::size_t count_true() const;
};

struct DistanceMap {
    int height = 0;
    int width = 0;
    std::vector<float> data;

    float at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

// Single-channel float map in [0, 1]; detector output.
struct PredictionMap {
    int height = 0;
    int width = 0;
    std::vector<float> data;

    static PredictionMap zeros(int height, int width);
    float at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

// v -> log(max(v, eps)). Input must be linear-domain.
Image to_log_space(const Image& image, float eps = kEpsLog);

// v -> clamp(exp(v), 0, 1). Input must be log-domain.
Image from_log_space(const Image& image);

// Bilinear resampling with pixel centers at (i + 0.5) / n and clamped edge
// handling; channels are resampled independently and the domain tag is kept.
Image resize_image(const Image& image, int out_height, int out_width);

// Same sampling grid as resize_image, bilinear.
PredictionMap resize_prediction(const PredictionMap& map, int out_height, int out_width);

// Nearest-neighbour so labels stay crisp.
BinaryMask resize_mask(const BinaryMask& mask, int out_height, int out_width);

}  // namespace shadowad
