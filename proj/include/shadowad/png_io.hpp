#pragma once

#include <filesystem>

#include "shadowad/image.hpp"

namespace shadowad {

// 8-bit RGB PNG -> linear-domain Image, v / 255. Rejects grayscale, palette,
// 16-bit and alpha files rather than converting them silently.
Image load_image_png(const std::filesystem::path& path);

// Linear-domain Image -> 8-bit RGB PNG, round(clamp(v, 0, 1) * 255).
void save_image_png(const Image& image, const std::filesystem::path& path);

// 8-bit grayscale PNG -> mask, value > 127 is shadow.
BinaryMask load_mask_png(const std::filesystem::path& path);

// Mask -> 8-bit grayscale PNG, shadow = 255.
void save_mask_png(const BinaryMask& mask, const std::filesystem::path& path);

// Prediction map -> 8-bit grayscale PNG, round(clamp(v, 0, 1) * 255).
void save_prediction_png(const PredictionMap& map, const std::filesystem::path& path);

}  // namespace shadowad
