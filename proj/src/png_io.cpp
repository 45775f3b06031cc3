#include "shadowad/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "shadowad/common.hpp"

namespace shadowad {

namespace {

constexpr int kMinSide = 8;  // pipeline entry floor; tiny inputs are almost always a caller bug

[[noreturn]] void png_fail(const png_image& png, const std::filesystem::path& path,
                           const char* what) {
    std::string detail = png.message[0] ? png.message : "unknown libpng error";
    fail(ErrorKind::io, std::string(what) + " " + path.string() + ": " + detail);
}

std::vector<std::uint8_t> read_png(const std::filesystem::path& path, png_uint_32 want_format,
                                   const char* want_name, int* height, int* width) {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.string().c_str()))
        png_fail(png, path, "cannot read PNG");
    if (png.format != want_format) {
        png_uint_32 got = png.format;
        png_image_free(&png);
        fail(ErrorKind::io, "unsupported PNG layout in " + path.string() + " (format flags " +
                                std::to_string(got) + "), expected 8-bit " + want_name);
    }
    *height = static_cast<int>(png.height);
    *width = static_cast<int>(png.width);
    require(*height >= kMinSide && *width >= kMinSide, ErrorKind::validation,
            "PNG " + path.string() + " smaller than " + std::to_string(kMinSide) + "px per side");
    std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, bytes.data(), 0, nullptr))
        png_fail(png, path, "cannot decode PNG");
    return bytes;
}

void write_png(const std::filesystem::path& path, png_uint_32 format, int height, int width,
               const std::uint8_t* bytes) {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.format = format;
    png.height = static_cast<png_uint_32>(height);
    png.width = static_cast<png_uint_32>(width);
    if (!png_image_write_to_file(&png, path.string().c_str(), 0, bytes, 0, nullptr))
        png_fail(png, path, "cannot write PNG");
}

std::uint8_t quantize(float v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

}  // namespace

Image load_image_png(const std::filesystem::path& path) {
    int h = 0, w = 0;
    std::vector<std::uint8_t> bytes = read_png(path, PNG_FORMAT_RGB, "RGB", &h, &w);
    Image out = Image::zeros(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                out.at(c, y, x) = bytes[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 255.0f;
    return out;
}

void save_image_png(const Image& image, const std::filesystem::path& path) {
    require(image.domain == Domain::linear, ErrorKind::validation,
            "save_image_png: log-domain image; convert with from_log_space first");
    std::vector<std::uint8_t> bytes(image.plane() * 3);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            for (int c = 0; c < 3; ++c)
                bytes[(static_cast<std::size_t>(y) * image.width + x) * 3 + c] =
                    quantize(image.at(c, y, x));
    write_png(path, PNG_FORMAT_RGB, image.height, image.width, bytes.data());
}

BinaryMask load_mask_png(const std::filesystem::path& path) {
    int h = 0, w = 0;
    std::vector<std::uint8_t> bytes = read_png(path, PNG_FORMAT_GRAY, "grayscale", &h, &w);
    BinaryMask out = BinaryMask::zeros(h, w);
    for (std::size_t i = 0; i < bytes.size(); ++i) out.data[i] = bytes[i] > 127 ? 1 : 0;
    return out;
}

void save_mask_png(const BinaryMask& mask, const std::filesystem::path& path) {
    std::vector<std::uint8_t> bytes(mask.data.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = mask.data[i] ? 255 : 0;
    write_png(path, PNG_FORMAT_GRAY, mask.height, mask.width, bytes.data());
}

void save_prediction_png(const PredictionMap& map, const std::filesystem::path& path) {
    std::vector<std::uint8_t> bytes(map.data.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = quantize(map.data[i]);
    write_png(path, PNG_FORMAT_GRAY, map.height, map.width, bytes.data());
}

}  // namespace shadowad
