#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "shadowad/image.hpp"
#include "shadowad/physics.hpp"
#include "shadowad/rng.hpp"

namespace shadowad::synth {

enum class Texture { flat, checker, smooth_noise };

Texture texture_from_string(const std::string& name);
std::string to_string(Texture texture);

// Recipe for a generated dataset. Everything downstream is a pure function
// of this struct, so equal specs produce byte-identical datasets.
struct DatasetSpec {
    int count = 1;
    int size = 64;  // square images
    float k_lo = 0.1f;
    float k_hi = 0.6f;
    float penumbra_sigma = 1.0f;
    Texture texture = Texture::smooth_noise;
    std::uint64_t seed = 0;

    void validate() const;
};

// Ground truth retained alongside a generated sample.
struct Provenance {
    Image reflectance;
    KFactorMap k;
    IlluminationParams lights;
    float k_core = 0.0f;
};

struct Sample {
    Image image;  // linear domain
    BinaryMask mask;
    std::optional<Provenance> provenance;
};

// Reflectance textures, values in [0.15, 0.95]; the floor keeps shadows
// distinguishable from dark albedo and log-ratios finite.
Image generate_reflectance(const DatasetSpec& spec, SplitMix64& rng);

struct KMapResult {
    KFactorMap k;
    BinaryMask mask;
    float k_core = 0.0f;
};

// Random blob (union of 1-3 ellipses, 5-40% of area, clear of a
// 2*band_radius border margin) at k_core, blurred into a penumbra; the mask
// thresholds at the penumbra midpoint (1+k_core)/2.
KMapResult generate_k_map(const DatasetSpec& spec, SplitMix64& rng);

// One sample from its index: a fresh rng stream derived from (seed, index),
// draws lights, then reflectance, then the k-map, and renders.
Sample generate_sample(const DatasetSpec& spec, int index);

std::vector<Sample> generate_dataset(const DatasetSpec& spec);

// Writes images/NNNN.png, masks/NNNN.png and manifest.json under dir.
void write_dataset(const std::vector<Sample>& samples, const DatasetSpec& spec,
                   const std::filesystem::path& dir);

// Directory-pair dataset: same-stem PNGs in both directories, returned in
// lexicographic stem order with empty provenance. All layout problems are
// collected and reported together.
std::vector<Sample> load_directory_dataset(const std::filesystem::path& image_dir,
                                           const std::filesystem::path& mask_dir);

}  // namespace shadowad::synth
