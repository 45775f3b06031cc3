#include "shadowad/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>

#include <json.hpp>

#include "shadowad/common.hpp"
#include "shadowad/morphology.hpp"
#include "shadowad/png_io.hpp"

namespace shadowad::synth {

namespace {

constexpr float kReflectanceLo = 0.15f;
constexpr float kReflectanceHi = 0.95f;
constexpr int kTexturePeriod = 8;
constexpr int kBlobAttempts = 100;

void fill_gray(Image& image, int y, int x, float v) {
    for (int c = 0; c < 3; ++c) image.at(c, y, x) = v;
}

}  // namespace

Texture texture_from_string(const std::string& name) {
    if (name == "flat") return Texture::flat;
    if (name == "checker") return Texture::checker;
    if (name == "smooth-noise") return Texture::smooth_noise;
    fail(ErrorKind::validation, "unknown texture: " + name);
}

std::string to_string(Texture texture) {
    switch (texture) {
        case Texture::flat: return "flat";
        case Texture::checker: return "checker";
        case Texture::smooth_noise: return "smooth-noise";
    }
    fail(ErrorKind::validation, "invalid texture value");
}

void DatasetSpec::validate() const {
    require(count >= 1, ErrorKind::validation, "dataset count must be >= 1");
    require(size >= 8, ErrorKind::validation, "dataset size must be >= 8");
    require(std::isfinite(k_lo) && std::isfinite(k_hi) && 0.0f <= k_lo && k_lo <= k_hi &&
                k_hi <= 1.0f,
            ErrorKind::validation, "k range must satisfy 0 <= k_lo <= k_hi <= 1");
    require(std::isfinite(penumbra_sigma) && penumbra_sigma >= 0.0f, ErrorKind::validation,
            "penumbra sigma must be >= 0");
}

Image generate_reflectance(const DatasetSpec& spec, SplitMix64& rng) {
    const int s = spec.size;
    Image out = Image::zeros(s, s);
    switch (spec.texture) {
        case Texture::flat: {
            const float v = static_cast<float>(rng.uniform(kReflectanceLo, kReflectanceHi));
            for (float& d : out.data) d = v;
            break;
        }
        case Texture::checker: {
            const float a = static_cast<float>(rng.uniform(kReflectanceLo, kReflectanceHi));
            const float b = static_cast<float>(rng.uniform(kReflectanceLo, kReflectanceHi));
            for (int y = 0; y < s; ++y)
                for (int x = 0; x < s; ++x)
                    fill_gray(out, y, x,
                              ((y / kTexturePeriod + x / kTexturePeriod) % 2 == 0) ? a : b);
            break;
        }
        case Texture::smooth_noise: {
            // Value noise: a lattice every kTexturePeriod pixels, drawn
            // row-major, interpolated bilinearly.
            const int nodes = (s + kTexturePeriod - 1) / kTexturePeriod + 1;
            std::vector<float> lattice(static_cast<std::size_t>(nodes) * nodes);
            for (float& v : lattice)
                v = static_cast<float>(rng.uniform(kReflectanceLo, kReflectanceHi));
            auto node = [&](int j, int i) { return lattice[static_cast<std::size_t>(j) * nodes + i]; };
            for (int y = 0; y < s; ++y) {
                const double fy = double(y) / kTexturePeriod;
                const int j0 = static_cast<int>(fy);
                const double ty = fy - j0;
                for (int x = 0; x < s; ++x) {
                    const double fx = double(x) / kTexturePeriod;
                    const int i0 = static_cast<int>(fx);
                    const double tx = fx - i0;
                    const double top = node(j0, i0) + tx * (node(j0, i0 + 1) - node(j0, i0));
                    const double bot =
                        node(j0 + 1, i0) + tx * (node(j0 + 1, i0 + 1) - node(j0 + 1, i0));
                    fill_gray(out, y, x, static_cast<float>(top + ty * (bot - top)));
                }
            }
            break;
        }
    }
    return out;
}

KMapResult generate_k_map(const DatasetSpec& spec, SplitMix64& rng) {
    const int s = spec.size;
    const int margin = 2 * default_band_radius(s, s);
    const float k_core = static_cast<float>(rng.uniform(spec.k_lo, spec.k_hi));

    struct Ellipse {
        double cx, cy, a, b, cos_t, sin_t;
    };

    // Rejection-sample a blob meeting the area and margin contract.
    BinaryMask blob;
    bool found = false;
    for (int attempt = 0; attempt < kBlobAttempts && !found; ++attempt) {
        const int n = rng.uniform_int(1, 3);
        std::vector<Ellipse> ellipses(n);
        for (Ellipse& e : ellipses) {
            e.cx = rng.uniform(0.0, s);
            e.cy = rng.uniform(0.0, s);
            e.a = rng.uniform(0.10, 0.28) * s;
            e.b = rng.uniform(0.10, 0.28) * s;
            const double t = rng.uniform(0.0, 2.0 * std::numbers::pi);
            e.cos_t = std::cos(t);
            e.sin_t = std::sin(t);
        }
        BinaryMask candidate = BinaryMask::zeros(s, s);
        std::size_t area = 0;
        bool clear = true;
        for (int y = 0; y < s; ++y) {
            for (int x = 0; x < s; ++x) {
                const double px = x + 0.5, py = y + 0.5;
                bool inside = false;
                for (const Ellipse& e : ellipses) {
                    const double dx = px - e.cx, dy = py - e.cy;
                    const double u = (dx * e.cos_t + dy * e.sin_t) / e.a;
                    const double v = (-dx * e.sin_t + dy * e.cos_t) / e.b;
                    if (u * u + v * v <= 1.0) {
                        inside = true;
                        break;
                    }
                }
                if (!inside) continue;
                if (y < margin || y >= s - margin || x < margin || x >= s - margin) {
                    clear = false;
                    break;
                }
                candidate.set(y, x, true);
                ++area;
            }
            if (!clear) break;
        }
        // Slightly inside the contractual [0.05, 0.40] so the mask, whose
        // midpoint contour can shift sub-pixel under blur, stays in range.
        const double fraction = double(area) / (double(s) * s);
        if (clear && fraction >= 0.055 && fraction <= 0.395) {
            blob = std::move(candidate);
            found = true;
        }
    }
    require(found, ErrorKind::validation, "blob generation retries exhausted (degenerate spec)");

    KFactorMap k = KFactorMap::ones(s, s);
    for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x)
            if (blob.at(y, x)) k.at(y, x) = k_core;

    if (spec.penumbra_sigma > 0.0f) {
        // Separable Gaussian, radius ceil(3*sigma), constant-1 padding
        // (outside the frame there is no shadow). Double accumulation.
        const double sigma = spec.penumbra_sigma;
        const int r = static_cast<int>(std::ceil(3.0 * sigma));
        std::vector<double> w(static_cast<std::size_t>(2 * r + 1));
        double wsum = 0.0;
        for (int i = -r; i <= r; ++i) {
            w[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * (double(i) * i) / (sigma * sigma));
            wsum += w[static_cast<std::size_t>(i + r)];
        }
        for (double& v : w) v /= wsum;

        std::vector<double> horiz(static_cast<std::size_t>(s) * s);
        for (int y = 0; y < s; ++y)
            for (int x = 0; x < s; ++x) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i) {
                    const int xx = x + i;
                    const double v = (xx < 0 || xx >= s) ? 1.0 : double(k.at(y, xx));
                    acc += w[static_cast<std::size_t>(i + r)] * v;
                }
                horiz[static_cast<std::size_t>(y) * s + x] = acc;
            }
        for (int y = 0; y < s; ++y)
            for (int x = 0; x < s; ++x) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i) {
                    const int yy = y + i;
                    const double v =
                        (yy < 0 || yy >= s) ? 1.0 : horiz[static_cast<std::size_t>(yy) * s + x];
                    acc += w[static_cast<std::size_t>(i + r)] * v;
                }
                k.at(y, x) = static_cast<float>(std::min(acc, 1.0));
            }
    }

    const float threshold = 0.5f * (1.0f + k_core);
    BinaryMask mask = BinaryMask::zeros(s, s);
    for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) mask.set(y, x, k.at(y, x) < threshold);
    return KMapResult{std::move(k), std::move(mask), k_core};
}

Sample generate_sample(const DatasetSpec& spec, int index) {
    spec.validate();
    SplitMix64 rng(derive_seed(spec.seed, static_cast<std::uint64_t>(index)));

    // Draw order is part of the format: lights, reflectance, k-map.
    IlluminationParams lights;
    for (int c = 0; c < 3; ++c) lights.environment[c] = static_cast<float>(rng.uniform(0.1, 0.3));
    for (int c = 0; c < 3; ++c) lights.direct[c] = static_cast<float>(rng.uniform(0.4, 0.7));
    lights.validate(kReflectanceHi);

    Image reflectance = generate_reflectance(spec, rng);
    KMapResult km = generate_k_map(spec, rng);

    Sample sample;
    sample.image = render_shadow_image(reflectance, km.k, lights);
    sample.mask = std::move(km.mask);
    sample.provenance = Provenance{std::move(reflectance), std::move(km.k), lights, km.k_core};
    return sample;
}

std::vector<Sample> generate_dataset(const DatasetSpec& spec) {
    spec.validate();
    std::vector<Sample> samples(static_cast<std::size_t>(spec.count));
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < spec.count; ++i) samples[static_cast<std::size_t>(i)] = generate_sample(spec, i);
    return samples;
}

void write_dataset(const std::vector<Sample>& samples, const DatasetSpec& spec,
                   const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir / "images", ec);
    fs::create_directories(dir / "masks", ec);
    require(!ec, ErrorKind::io, "cannot create dataset directories under " + dir.string());

    nlohmann::json meta;
    meta["generator"] = {{"name", "shadowad-synth"},
                         {"version", 1},
                         {"rng", "splitmix64"},
                         {"stream_derivation", "mix13(seed + (index+1)*0x9E3779B97F4A7C15)"}};
    meta["spec"] = {{"count", spec.count},
                    {"size", spec.size},
                    {"k_lo", spec.k_lo},
                    {"k_hi", spec.k_hi},
                    {"penumbra_sigma", spec.penumbra_sigma},
                    {"texture", to_string(spec.texture)},
                    {"seed", spec.seed}};
    meta["samples"] = nlohmann::json::array();

    for (std::size_t i = 0; i < samples.size(); ++i) {
        char name[16];
        std::snprintf(name, sizeof name, "%04zu.png", i);
        save_image_png(samples[i].image, dir / "images" / name);
        save_mask_png(samples[i].mask, dir / "masks" / name);

        nlohmann::json entry;
        entry["index"] = i;
        entry["seed"] = derive_seed(spec.seed, i);
        if (samples[i].provenance) {
            const Provenance& p = *samples[i].provenance;
            entry["k_core"] = p.k_core;
            entry["environment"] = p.lights.environment;
            entry["direct"] = p.lights.direct;
        }
        meta["samples"].push_back(std::move(entry));
    }

    std::ofstream out(dir / "manifest.json");
    require(out.good(), ErrorKind::io, "cannot write manifest under " + dir.string());
    out << meta.dump(2) << "\n";
    require(out.good(), ErrorKind::io, "manifest write failed under " + dir.string());
}

std::vector<Sample> load_directory_dataset(const std::filesystem::path& image_dir,
                                           const std::filesystem::path& mask_dir) {
    namespace fs = std::filesystem;
    auto collect = [](const fs::path& dir) {
        require(fs::is_directory(dir), ErrorKind::io, "not a directory: " + dir.string());
        std::map<std::string, fs::path> stems;
        for (const auto& entry : fs::directory_iterator(dir))
            if (entry.is_regular_file() && entry.path().extension() == ".png")
                stems.emplace(entry.path().stem().string(), entry.path());
        return stems;
    };
    const auto images = collect(image_dir);
    const auto masks = collect(mask_dir);

    // Collect every layout problem before aborting.
    std::string problems;
    for (const auto& [stem, path] : images)
        if (!masks.count(stem)) problems += "image without mask: " + stem + "\n";
    for (const auto& [stem, path] : masks)
        if (!images.count(stem)) problems += "mask without image: " + stem + "\n";
    require(problems.empty(), ErrorKind::io, "dataset layout errors:\n" + problems);

    std::vector<Sample> samples;
    samples.reserve(images.size());
    for (const auto& [stem, path] : images) {
        Sample s;
        s.image = load_image_png(path);
        s.mask = load_mask_png(masks.at(stem));
        if (s.mask.height != s.image.height || s.mask.width != s.image.width)
            problems += "dimension mismatch: " + stem + "\n";
        samples.push_back(std::move(s));
    }
    require(problems.empty(), ErrorKind::io, "dataset layout errors:\n" + problems);
    require(!samples.empty(), ErrorKind::io,
            "no samples found in " + image_dir.string());
    return samples;
}

}  // namespace shadowad::synth
