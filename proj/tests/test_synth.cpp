#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "shadowad/common.hpp"
#include "shadowad/morphology.hpp"
#include "shadowad/png_io.hpp"
#include "shadowad/synth.hpp"
#include "test_util.hpp"

using namespace shadowad;
using namespace shadowad::synth;
using shadowad::testutil::TempDir;

namespace {

DatasetSpec base_spec() {
    DatasetSpec s;
    s.count = 4;
    s.size = 64;
    s.k_lo = 0.2f;
    s.k_hi = 0.5f;
    s.penumbra_sigma = 1.0f;
    s.texture = Texture::smooth_noise;
    s.seed = 42;
    return s;
}

}  // namespace

TEST_CASE("spec validation rejects degenerate recipes") {
    DatasetSpec s = base_spec();
    s.count = 0;
    CHECK_THROWS_AS(s.validate(), Error);
    s = base_spec();
    s.size = 7;
    CHECK_THROWS_AS(s.validate(), Error);
    s = base_spec();
    s.k_lo = 0.6f;
    s.k_hi = 0.4f;
    CHECK_THROWS_AS(s.validate(), Error);
    s = base_spec();
    s.penumbra_sigma = -1.0f;
    CHECK_THROWS_AS(s.validate(), Error);
    CHECK_THROWS_AS(texture_from_string("marble"), Error);
    CHECK(texture_from_string("smooth-noise") == Texture::smooth_noise);
}

TEST_CASE("flat reflectance is a constant inside the albedo bounds") {
    DatasetSpec s = base_spec();
    s.texture = Texture::flat;
    SplitMix64 rng(7);
    Image r = generate_reflectance(s, rng);
    const float v = r.data[0];
    CHECK(v >= 0.15f);
    CHECK(v <= 0.95f);
    for (float d : r.data) CHECK(d == v);

    SplitMix64 again(7), other(8);
    CHECK(generate_reflectance(s, again).data == r.data);
    CHECK(generate_reflectance(s, other).data != r.data);
}

TEST_CASE("checker reflectance alternates with period 8") {
    DatasetSpec s = base_spec();
    s.texture = Texture::checker;
    SplitMix64 rng(3);
    Image r = generate_reflectance(s, rng);
    const float a = r.at(0, 0, 0);
    const float b = r.at(0, 0, 8);
    CHECK(a != b);
    for (int y = 0; y < s.size; ++y)
        for (int x = 0; x < s.size; ++x)
            CHECK(r.at(1, y, x) == (((y / 8 + x / 8) % 2 == 0) ? a : b));

    // Autocorrelation of the mean-removed pattern: anti-phase at lag 8,
    // in-phase at lag 16.
    auto autocorr = [&](int lag) {
        double mean = 0.0;
        for (int y = 0; y < s.size; ++y)
            for (int x = 0; x < s.size; ++x) mean += r.at(0, y, x);
        mean /= double(s.size) * s.size;
        double num = 0.0, den = 0.0;
        for (int y = 0; y < s.size; ++y)
            for (int x = 0; x + lag < s.size; ++x) {
                num += (r.at(0, y, x) - mean) * (r.at(0, y, x + lag) - mean);
                den += (r.at(0, y, x) - mean) * (r.at(0, y, x) - mean);
            }
        return num / den;
    };
    CHECK(autocorr(8) == doctest::Approx(-1.0).epsilon(1e-3));
    CHECK(autocorr(16) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("smooth-noise reflectance stays in bounds and varies slowly") {
    DatasetSpec s = base_spec();
    SplitMix64 rng(11);
    Image r = generate_reflectance(s, rng);
    float lo = 1.0f, hi = 0.0f;
    for (float d : r.data) {
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    }
    CHECK(lo >= 0.15f);
    CHECK(hi <= 0.95f);
    CHECK(hi - lo > 0.05f);  // actually textured
    // Bilinear interpolation bounds the per-pixel slope by range/period.
    for (int y = 0; y < s.size; ++y)
        for (int x = 0; x + 1 < s.size; ++x)
            CHECK(std::fabs(r.at(0, y, x + 1) - r.at(0, y, x)) <= 0.8f / 8.0f + 1e-6f);
}

TEST_CASE("zero-penumbra k-map is two-valued and the mask equals the blob") {
    DatasetSpec s = base_spec();
    s.penumbra_sigma = 0.0f;
    SplitMix64 rng(19);
    KMapResult km = generate_k_map(s, rng);
    std::size_t shadow = 0;
    for (int y = 0; y < s.size; ++y)
        for (int x = 0; x < s.size; ++x) {
            const float k = km.k.at(y, x);
            const bool in = km.mask.at(y, x);
            CHECK((k == km.k_core || k == 1.0f));
            CHECK(in == (k == km.k_core));
            shadow += in;
        }
    const double fraction = double(shadow) / (64.0 * 64.0);
    CHECK(fraction >= 0.05);
    CHECK(fraction <= 0.40);
}

TEST_CASE("blurred k-map is a convex combination and clears the margin") {
    DatasetSpec s = base_spec();
    const int margin = 2 * default_band_radius(s.size, s.size);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        SplitMix64 rng(derive_seed(s.seed, seed));
        KMapResult km = generate_k_map(s, rng);
        std::size_t shadow = 0;
        for (int y = 0; y < s.size; ++y)
            for (int x = 0; x < s.size; ++x) {
                CHECK(km.k.at(y, x) >= km.k_core);
                CHECK(km.k.at(y, x) <= 1.0f);
                if (km.mask.at(y, x)) {
                    ++shadow;
                    const bool in_margin = y < margin || y >= s.size - margin || x < margin ||
                                           x >= s.size - margin;
                    CHECK_FALSE(in_margin);
                }
            }
        const double fraction = double(shadow) / (64.0 * 64.0);
        CHECK(fraction >= 0.05);
        CHECK(fraction <= 0.40);
        // The default-radius boundary bands must exist for every sample.
        CHECK_NOTHROW(boundary_bands(km.mask, default_band_radius(s.size, s.size)));
    }
}

TEST_CASE("samples re-render exactly from their provenance") {
    DatasetSpec s = base_spec();
    std::vector<Sample> samples = generate_dataset(s);
    REQUIRE(samples.size() == 4);
    for (const Sample& sample : samples) {
        REQUIRE(sample.provenance.has_value());
        const Provenance& p = *sample.provenance;
        Image again = render_shadow_image(p.reflectance, p.k, p.lights);
        CHECK(again.data == sample.image.data);
        for (int c = 0; c < 3; ++c) {
            CHECK(p.lights.environment[c] >= 0.1f);
            CHECK(p.lights.environment[c] <= 0.3f);
            CHECK(p.lights.direct[c] >= 0.4f);
            CHECK(p.lights.direct[c] <= 0.7f);
        }
        CHECK(p.k_core >= s.k_lo);
        CHECK(p.k_core <= s.k_hi);
    }
}

TEST_CASE("flat zero-penumbra samples match the shadow-strength oracle") {
    // The criterion the acceptance suite re-checks at 50 samples: rendered
    // shadow strength equals the mean-channel shadow-free ratio within 2%.
    DatasetSpec s = base_spec();
    s.count = 10;
    s.texture = Texture::flat;
    s.penumbra_sigma = 0.0f;
    for (const Sample& sample : generate_dataset(s)) {
        const Provenance& p = *sample.provenance;
        const double measured =
            shadow_strength(sample.image, sample.mask, default_band_radius(s.size, s.size));
        const double predicted = mean_channel_shadow_free_ratio(p.lights, p.k_core);
        CHECK(measured == doctest::Approx(predicted).epsilon(0.02));
    }
}

TEST_CASE("generation is deterministic and index-parallel") {
    DatasetSpec s = base_spec();
    std::vector<Sample> a = generate_dataset(s);
    std::vector<Sample> b = generate_dataset(s);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].image.data == b[i].image.data);
        CHECK(a[i].mask.data == b[i].mask.data);
        // Per-index streams: a sample regenerated alone matches the batch.
        Sample solo = generate_sample(s, static_cast<int>(i));
        CHECK(solo.image.data == a[i].image.data);
    }
    s.seed = 43;
    CHECK(generate_dataset(s)[0].image.data != a[0].image.data);
}

TEST_CASE("written datasets round-trip within quantization tolerance") {
    TempDir dir;
    DatasetSpec s = base_spec();
    std::vector<Sample> samples = generate_dataset(s);
    write_dataset(samples, s, dir.path);

    CHECK(std::filesystem::exists(dir.path / "images" / "0000.png"));
    CHECK(std::filesystem::exists(dir.path / "masks" / "0003.png"));
    CHECK(std::filesystem::exists(dir.path / "manifest.json"));

    std::vector<Sample> loaded = load_directory_dataset(dir.path / "images", dir.path / "masks");
    REQUIRE(loaded.size() == samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        CHECK(loaded[i].mask.data == samples[i].mask.data);
        CHECK_FALSE(loaded[i].provenance.has_value());
        float max_err = 0.0f;
        for (std::size_t j = 0; j < samples[i].image.data.size(); ++j)
            max_err = std::max(max_err,
                               std::fabs(loaded[i].image.data[j] - samples[i].image.data[j]));
        CHECK(max_err <= 1.0f / 255.0f);
    }

    // Same spec, fresh write -> byte-identical files.
    TempDir dir2;
    write_dataset(generate_dataset(s), s, dir2.path);
    for (const char* rel : {"images/0001.png", "masks/0002.png", "manifest.json"}) {
        std::ifstream f1(dir.path / rel, std::ios::binary);
        std::ifstream f2(dir2.path / rel, std::ios::binary);
        std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
        std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
        CHECK(b1 == b2);
        CHECK(!b1.empty());
    }
}

TEST_CASE("directory loading reports layout problems by stem") {
    TempDir dir;
    DatasetSpec s = base_spec();
    s.count = 3;
    write_dataset(generate_dataset(s), s, dir.path);

    std::filesystem::remove(dir.path / "masks" / "0001.png");
    try {
        load_directory_dataset(dir.path / "images", dir.path / "masks");
        FAIL("expected a layout error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::io);
        CHECK(std::string(e.what()).find("image without mask: 0001") != std::string::npos);
    }

    // Restore with wrong dimensions: reported per file by stem.
    BinaryMask wrong = BinaryMask::zeros(32, 32);
    wrong.set(4, 4, true);
    save_mask_png(wrong, dir.path / "masks" / "0001.png");
    try {
        load_directory_dataset(dir.path / "images", dir.path / "masks");
        FAIL("expected a dimension error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("dimension mismatch: 0001") != std::string::npos);
    }
}

TEST_CASE("exhausted blob retries are a validation error") {
    // A size-8 canvas leaves a 4x4 interior inside the border margin, so
    // blob placement exhausts its retries for ~12% of seeds (seed 4 is the
    // first); the generator must fail loudly, not loop.
    DatasetSpec s = base_spec();
    s.size = 8;
    bool failed = false;
    for (std::uint64_t seed = 0; seed < 16 && !failed; ++seed) {
        SplitMix64 rng(seed);
        try {
            generate_k_map(s, rng);
        } catch (const Error& e) {
            failed = e.kind() == ErrorKind::validation;
        }
    }
    CHECK(failed);
}
