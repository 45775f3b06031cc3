#include <doctest.h>

#include <cmath>

#include "shadowad/common.hpp"
#include "shadowad/morphology.hpp"
#include "shadowad/rng.hpp"

using namespace shadowad;

namespace {

BinaryMask random_mask(int h, int w, double density, std::uint64_t seed) {
    SplitMix64 rng(seed);
    BinaryMask m = BinaryMask::zeros(h, w);
    for (auto& v : m.data) v = rng.next_double() < density ? 1 : 0;
    return m;
}

BinaryMask invert(const BinaryMask& m) {
    BinaryMask out = m;
    for (auto& v : out.data) v = v ? 0 : 1;
    return out;
}

}  // namespace

TEST_CASE("band sizes for the 4x4 block in an 8x8 frame") {
    BinaryMask m = BinaryMask::zeros(8, 8);
    for (int y = 2; y <= 5; ++y)
        for (int x = 2; x <= 5; ++x) m.set(y, x, true);
    // radius 1: erosion keeps the 2x2 core, dilation grows to 6x6.
    BoundaryBands bands = boundary_bands(m, 1);
    CHECK(bands.inside.count_true() == 12);
    CHECK(bands.outside.count_true() == 20);
    for (std::size_t i = 0; i < m.data.size(); ++i)
        CHECK_FALSE((bands.inside.data[i] && bands.outside.data[i]));
}

TEST_CASE("dilation and erosion are dual away from the frame border") {
    // Both ops treat out-of-image as false, so duality only holds where the
    // structuring element stays inside the frame; test on a padded canvas.
    for (int radius : {1, 2, 3}) {
        int pad = 2 * radius + 1;
        BinaryMask inner = random_mask(16, 16, 0.4, 77 + radius);
        BinaryMask canvas = BinaryMask::zeros(16 + 2 * pad, 16 + 2 * pad);
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) canvas.set(y + pad, x + pad, inner.at(y, x));
        BinaryMask a = dilate(canvas, radius);
        BinaryMask b = invert(erode(invert(canvas), radius));
        for (int y = pad; y < canvas.height - pad; ++y)
            for (int x = pad; x < canvas.width - pad; ++x) CHECK(a.at(y, x) == b.at(y, x));
    }
}

TEST_CASE("erosion clears a border of width radius") {
    BinaryMask full = BinaryMask::zeros(12, 12);
    for (auto& v : full.data) v = 1;
    for (int radius : {1, 2, 4}) {
        BinaryMask e = erode(full, radius);
        for (int y = 0; y < 12; ++y)
            for (int x = 0; x < 12; ++x) {
                bool interior = y >= radius && y < 12 - radius && x >= radius && x < 12 - radius;
                CHECK(e.at(y, x) == interior);
            }
    }
}

TEST_CASE("dilation never marks pixels outside the frame reachable set") {
    BinaryMask empty = BinaryMask::zeros(10, 10);
    CHECK(dilate(empty, 2).count_true() == 0);
    BinaryMask corner = BinaryMask::zeros(10, 10);
    corner.set(0, 0, true);
    BinaryMask d = dilate(corner, 1);
    CHECK(d.count_true() == 4);  // 2x2 corner block; nothing wraps
}

TEST_CASE("degenerate bands raise validation errors") {
    BinaryMask full = BinaryMask::zeros(8, 8);
    for (auto& v : full.data) v = 1;
    CHECK_THROWS_AS(boundary_bands(full, 1), Error);  // outside band empty
    BinaryMask empty = BinaryMask::zeros(8, 8);
    CHECK_THROWS_AS(boundary_bands(empty, 1), Error);
    BinaryMask one = BinaryMask::zeros(8, 8);
    one.set(4, 4, true);
    BoundaryBands bands = boundary_bands(one, 1);  // single pixel still has both bands
    CHECK(bands.inside.count_true() == 1);
    CHECK(bands.outside.count_true() == 8);
}

TEST_CASE("default band radius tracks resolution") {
    CHECK(default_band_radius(256, 256) == 5);
    CHECK(default_band_radius(64, 64) == 1);
    CHECK(default_band_radius(512, 256) == 5);  // min side rules
    CHECK(default_band_radius(16, 16) == 1);    // floor at 1
    CHECK(default_band_radius(1024, 1024) == 20);
}

TEST_CASE("distance to boundary of a single pixel is plain Euclidean distance") {
    BinaryMask m = BinaryMask::zeros(6, 6);
    m.set(1, 1, true);
    DistanceMap d = distance_to_boundary(m);
    CHECK(d.at(1, 1) == 0.0f);
    CHECK(d.at(0, 0) == doctest::Approx(std::sqrt(2.0)));
    CHECK(d.at(1, 4) == 3.0f);
    CHECK(d.at(5, 5) == doctest::Approx(std::sqrt(32.0)));
}

TEST_CASE("distance to boundary is zero exactly on the boundary ring") {
    BinaryMask m = BinaryMask::zeros(9, 9);
    for (int y = 2; y <= 6; ++y)
        for (int x = 2; x <= 6; ++x) m.set(y, x, true);
    DistanceMap d = distance_to_boundary(m);
    // Perimeter pixels of the block are boundary; the block centre sits two
    // pixels from the nearest perimeter pixel.
    CHECK(d.at(2, 4) == 0.0f);
    CHECK(d.at(6, 6) == 0.0f);
    CHECK(d.at(4, 4) == 2.0f);
    CHECK(d.at(0, 0) == doctest::Approx(std::sqrt(8.0)));
    int zero_count = 0;
    for (float v : d.data) zero_count += v == 0.0f;
    CHECK(zero_count == 16);  // 5x5 block minus 3x3 interior
}

TEST_CASE("distance to boundary matches brute force on random masks") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        BinaryMask m = random_mask(12, 12, 0.35, seed);
        if (m.count_true() == 0 || m.count_true() == m.data.size()) continue;
        DistanceMap d = distance_to_boundary(m);
        // Independent re-derivation with the set-based definition.
        for (int y = 0; y < 12; ++y)
            for (int x = 0; x < 12; ++x) {
                double best = 1e18;
                for (int by = 0; by < 12; ++by)
                    for (int bx = 0; bx < 12; ++bx) {
                        if (!m.at(by, bx)) continue;
                        bool edge = (by > 0 && !m.at(by - 1, bx)) ||
                                    (by < 11 && !m.at(by + 1, bx)) ||
                                    (bx > 0 && !m.at(by, bx - 1)) || (bx < 11 && !m.at(by, bx + 1));
                        if (!edge) continue;
                        double d2 = double((y - by) * (y - by) + (x - bx) * (x - bx));
                        best = std::min(best, d2);
                    }
                CHECK(d.at(y, x) == static_cast<float>(std::sqrt(best)));
            }
    }
}

TEST_CASE("uniform masks have no boundary") {
    BinaryMask empty = BinaryMask::zeros(8, 8);
    CHECK_THROWS_AS(distance_to_boundary(empty), Error);
    BinaryMask full = BinaryMask::zeros(8, 8);
    for (auto& v : full.data) v = 1;
    CHECK_THROWS_AS(distance_to_boundary(full), Error);
}

TEST_CASE("invalid morphology arguments are validation errors") {
    BinaryMask m = BinaryMask::zeros(8, 8);
    m.set(4, 4, true);
    CHECK_THROWS_AS(dilate(m, 0), Error);
    CHECK_THROWS_AS(erode(m, -1), Error);
    CHECK_THROWS_AS(boundary_bands(m, 0), Error);
}
