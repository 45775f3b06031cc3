#include "shadowad/morphology.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "shadowad/common.hpp"

namespace shadowad {

namespace {

void check_mask(const BinaryMask& mask, int radius) {
    require(mask.height >= 1 && mask.width >= 1, ErrorKind::validation, "morphology: empty mask");
    require(radius >= 1, ErrorKind::validation,
            "morphology: radius must be >= 1, got " + std::to_string(radius));
}

// Separable box morphology. or_mode=true computes dilation (any neighbour
// set), or_mode=false erosion (all neighbours set, out-of-image = false).
BinaryMask box_pass(const BinaryMask& m, int radius, bool horizontal, bool or_mode) {
    BinaryMask out = BinaryMask::zeros(m.height, m.width);
    const int len = horizontal ? m.width : m.height;
    const int lines = horizontal ? m.height : m.width;
#pragma omp parallel for
    for (int line = 0; line < lines; ++line) {
        for (int i = 0; i < len; ++i) {
            bool acc = !or_mode;
            for (int d = -radius; d <= radius; ++d) {
                int j = i + d;
                bool v = (j >= 0 && j < len)
                             ? (horizontal ? m.at(line, j) : m.at(j, line))
                             : false;
                acc = or_mode ? (acc || v) : (acc && v);
            }
            if (horizontal)
                out.set(line, i, acc);
            else
                out.set(i, line, acc);
        }
    }
    return out;
}

}  // namespace

BinaryMask dilate(const BinaryMask& mask, int radius) {
    check_mask(mask, radius);
    return box_pass(box_pass(mask, radius, true, true), radius, false, true);
}

BinaryMask erode(const BinaryMask& mask, int radius) {
    check_mask(mask, radius);
    return box_pass(box_pass(mask, radius, true, false), radius, false, false);
}

BoundaryBands boundary_bands(const BinaryMask& mask, int radius) {
    check_mask(mask, radius);
    require(mask.count_true() >= 1, ErrorKind::validation, "boundary_bands: mask has no shadow");
    BinaryMask grown = dilate(mask, radius);
    BinaryMask shrunk = erode(mask, radius);
    BoundaryBands bands;
    bands.inside = BinaryMask::zeros(mask.height, mask.width);
    bands.outside = BinaryMask::zeros(mask.height, mask.width);
    std::size_t n_in = 0, n_out = 0;
    for (std::size_t i = 0; i < mask.data.size(); ++i) {
        bool m = mask.data[i] != 0;
        bool bi = m && !shrunk.data[i];
        bool bo = grown.data[i] && !m;
        bands.inside.data[i] = bi;
        bands.outside.data[i] = bo;
        n_in += bi;
        n_out += bo;
    }
    require(n_in > 0, ErrorKind::validation, "boundary_bands: degenerate band (inside empty)");
    require(n_out > 0, ErrorKind::validation, "boundary_bands: degenerate band (outside empty)");
    return bands;
}

int default_band_radius(int height, int width) {
    int side = std::min(height, width);
    return std::max(1, static_cast<int>(std::lround(5.0 * side / 256.0)));
}

DistanceMap distance_to_boundary(const BinaryMask& mask) {
    require(mask.height >= 1 && mask.width >= 1, ErrorKind::validation,
            "distance_to_boundary: empty mask");
    const int h = mask.height, w = mask.width;
    std::vector<std::int32_t> by, bx;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask.at(y, x)) continue;
            bool edge = (y > 0 && !mask.at(y - 1, x)) || (y + 1 < h && !mask.at(y + 1, x)) ||
                        (x > 0 && !mask.at(y, x - 1)) || (x + 1 < w && !mask.at(y, x + 1));
            if (edge) {
                by.push_back(y);
                bx.push_back(x);
            }
        }
    }
    require(!by.empty(), ErrorKind::validation,
            "distance_to_boundary: uniform mask has no boundary");
    DistanceMap out;
    out.height = h;
    out.width = w;
    out.data.resize(static_cast<std::size_t>(h) * w);
    const std::size_t nb = by.size();
#pragma omp parallel for
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            std::int64_t best = INT64_MAX;
            for (std::size_t k = 0; k < nb; ++k) {
                std::int64_t dy = y - by[k];
                std::int64_t dx = x - bx[k];
                std::int64_t d2 = dy * dy + dx * dx;
                if (d2 < best) best = d2;
            }
            out.data[static_cast<std::size_t>(y) * w + x] =
                static_cast<float>(std::sqrt(static_cast<double>(best)));
        }
    }
    return out;
}

}  // namespace shadowad
