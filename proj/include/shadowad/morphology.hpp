#pragma once

#include "shadowad/image.hpp"

namespace shadowad {

// Square structuring element of side 2*radius + 1. Out-of-image neighbours
// count as false for both operations, so erosion always clears a border of
// width radius and dilation never invents pixels outside the frame.
BinaryMask dilate(const BinaryMask& mask, int radius);
BinaryMask erode(const BinaryMask& mask, int radius);

struct BoundaryBands {
    BinaryMask inside;   // mask minus its erosion: shadow pixels near the edge
    BinaryMask outside;  // dilation minus mask: lit pixels near the edge
};

// Penumbra-straddling bands used by the shadow-strength ratio. Errors if the
// mask geometry makes either band empty (shadow too small or frame-filling).
BoundaryBands boundary_bands(const BinaryMask& mask, int radius);

// Band width that scales with resolution: 5px at 256, never below 1.
int default_band_radius(int height, int width);

// Exact Euclidean distance from every pixel to the mask boundary, where the
// boundary is the set of true pixels with at least one false 4-neighbour
// inside the frame. Errors when the mask is uniform (no boundary exists).
DistanceMap distance_to_boundary(const BinaryMask& mask);

}  // namespace shadowad
