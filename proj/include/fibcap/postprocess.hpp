#pragma once

#include "fibcap/image.hpp"

namespace fibcap {

// Pixel = 1 iff probability >= threshold (inclusive).
Mask binarize(const ImageF& prob, double threshold = 0.5);

// Morphological opening (erosion then dilation) with a disk structuring
// element {(dr,dt): dr^2 + dt^2 <= radius^2}. The theta axis (columns)
// wraps; outside the r range counts as background.
Mask open_disk(const Mask& mask, int radius = 3);

// Fill background components not 4-connected (with theta wrap) to the
// first or last r row.
Mask fill_holes(const Mask& mask);

// Opening followed by hole filling.
Mask postprocess_mask(const Mask& mask, int radius = 3);

}  // namespace fibcap
