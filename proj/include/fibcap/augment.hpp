#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "fibcap/image.hpp"
#include "fibcap/pullback.hpp"

namespace fibcap {

struct AugmentConfig {
  std::vector<int> offsets{0, 80, 160, 240, 320, 400};
  double flip_prob = 0.1;
  double scale_prob = 0.2;
  double scale_factor = 0.1;
  double shift_prob = 0.2;
  double shift_factor = 0.1;
  uint64_t rng_seed = 0;

  void validate(int n_theta) const;
};

// Treat the whole pullback as one continuous spiral of N * n_theta A-lines
// and re-cut frames starting at `offset`. The trailing partial frame is
// dropped, so offset > 0 yields N-1 frames; offset 0 is the identity.
std::pair<Pullback, std::vector<Mask>> spiral_offsets(
    const Pullback& pb, const std::vector<Mask>& masks, int offset);

// Stochastic per-example transform: theta flip (frame and mask together),
// then intensity scale by u ~ U[1-f, 1+f], then shift by v ~ U[-f, +f],
// clamped to [0,1]. The mask is never altered by the intensity ops.
void stochastic_augment(ImageF& frame, Mask& mask, const AugmentConfig& cfg,
                        std::mt19937_64& rng);

}  // namespace fibcap
