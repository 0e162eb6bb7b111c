#pragma once

#include <optional>
#include <vector>

#include "fibcap/pullback.hpp"

namespace fibcap {

// Lumen surface depth per A-line. A-lines inside the guidewire shadow are
// interpolated and flagged invalid.
struct LumenBoundary {
  std::vector<int> r_index;
  std::vector<bool> valid;

  int n_theta() const { return static_cast<int>(r_index.size()); }
};

// Wrapping theta interval [theta_start, theta_end] occluded by the guidewire.
struct GuidewireShadow {
  int theta_start = 0;
  int theta_end = 0;  // inclusive; end < start means the interval wraps
  bool low_confidence = false;

  int width(int n_theta) const {
    return theta_end >= theta_start ? theta_end - theta_start + 1
                                    : n_theta - theta_start + theta_end + 1;
  }
  bool contains(int theta, int n_theta) const {
    const int w = width(n_theta);
    int d = theta - theta_start;
    if (d < 0) d += n_theta;
    return d < w;
  }
};

// Pixel-shifted, cropped, denoised network input (kPreprocRows x n_theta).
struct PreprocFrame {
  ImageF data;
  LumenBoundary lumen;
  GuidewireShadow shadow;
  int source_frame_index = 0;
};

inline constexpr int kPreprocRows = 200;

struct GuidewireParams {
  int width_prior = 30;      // A-lines
  double lambda_scale = 0.5; // width penalty = lambda_scale * mean column sum
  double jump_cost = 1.0;    // inter-frame centre smoothing, per A-line
  double confidence_tau = 0.05;
};

struct LumenParams {
  double smoothness_gamma = 2.0;  // intensity units per px of |dr|
  int max_step = 32;              // largest |dr| between adjacent A-lines
};

GuidewireShadow detect_guidewire(const PolarFrame& frame,
                                 const GuidewireParams& params = {});

// Smooths per-frame shadow centres across a pullback with a second DP.
std::vector<GuidewireShadow> detect_guidewire_pullback(
    const Pullback& pb, const GuidewireParams& params = {});

LumenBoundary segment_lumen(const PolarFrame& frame,
                            const GuidewireShadow& shadow,
                            const LumenParams& params = {});

// Translate each A-line so the lumen surface sits at row 0; zero-pad the
// vacated tail and zero the shadow columns.
PolarFrame pixel_shift(const PolarFrame& frame, const LumenBoundary& lumen,
                       const GuidewireShadow& shadow);

// Apply the same per-A-line shift to a mask so it stays aligned with the
// shifted frame.
Mask shift_mask(const Mask& mask, const LumenBoundary& lumen);

// Keep the first kPreprocRows rows and smooth with the normalized 7x7
// Gaussian (sigma = 1); reflects at r borders, wraps in theta.
PreprocFrame crop_and_filter(const PolarFrame& shifted,
                             const LumenBoundary& lumen,
                             const GuidewireShadow& shadow);

// Filter only (used by tests); same border rules.
ImageF gaussian7x7(const ImageF& img);

// Full single-frame chain: guidewire -> lumen -> shift -> crop/filter.
PreprocFrame preprocess_frame(const PolarFrame& frame,
                              const GuidewireParams& gw = {},
                              const LumenParams& lp = {});

}  // namespace fibcap
