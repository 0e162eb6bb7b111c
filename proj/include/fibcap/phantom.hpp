#pragma once

#include <array>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fibcap/preprocess.hpp"
#include "fibcap/pullback.hpp"

namespace fibcap {

// Bright cap over a dark lipid pool spanning a theta arc and frame range.
struct FcLesionSpec {
  int frame_start = 0, frame_end = 0;  // inclusive
  double theta_start_deg = 0.0;
  double arc_deg = 90.0;
  double cap_thickness_um = 100.0;
  double cap_variation_um = 0.0;  // smooth sinusoidal variation across the arc
  int lipid_depth_px = 60;
};

// Dark region with an optional sharp bright border, deeper in the wall.
struct CalLesionSpec {
  int frame_start = 0, frame_end = 0;
  double theta_start_deg = 0.0;
  double arc_deg = 90.0;
  int depth_start_px = 25, depth_end_px = 70;  // relative to lumen surface
  bool sharp_border = true;
};

struct GuidewireSpec {
  double theta_center_deg = 200.0;
  double drift_deg_per_frame = 0.5;
  int width_alines = 30;
};

struct PhantomSpec {
  int n_frames = 5, n_r = 968, n_theta = 448;
  Geometry geometry;
  double lumen_base_radius_px = 40.0;
  // (harmonic order, amplitude px, phase rad)
  std::vector<std::array<double, 3>> lumen_harmonics;
  double lumen_frame_drift_px = 0.0;
  std::vector<FcLesionSpec> fc_lesions;
  std::vector<CalLesionSpec> cal_lesions;
  std::optional<GuidewireSpec> guidewire = GuidewireSpec{};
  std::optional<double> speckle_snr = 8.0;  // nullopt = noise off
  uint64_t seed = 0;

  void validate() const;
};

struct PhantomTruth {
  std::vector<Mask> fc_masks;   // raw (unshifted) coordinates
  std::vector<Mask> cal_masks;
  std::vector<LumenBoundary> lumens;
  std::vector<GuidewireShadow> shadows;
  // analytic cap thickness per frame per A-line
  std::vector<std::vector<std::optional<double>>> thickness_um;
};

std::pair<Pullback, PhantomTruth> generate_phantom(const PhantomSpec& spec);

// Named desk-scale suites: "fc-train-64", "fc-test-16", "cal-pretrain-64",
// "edge-cases".
std::map<std::string, PhantomSpec> standard_suites();

// Unit-mean multiplicative Rayleigh speckle field sampler; exposed for the
// statistics tests.
double rayleigh_sample(double sigma, std::mt19937_64& rng);

}  // namespace fibcap
