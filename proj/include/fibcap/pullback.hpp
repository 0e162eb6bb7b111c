#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fibcap/image.hpp"

namespace fibcap {

// Physical calibration of a pullback acquisition.
struct Geometry {
  double radial_spacing_um = 5.0;   // micrometres per r pixel
  double frame_spacing_mm = 0.2;    // pullback advance per frame
  int theta_count = 448;            // A-lines per revolution
  double catheter_offset_um = 400;  // physical radius of the first r sample

  void validate() const;
};

// One polar (r, theta) frame; intensities are unit-range floats.
struct PolarFrame {
  ImageF data;  // rows = r, cols = theta
  int frame_index = 0;

  int n_r() const { return data.rows(); }
  int n_theta() const { return data.cols(); }

  void validate() const;
};

struct Pullback {
  std::vector<PolarFrame> frames;
  Geometry geometry;
  std::string pullback_id;

  int n_frames() const { return static_cast<int>(frames.size()); }
  int n_r() const { return frames.empty() ? 0 : frames.front().n_r(); }
  int n_theta() const { return frames.empty() ? 0 : frames.front().n_theta(); }

  void validate() const;
};

// Cartesian rendering of a polar frame: square out_size x out_size image
// centred on the catheter, bilinear sampling, 0 outside the sampled annulus.
ImageF polar_to_cartesian(const PolarFrame& frame, const Geometry& geometry,
                          int out_size);

// log(1 + k*I) rescaled to [0,1] for display; monotone in I.
ImageF log_display(const PolarFrame& frame, double gain = 100.0);

}  // namespace fibcap
