#include "fibcap/pullback.hpp"

#include <cmath>
#include <stdexcept>

namespace fibcap {

void Geometry::validate() const {
  if (radial_spacing_um <= 0 || frame_spacing_mm <= 0 || theta_count <= 0 ||
      catheter_offset_um <= 0)
    throw std::invalid_argument("Geometry: all fields must be positive");
}

void PolarFrame::validate() const {
  if (n_r() <= 0 || n_theta() <= 0)
    throw std::invalid_argument("PolarFrame: empty data");
  for (float v : data.raw())
    if (!std::isfinite(v) || v < 0)
      throw std::invalid_argument("PolarFrame: intensities must be finite and >= 0");
}

void Pullback::validate() const {
  geometry.validate();
  if (frames.empty()) throw std::invalid_argument("Pullback: no frames");
  const int nr = frames.front().n_r(), nt = frames.front().n_theta();
  if (nt != geometry.theta_count)
    throw std::invalid_argument("Pullback: theta_count mismatch with geometry");
  for (size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].n_r() != nr || frames[i].n_theta() != nt)
      throw std::invalid_argument("Pullback: frame dimensions differ");
    if (frames[i].frame_index != static_cast<int>(i))
      throw std::invalid_argument("Pullback: frame_index not sequential");
  }
}

ImageF polar_to_cartesian(const PolarFrame& frame, const Geometry& geometry,
                          int out_size) {
  if (out_size < 2)
    throw std::invalid_argument("polar_to_cartesian: out_size must be >= 2");
  const int nr = frame.n_r(), nt = frame.n_theta();
  const double max_radius_um =
      geometry.catheter_offset_um + (nr - 1) * geometry.radial_spacing_um;
  const double um_per_px = 2.0 * max_radius_um / (out_size - 1);
  const double cx = (out_size - 1) / 2.0;

  ImageF out(out_size, out_size, 0.0f);
  for (int y = 0; y < out_size; ++y) {
    for (int x = 0; x < out_size; ++x) {
      const double dx = (x - cx) * um_per_px;
      const double dy = (y - cx) * um_per_px;
      const double rho = std::sqrt(dx * dx + dy * dy);
      const double r = (rho - geometry.catheter_offset_um) / geometry.radial_spacing_um;
      if (r < 0 || r > nr - 1) continue;
      double phi = std::atan2(dy, dx);
      if (phi < 0) phi += 2.0 * M_PI;
      const double t = phi * nt / (2.0 * M_PI);

      const int r0 = static_cast<int>(std::floor(r));
      const int r1 = std::min(r0 + 1, nr - 1);
      const double fr = r - r0;
      const int t0 = static_cast<int>(std::floor(t)) % nt;
      const int t1 = (t0 + 1) % nt;  // theta wraps
      const double ft = t - std::floor(t);

      const double v =
          (1 - fr) * ((1 - ft) * frame.data.at(r0, t0) + ft * frame.data.at(r0, t1)) +
          fr * ((1 - ft) * frame.data.at(r1, t0) + ft * frame.data.at(r1, t1));
      out.at(y, x) = static_cast<float>(v);
    }
  }
  return out;
}

ImageF log_display(const PolarFrame& frame, double gain) {
  ImageF out(frame.n_r(), frame.n_theta(), 0.0f);
  double vmax = 0.0;
  for (size_t i = 0; i < frame.data.size(); ++i) {
    const double v = std::log1p(gain * frame.data.raw()[i]);
    out.raw()[i] = static_cast<float>(v);
    vmax = std::max(vmax, v);
  }
  if (vmax > 0)
    for (auto& v : out.raw()) v = static_cast<float>(v / vmax);
  return out;
}

}  // namespace fibcap
