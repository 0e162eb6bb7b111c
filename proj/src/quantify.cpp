#include "fibcap/quantify.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "fibcap/io.hpp"
#include "json.hpp"

namespace fibcap {

std::vector<std::optional<double>> thickness_per_aline(
    const Mask& mask, const Geometry& geometry) {
  const int nr = mask.rows(), nt = mask.cols();
  std::vector<std::optional<double>> out(nt);
  for (int t = 0; t < nt; ++t) {
    int luminal = -1;
    for (int r = 0; r < nr; ++r)
      if (mask.data.at(r, t)) {
        luminal = r;
        break;
      }
    if (luminal < 0) continue;
    int deep = luminal;
    while (deep + 1 < nr && mask.data.at(deep + 1, t)) ++deep;
    out[t] = (deep - luminal + 1) * geometry.radial_spacing_um;
  }
  return out;
}

double arc_angle(const Mask& mask) {
  const int nr = mask.rows(), nt = mask.cols();
  int occupied = 0;
  for (int t = 0; t < nt; ++t)
    for (int r = 0; r < nr; ++r)
      if (mask.data.at(r, t)) {
        ++occupied;
        break;
      }
  return 360.0 * occupied / nt;
}

double fc_area_mm2(const Mask& mask, const LumenBoundary& lumen,
                   const Geometry& geometry) {
  if (lumen.n_theta() != mask.cols())
    throw std::invalid_argument("fc_area: lumen/mask mismatch");
  const int nr = mask.rows(), nt = mask.cols();
  const double dr_mm = geometry.radial_spacing_um * 1e-3;
  const double dtheta = 2.0 * M_PI / nt;
  double area = 0.0;
  for (int t = 0; t < nt; ++t)
    for (int r = 0; r < nr; ++r)
      if (mask.data.at(r, t)) {
        const double rho_mm = geometry.catheter_offset_um * 1e-3 +
                              (lumen.r_index[t] + r) * dr_mm;
        area += rho_mm * dr_mm * dtheta;
      }
  return area;
}

double surface_area_mm2(const std::vector<Mask>& masks,
                        const std::vector<LumenBoundary>& lumens,
                        const Geometry& geometry) {
  if (masks.empty() || masks.size() != lumens.size())
    throw std::invalid_argument("surface_area: need aligned masks and lumens");
  double area = 0.0;
  for (size_t f = 0; f < masks.size(); ++f) {
    const int nr = masks[f].rows(), nt = masks[f].cols();
    const double dtheta = 2.0 * M_PI / nt;
    for (int t = 0; t < nt; ++t) {
      bool occupied = false;
      for (int r = 0; r < nr; ++r)
        if (masks[f].data.at(r, t)) {
          occupied = true;
          break;
        }
      if (!occupied) continue;
      const double rho_mm =
          geometry.catheter_offset_um * 1e-3 +
          lumens[f].r_index[t] * geometry.radial_spacing_um * 1e-3;
      area += rho_mm * dtheta * geometry.frame_spacing_mm;
    }
  }
  return area;
}

FcQuantification quantify_pullback(const std::vector<Mask>& masks,
                                   const std::vector<LumenBoundary>& lumens,
                                   const Geometry& geometry,
                                   const QuantConfig& cfg) {
  if (masks.empty() || masks.size() != lumens.size())
    throw std::invalid_argument("quantify_pullback: need aligned masks and lumens");
  FcQuantification q;
  double sum_thick = 0.0, sum_arc = 0.0, sum_area = 0.0;
  size_t n_thick = 0;
  for (size_t f = 0; f < masks.size(); ++f) {
    FrameQuant fq;
    fq.thickness_per_aline_um = thickness_per_aline(masks[f], geometry);
    fq.fc_arc_deg = arc_angle(masks[f]);
    fq.fc_area_mm2 = fc_area_mm2(masks[f], lumens[f], geometry);
    double frame_sum = 0.0;
    size_t frame_n = 0;
    for (const auto& th : fq.thickness_per_aline_um) {
      if (!th) continue;
      frame_sum += *th;
      ++frame_n;
      sum_thick += *th;
      ++n_thick;
      if (!fq.min_cap_thickness_um || *th < *fq.min_cap_thickness_um)
        fq.min_cap_thickness_um = *th;
      if (!q.min_cap_thickness_um || *th < *q.min_cap_thickness_um)
        q.min_cap_thickness_um = *th;
    }
    if (frame_n > 0) fq.mean_cap_thickness_um = frame_sum / frame_n;
    sum_arc += fq.fc_arc_deg;
    sum_area += fq.fc_area_mm2;
    q.frames.push_back(std::move(fq));
  }
  q.mean_thickness_um = n_thick > 0 ? sum_thick / n_thick : 0.0;
  q.mean_arc_deg = sum_arc / masks.size();
  q.mean_area_mm2 = sum_area / masks.size();
  q.fc_surface_area_mm2 = surface_area_mm2(masks, lumens, geometry);
  q.tcfa = q.min_cap_thickness_um && *q.min_cap_thickness_um < cfg.tcfa_threshold_um;
  return q;
}

void export_heatmap(const FcQuantification& quant,
                    const std::vector<LumenBoundary>& lumens,
                    const Geometry& geometry,
                    const std::filesystem::path& out_dir) {
  if (quant.frames.empty()) throw std::runtime_error("nothing to export");
  std::filesystem::create_directories(out_dir);
  const int n_frames = static_cast<int>(quant.frames.size());
  const int nt = static_cast<int>(quant.frames.front().thickness_per_aline_um.size());

  // theta rows, frame columns; value = thickness in hundredths of um
  Image2D<uint16_t> map(nt, n_frames, 0);
  for (int f = 0; f < n_frames; ++f)
    for (int t = 0; t < nt; ++t) {
      const auto& th = quant.frames[f].thickness_per_aline_um[t];
      if (!th) continue;
      map.at(t, f) = static_cast<uint16_t>(
          std::min(65535.0, std::round(*th * 100.0)));
    }
  save_pgm16(map, out_dir / "thickness_map.pgm");

  // Lumen surface mesh; per-vertex thickness (um) as comment lines.
  {
    std::ofstream obj(out_dir / "lumen_mesh.obj");
    if (!obj) throw std::runtime_error("unwritable path " + out_dir.string());
    obj << "# lumen surface with per-vertex fibrous-cap thickness (um)\n";
    for (int f = 0; f < n_frames; ++f) {
      const double z = f * geometry.frame_spacing_mm;
      for (int t = 0; t < nt; ++t) {
        const double rho_mm =
            geometry.catheter_offset_um * 1e-3 +
            lumens[f].r_index[t] * geometry.radial_spacing_um * 1e-3;
        const double phi = 2.0 * M_PI * t / nt;
        const auto& th = quant.frames[f].thickness_per_aline_um[t];
        obj << "# thickness " << (th ? *th : 0.0) << "\n";
        obj << "v " << rho_mm * std::cos(phi) << " " << rho_mm * std::sin(phi)
            << " " << z << "\n";
      }
    }
    for (int f = 0; f + 1 < n_frames; ++f)
      for (int t = 0; t < nt; ++t) {
        const int a = f * nt + t + 1;  // OBJ indices are 1-based
        const int b = f * nt + (t + 1) % nt + 1;
        const int c = (f + 1) * nt + t + 1;
        const int d = (f + 1) * nt + (t + 1) % nt + 1;
        obj << "f " << a << " " << b << " " << d << "\n";
        obj << "f " << a << " " << d << " " << c << "\n";
      }
  }

  double max_angle = 0.0;
  for (const auto& fq : quant.frames)
    max_angle = std::max(max_angle, fq.fc_arc_deg);
  nlohmann::json summary{
      {"length_mm", n_frames * geometry.frame_spacing_mm},
      {"max_angle_deg", max_angle},
      {"surface_area_mm2", quant.fc_surface_area_mm2},
      {"min_cap_um",
       quant.min_cap_thickness_um ? nlohmann::json(*quant.min_cap_thickness_um)
                                  : nlohmann::json(nullptr)},
      {"tcfa", quant.tcfa}};
  std::ofstream js(out_dir / "summary.json");
  if (!js) throw std::runtime_error("unwritable path " + out_dir.string());
  js << summary.dump(2) << "\n";
}

}  // namespace fibcap
