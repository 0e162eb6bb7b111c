#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "fibcap/preprocess.hpp"
#include "fibcap/pullback.hpp"

namespace fibcap {

struct QuantConfig {
  double tcfa_threshold_um = 65.0;
};

struct FrameQuant {
  std::vector<std::optional<double>> thickness_per_aline_um;
  double fc_arc_deg = 0.0;
  double fc_area_mm2 = 0.0;
  std::optional<double> min_cap_thickness_um;
  std::optional<double> mean_cap_thickness_um;
};

struct FcQuantification {
  std::vector<FrameQuant> frames;
  double mean_thickness_um = 0.0;
  double mean_arc_deg = 0.0;
  double mean_area_mm2 = 0.0;
  double fc_surface_area_mm2 = 0.0;
  std::optional<double> min_cap_thickness_um;
  bool tcfa = false;
};

// Cap thickness per A-line from the contiguous FC run starting at the
// luminal side. Mask must be in pixel-shifted coordinates (lumen at row 0).
std::vector<std::optional<double>> thickness_per_aline(
    const Mask& mask, const Geometry& geometry);

// Angle subtended by A-lines containing at least one FC pixel.
double arc_angle(const Mask& mask);

// FC area via the exact polar element rho * dr * dtheta, with
// rho = catheter_offset + (lumen r + shifted r) * dr.
double fc_area_mm2(const Mask& mask, const LumenBoundary& lumen,
                   const Geometry& geometry);

// Luminal FC arc length per frame times the frame spacing, summed.
double surface_area_mm2(const std::vector<Mask>& masks,
                        const std::vector<LumenBoundary>& lumens,
                        const Geometry& geometry);

FcQuantification quantify_pullback(const std::vector<Mask>& masks,
                                   const std::vector<LumenBoundary>& lumens,
                                   const Geometry& geometry,
                                   const QuantConfig& cfg = {});

// Writes a theta-by-frame thickness map (16-bit PGM, hundredths of a
// micrometre, clipped at 655.35 um), an OBJ lumen mesh with per-vertex
// thickness comments, and a JSON summary.
void export_heatmap(const FcQuantification& quant,
                    const std::vector<LumenBoundary>& lumens,
                    const Geometry& geometry,
                    const std::filesystem::path& out_dir);

}  // namespace fibcap
