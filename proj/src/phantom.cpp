#include "fibcap/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fibcap {
namespace {

constexpr double kCapIntensity = 0.85;
constexpr double kLipidIntensity = 0.12;
constexpr double kTissueIntensity = 0.5;
constexpr double kCalIntensity = 0.1;
constexpr double kBorderIntensity = 0.9;
constexpr double kAttenuationPx = 220.0;  // 1/e depth of the tissue signal
// coefficient of variation of a Rayleigh variable, sqrt(4/pi - 1)
const double kRayleighCv = std::sqrt(4.0 / M_PI - 1.0);

uint64_t mix(uint64_t a, uint64_t b) {
  uint64_t h = a * 0x9e3779b97f4a7c15ULL + b + 0x2545f4914f6cdd1dULL;
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ULL;
  h ^= h >> 27;
  return h ^ (h >> 31);
}

// Does the wrapped arc [start_deg, start_deg + arc_deg) cover theta?
bool arc_contains(double theta_deg, double start_deg, double arc_deg) {
  double d = std::fmod(theta_deg - start_deg, 360.0);
  if (d < 0) d += 360.0;
  return d < arc_deg;
}

// Fractional position in [0,1) inside the arc.
double arc_pos(double theta_deg, double start_deg, double arc_deg) {
  double d = std::fmod(theta_deg - start_deg, 360.0);
  if (d < 0) d += 360.0;
  return d / arc_deg;
}

}  // namespace

double rayleigh_sample(double sigma, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(
      std::numeric_limits<double>::min(), 1.0);
  return sigma * std::sqrt(-2.0 * std::log(uni(rng)));
}

void PhantomSpec::validate() const {
  if (n_frames < 1 || n_r < 8 || n_theta < 8)
    throw std::invalid_argument("PhantomSpec: bad dimensions");
  geometry.validate();
  if (geometry.theta_count != n_theta)
    throw std::invalid_argument("PhantomSpec: geometry theta_count mismatch");
  for (const auto& l : fc_lesions) {
    if (l.arc_deg <= 0 || l.arc_deg > 360 || l.cap_thickness_um <= 0 ||
        l.lipid_depth_px <= 0 || l.frame_end < l.frame_start ||
        l.frame_end >= n_frames)
      throw std::invalid_argument("PhantomSpec: bad FC lesion");
  }
  for (const auto& l : cal_lesions) {
    if (l.arc_deg <= 0 || l.arc_deg > 360 || l.depth_end_px <= l.depth_start_px ||
        l.frame_end < l.frame_start || l.frame_end >= n_frames)
      throw std::invalid_argument("PhantomSpec: bad calcification lesion");
  }
  if (speckle_snr && *speckle_snr <= 0)
    throw std::invalid_argument("PhantomSpec: snr must be positive");
  const double max_amp = [&] {
    double a = 0.0;
    for (const auto& h : lumen_harmonics) a += std::abs(h[1]);
    return a;
  }();
  if (lumen_base_radius_px - max_amp < 2 ||
      lumen_base_radius_px + max_amp +
              std::abs(lumen_frame_drift_px) * n_frames >
          n_r - 4)
    throw std::invalid_argument("PhantomSpec: lumen profile leaves r range");
}

std::pair<Pullback, PhantomTruth> generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  const int nf = spec.n_frames, nr = spec.n_r, nt = spec.n_theta;

  Pullback pb;
  pb.geometry = spec.geometry;
  pb.pullback_id = "phantom-" + std::to_string(spec.seed);
  PhantomTruth truth;

  const double noise_gain =
      spec.speckle_snr ? 1.0 / (kRayleighCv * *spec.speckle_snr) : 0.0;

  for (int f = 0; f < nf; ++f) {
    std::mt19937_64 rng(mix(spec.seed, static_cast<uint64_t>(f)));
    PolarFrame frame;
    frame.frame_index = f;
    frame.data = ImageF(nr, nt, 0.0f);
    Mask fc(nr, nt, MaskClass::FC);
    Mask cal(nr, nt, MaskClass::Calcification);
    LumenBoundary lumen;
    lumen.r_index.assign(nt, 0);
    lumen.valid.assign(nt, true);
    std::vector<std::optional<double>> thick(nt);

    GuidewireShadow shadow;
    if (spec.guidewire) {
      const auto& gw = *spec.guidewire;
      const double centre_deg =
          gw.theta_center_deg + gw.drift_deg_per_frame * f;
      const int centre = static_cast<int>(
          std::lround(centre_deg / 360.0 * nt)) % nt;
      const int c = (centre % nt + nt) % nt;
      shadow.theta_start = ((c - gw.width_alines / 2) % nt + nt) % nt;
      shadow.theta_end = (shadow.theta_start + gw.width_alines - 1) % nt;
    }

    for (int t = 0; t < nt; ++t) {
      const double theta_deg = 360.0 * t / nt;
      double radius = spec.lumen_base_radius_px + spec.lumen_frame_drift_px * f;
      for (const auto& h : spec.lumen_harmonics)
        radius += h[1] * std::cos(h[0] * 2.0 * M_PI * t / nt + h[2]);
      const int L = std::max(1, static_cast<int>(std::lround(radius)));
      lumen.r_index[t] = L;
      lumen.valid[t] = !spec.guidewire || !shadow.contains(t, nt);

      // active lesions at this (frame, theta)
      const FcLesionSpec* fc_lesion = nullptr;
      for (const auto& l : spec.fc_lesions)
        if (f >= l.frame_start && f <= l.frame_end &&
            arc_contains(theta_deg, l.theta_start_deg, l.arc_deg)) {
          fc_lesion = &l;
          break;
        }
      const CalLesionSpec* cal_lesion = nullptr;
      for (const auto& l : spec.cal_lesions)
        if (f >= l.frame_start && f <= l.frame_end &&
            arc_contains(theta_deg, l.theta_start_deg, l.arc_deg)) {
          cal_lesion = &l;
          break;
        }

      int cap_px = 0;
      if (fc_lesion) {
        double cap_um = fc_lesion->cap_thickness_um;
        if (fc_lesion->cap_variation_um != 0.0)
          cap_um += fc_lesion->cap_variation_um *
                    std::sin(M_PI * arc_pos(theta_deg, fc_lesion->theta_start_deg,
                                            fc_lesion->arc_deg));
        cap_px = std::max(1, static_cast<int>(std::lround(
                                 cap_um / spec.geometry.radial_spacing_um)));
        thick[t] = cap_px * spec.geometry.radial_spacing_um;
      }

      for (int r = L; r < nr; ++r) {
        const int depth = r - L;
        double base;
        if (fc_lesion && depth < cap_px)
          base = kCapIntensity;
        else if (fc_lesion && depth < cap_px + fc_lesion->lipid_depth_px)
          base = kLipidIntensity;
        else if (cal_lesion && depth >= cal_lesion->depth_start_px &&
                 depth < cal_lesion->depth_end_px)
          base = (cal_lesion->sharp_border &&
                  (depth < cal_lesion->depth_start_px + 2 ||
                   depth >= cal_lesion->depth_end_px - 2))
                     ? kBorderIntensity
                     : kCalIntensity;
        else
          base = kTissueIntensity;
        double v = base * std::exp(-depth / kAttenuationPx);
        if (noise_gain > 0.0) {
          // unit-mean Rayleigh speckle scaled to the requested SNR
          const double s = rayleigh_sample(1.0, rng) / std::sqrt(M_PI / 2.0);
          v *= 1.0 + (s - 1.0) * noise_gain;
        }
        frame.data.at(r, t) = static_cast<float>(std::clamp(v, 0.0, 1.0));

        if (fc_lesion && depth < cap_px) fc.data.at(r, t) = 1;
        if (cal_lesion && depth >= cal_lesion->depth_start_px &&
            depth < cal_lesion->depth_end_px)
          cal.data.at(r, t) = 1;
      }
    }

    // guidewire wedge: zeroed columns with a bright leading reflection
    if (spec.guidewire) {
      for (int t = 0; t < nt; ++t) {
        if (!shadow.contains(t, nt)) continue;
        for (int r = 0; r < nr; ++r) frame.data.at(r, t) = 0.0f;
        for (int r = 0; r < 3; ++r) frame.data.at(r, t) = kBorderIntensity;
        for (int r = 0; r < nr; ++r) {
          fc.data.at(r, t) = 0;
          cal.data.at(r, t) = 0;
        }
        thick[t] = std::nullopt;
      }
    }

    pb.frames.push_back(std::move(frame));
    truth.fc_masks.push_back(std::move(fc));
    truth.cal_masks.push_back(std::move(cal));
    truth.lumens.push_back(std::move(lumen));
    truth.shadows.push_back(shadow);
    truth.thickness_um.push_back(std::move(thick));
  }
  return {std::move(pb), std::move(truth)};
}

std::map<std::string, PhantomSpec> standard_suites() {
  std::map<std::string, PhantomSpec> suites;

  auto base = [](int frames, uint64_t seed) {
    PhantomSpec s;
    s.n_frames = frames;
    s.n_r = 968;
    s.n_theta = 448;
    s.geometry.theta_count = 448;
    s.seed = seed;
    s.lumen_base_radius_px = 42.0;
    s.lumen_harmonics = {{1.0, 5.0, 0.3}, {2.0, 3.0, 1.1}};
    s.speckle_snr = 8.0;
    return s;
  };

  {
    PhantomSpec s = base(64, 101);
    for (int f = 0; f < 64; ++f) {
      FcLesionSpec l;
      l.frame_start = f;
      l.frame_end = f;
      l.theta_start_deg = std::fmod(17.0 * f, 300.0);
      l.arc_deg = 140.0 + 10.0 * (f % 9);
      l.cap_thickness_um = 80.0 + 10.0 * (f % 12);
      l.cap_variation_um = 20.0;
      l.lipid_depth_px = 50 + 2 * (f % 10);
      s.fc_lesions.push_back(l);
    }
    // harder speckle on the training suites so feature learning is the
    // bottleneck (the regime where pretrained initialization pays off)
    s.speckle_snr = 3.0;
    suites["fc-train-64"] = s;
  }
  {
    PhantomSpec s = base(16, 202);
    for (int f = 0; f < 16; ++f) {
      FcLesionSpec l;
      l.frame_start = f;
      l.frame_end = f;
      l.theta_start_deg = std::fmod(31.0 * f + 9.0, 300.0);
      l.arc_deg = 150.0 + 12.0 * (f % 7);
      l.cap_thickness_um = 85.0 + 11.0 * (f % 10);
      l.cap_variation_um = 15.0;
      l.lipid_depth_px = 48 + 3 * (f % 8);
      s.fc_lesions.push_back(l);
    }
    s.speckle_snr = 3.0;
    suites["fc-test-16"] = s;
  }
  {
    PhantomSpec s = base(64, 303);
    for (int f = 0; f < 64; ++f) {
      CalLesionSpec l;
      l.frame_start = f;
      l.frame_end = f;
      l.theta_start_deg = std::fmod(23.0 * f + 5.0, 300.0);
      l.arc_deg = 130.0 + 11.0 * (f % 8);
      // superficial calcific sheets: near-surface bands whose geometry
      // mirrors the cap task, which is what makes them useful as a
      // transfer-learning pretext
      l.depth_start_px = 2 + (f % 6);
      l.depth_end_px = l.depth_start_px + 40 + 2 * (f % 10);
      s.cal_lesions.push_back(l);
    }
    s.speckle_snr = 3.0;
    suites["cal-pretrain-64"] = s;
  }
  {
    PhantomSpec s = base(6, 404);
    s.guidewire->theta_center_deg = 358.0;  // shadow wraps through theta = 0
    FcLesionSpec boundary_cap;  // exactly 13 px at 5 um => 65 um, not TCFA
    boundary_cap.frame_start = 0;
    boundary_cap.frame_end = 5;
    boundary_cap.theta_start_deg = 60.0;
    boundary_cap.arc_deg = 120.0;
    boundary_cap.cap_thickness_um = 65.0;
    boundary_cap.lipid_depth_px = 55;
    s.fc_lesions.push_back(boundary_cap);
    FcLesionSpec second;
    second.frame_start = 2;
    second.frame_end = 4;
    second.theta_start_deg = 220.0;
    second.arc_deg = 70.0;
    second.cap_thickness_um = 120.0;
    second.lipid_depth_px = 45;
    s.fc_lesions.push_back(second);
    CalLesionSpec deep;
    deep.frame_start = 1;
    deep.frame_end = 3;
    deep.theta_start_deg = 300.0;
    deep.arc_deg = 50.0;
    deep.depth_start_px = 30;
    deep.depth_end_px = 80;
    s.cal_lesions.push_back(deep);
    suites["edge-cases"] = s;
  }
  return suites;
}

}  // namespace fibcap
