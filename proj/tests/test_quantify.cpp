#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "fibcap/io.hpp"
#include "fibcap/quantify.hpp"

using namespace fibcap;
namespace fs = std::filesystem;

namespace {

LumenBoundary flat_lumen(int nt, int r) {
  LumenBoundary lb;
  lb.r_index.assign(nt, r);
  lb.valid.assign(nt, true);
  return lb;
}

// Fill shifted-coordinate rows [r0, r1) for theta columns [t0, t1).
Mask band_mask(int nr, int nt, int r0, int r1, int t0, int t1) {
  Mask m(nr, nt);
  for (int t = t0; t < t1; ++t)
    for (int r = r0; r < r1; ++r) m.data.at(r, t) = 1;
  return m;
}

}  // namespace

TEST_CASE("a 13-pixel luminal run at 5 um spacing reads 65 um") {
  Geometry geo;
  Mask m = band_mask(50, 8, 0, 13, 2, 5);
  const auto th = thickness_per_aline(m, geo);
  REQUIRE((int)th.size() == 8);
  for (int t = 2; t < 5; ++t) {
    REQUIRE(th[t].has_value());
    CHECK(*th[t] == doctest::Approx(65.0));
  }
  CHECK(!th[0].has_value());
  CHECK(!th[7].has_value());
}

TEST_CASE("thickness counts only the contiguous run from the luminal side") {
  Geometry geo;
  Mask m(20, 1);
  // run of 3 starting at row 2, detached blob deeper down
  for (int r = 2; r < 5; ++r) m.data.at(r, 0) = 1;
  m.data.at(10, 0) = 1;
  const auto th = thickness_per_aline(m, geo);
  CHECK(*th[0] == doctest::Approx(15.0));
}

TEST_CASE("arc angle is the occupied A-line fraction of 360 degrees") {
  Mask m = band_mask(10, 360, 1, 4, 100, 190);
  CHECK(arc_angle(m) == doctest::Approx(90.0));
  Mask empty(10, 360);
  CHECK(arc_angle(empty) == 0.0);
  Mask full = band_mask(10, 448, 0, 1, 0, 448);
  CHECK(arc_angle(full) == doctest::Approx(360.0));
}

TEST_CASE("polar area of a full annulus matches pi (rho2^2 - rho1^2)") {
  Geometry geo;
  geo.radial_spacing_um = 5.0;
  geo.catheter_offset_um = 400.0;
  const int nt = 448, lumen_r = 60;
  // annulus occupying shifted rows [0, 40) on every A-line
  Mask m = band_mask(80, nt, 0, 40, 0, nt);
  const double got = fc_area_mm2(m, flat_lumen(nt, lumen_r), geo);
  // midpoint-rule radii: rho = offset + (lumen_r + r) * dr summed over cells.
  // The closed form uses the band edges offset by half a pixel either side.
  const double dr = 5e-3;
  const double rho1 = 0.4 + (lumen_r - 0.5) * dr;
  const double rho2 = 0.4 + (lumen_r + 39.5) * dr;
  const double exact = M_PI * (rho2 * rho2 - rho1 * rho1);
  CHECK(std::abs(got - exact) / exact < 0.005);
}

TEST_CASE("area scales with the square of the radial spacing") {
  Geometry g1, g2;
  g1.radial_spacing_um = 5.0;
  g2.radial_spacing_um = 10.0;
  g1.catheter_offset_um = g2.catheter_offset_um = 0.0;
  const int nt = 64;
  Mask m = band_mask(30, nt, 0, 20, 0, nt);
  const auto lumen = flat_lumen(nt, 50);
  const double a1 = fc_area_mm2(m, lumen, g1);
  const double a2 = fc_area_mm2(m, lumen, g2);
  CHECK(a2 / a1 == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("area is additive over disjoint masks") {
  Geometry geo;
  const int nt = 64;
  const auto lumen = flat_lumen(nt, 40);
  Mask a = band_mask(30, nt, 0, 5, 0, 20);
  Mask b = band_mask(30, nt, 10, 15, 30, 50);
  Mask both(30, nt);
  for (size_t i = 0; i < both.data.size(); ++i)
    both.data.raw()[i] = a.data.raw()[i] | b.data.raw()[i];
  CHECK(fc_area_mm2(both, lumen, geo) ==
        doctest::Approx(fc_area_mm2(a, lumen, geo) +
                        fc_area_mm2(b, lumen, geo)).epsilon(1e-12));
}

TEST_CASE("surface area of a fully covered cylinder matches 2 pi rho L") {
  Geometry geo;
  geo.frame_spacing_mm = 0.2;
  geo.radial_spacing_um = 5.0;
  geo.catheter_offset_um = 400.0;
  const int nt = 448, lumen_r = 220;  // rho = 0.4 + 220*0.005 = 1.5 mm
  std::vector<Mask> masks;
  std::vector<LumenBoundary> lumens;
  for (int f = 0; f < 10; ++f) {
    masks.push_back(band_mask(20, nt, 0, 3, 0, nt));
    lumens.push_back(flat_lumen(nt, lumen_r));
  }
  const double got = surface_area_mm2(masks, lumens, geo);
  const double exact = 2.0 * M_PI * 1.5 * 10 * 0.2;
  CHECK(got == doctest::Approx(exact).epsilon(1e-9));
}

TEST_CASE("tcfa is strictly below the threshold: 65.0 um is not TCFA") {
  Geometry geo;
  std::vector<Mask> masks = {band_mask(50, 16, 0, 13, 4, 10)};  // 65 um
  std::vector<LumenBoundary> lumens = {flat_lumen(16, 30)};
  auto q = quantify_pullback(masks, lumens, geo);
  REQUIRE(q.min_cap_thickness_um.has_value());
  CHECK(*q.min_cap_thickness_um == doctest::Approx(65.0));
  CHECK(!q.tcfa);

  std::vector<Mask> thin = {band_mask(50, 16, 0, 12, 4, 10)};  // 60 um
  auto q2 = quantify_pullback(thin, lumens, geo);
  CHECK(q2.tcfa);
}

TEST_CASE("quantification summary fields are consistent across frames") {
  Geometry geo;
  std::vector<Mask> masks = {band_mask(40, 32, 0, 10, 0, 16),
                             band_mask(40, 32, 0, 20, 8, 16)};
  std::vector<LumenBoundary> lumens = {flat_lumen(32, 25), flat_lumen(32, 25)};
  auto q = quantify_pullback(masks, lumens, geo);
  REQUIRE(q.frames.size() == 2);
  CHECK(q.frames[0].fc_arc_deg == doctest::Approx(180.0));
  CHECK(q.frames[1].fc_arc_deg == doctest::Approx(90.0));
  CHECK(q.mean_arc_deg == doctest::Approx(135.0));
  CHECK(*q.frames[0].mean_cap_thickness_um == doctest::Approx(50.0));
  CHECK(*q.frames[1].mean_cap_thickness_um == doctest::Approx(100.0));
  // 16 A-lines at 50 um + 8 at 100 um
  CHECK(q.mean_thickness_um ==
        doctest::Approx((16 * 50.0 + 8 * 100.0) / 24.0));
  CHECK(*q.min_cap_thickness_um == doctest::Approx(50.0));
  CHECK(q.tcfa);
}

TEST_CASE("mean thickness is invariant under a theta rotation") {
  Geometry geo;
  std::mt19937_64 rng(33);
  std::bernoulli_distribution b(0.2);
  Mask m(30, 48);
  for (int t = 0; t < 48; ++t)
    if (b(rng)) {
      const int len = 1 + (int)(rng() % 8);
      for (int r = 0; r < len; ++r) m.data.at(r, t) = 1;
    }
  Mask rot(30, 48);
  const int shift = 17;
  for (int t = 0; t < 48; ++t)
    for (int r = 0; r < 30; ++r)
      rot.data.at(r, (t + shift) % 48) = m.data.at(r, t);
  const auto lumen = flat_lumen(48, 20);
  auto q1 = quantify_pullback({m}, {lumen}, geo);
  auto q2 = quantify_pullback({rot}, {lumen}, geo);
  CHECK(q1.mean_thickness_um == doctest::Approx(q2.mean_thickness_um));
  CHECK(q1.frames[0].fc_arc_deg == doctest::Approx(q2.frames[0].fc_arc_deg));
  CHECK(q1.frames[0].fc_area_mm2 == doctest::Approx(q2.frames[0].fc_area_mm2));
}

TEST_CASE("dilating the mask never shrinks arc, area, or max thickness") {
  Geometry geo;
  Mask m = band_mask(30, 64, 0, 6, 10, 30);
  Mask dil(30, 64);
  // naive 4-neighbour dilation with theta wrap
  for (int r = 0; r < 30; ++r)
    for (int t = 0; t < 64; ++t) {
      uint8_t v = m.data.at(r, t);
      if (r > 0) v |= m.data.at(r - 1, t);
      if (r < 29) v |= m.data.at(r + 1, t);
      v |= m.data.at(r, (t + 63) % 64);
      v |= m.data.at(r, (t + 1) % 64);
      dil.data.at(r, t) = v;
    }
  const auto lumen = flat_lumen(64, 15);
  auto q1 = quantify_pullback({m}, {lumen}, geo);
  auto q2 = quantify_pullback({dil}, {lumen}, geo);
  CHECK(q2.frames[0].fc_arc_deg >= q1.frames[0].fc_arc_deg);
  CHECK(q2.frames[0].fc_area_mm2 >= q1.frames[0].fc_area_mm2);
  CHECK(*q2.min_cap_thickness_um >= *q1.min_cap_thickness_um);
}

TEST_CASE("export writes heatmap, mesh, and summary with correct values") {
  const auto dir = fs::temp_directory_path() / "fibcap_quant_test";
  fs::remove_all(dir);
  Geometry geo;  // 0.2 mm frame spacing
  const int nt = 32;
  std::vector<Mask> masks;
  std::vector<LumenBoundary> lumens;
  for (int f = 0; f < 141; ++f) {
    masks.push_back(band_mask(40, nt, 0, 13, 5, 13));  // 65 um, 90 deg
    lumens.push_back(flat_lumen(nt, 25));
  }
  auto q = quantify_pullback(masks, lumens, geo);
  export_heatmap(q, lumens, geo, dir);

  REQUIRE(fs::exists(dir / "thickness_map.pgm"));
  REQUIRE(fs::exists(dir / "lumen_mesh.obj"));
  REQUIRE(fs::exists(dir / "summary.json"));

  // summary values
  std::ifstream js(dir / "summary.json");
  nlohmann::json summary;
  js >> summary;
  CHECK(summary["length_mm"].get<double>() == doctest::Approx(141 * 0.2));
  CHECK(summary["max_angle_deg"].get<double>() == doctest::Approx(90.0));
  CHECK(summary["min_cap_um"].get<double>() == doctest::Approx(65.0));
  CHECK(summary["tcfa"].get<bool>() == false);

  // heatmap is nt x n_frames, 16-bit, thickness in hundredths of um
  const auto map = load_pgm16(dir / "thickness_map.pgm");
  CHECK(map.rows() == nt);
  CHECK(map.cols() == 141);
  CHECK(map.at(5, 0) == 6500);  // occupied A-line: 65 um
  CHECK(map.at(0, 0) == 0);     // A-line with no cap

  // mesh has one vertex per (frame, A-line) and two triangles per quad
  std::ifstream obj(dir / "lumen_mesh.obj");
  int n_v = 0, n_f = 0;
  std::string line;
  while (std::getline(obj, line)) {
    if (line.rfind("v ", 0) == 0) ++n_v;
    if (line.rfind("f ", 0) == 0) ++n_f;
  }
  CHECK(n_v == 141 * nt);
  CHECK(n_f == 140 * nt * 2);
}

TEST_CASE("export with no frames reports nothing to export") {
  Geometry geo;
  FcQuantification q;
  CHECK_THROWS_WITH_AS(
      export_heatmap(q, {}, geo, fs::temp_directory_path() / "fibcap_empty"),
      "nothing to export", std::runtime_error);
}

TEST_CASE("mismatched masks and lumens are rejected") {
  Geometry geo;
  std::vector<Mask> masks = {band_mask(10, 8, 0, 2, 0, 4)};
  CHECK_THROWS_AS(quantify_pullback(masks, {}, geo), std::invalid_argument);
  Mask m = band_mask(10, 8, 0, 2, 0, 4);
  LumenBoundary short_lumen = flat_lumen(4, 3);
  CHECK_THROWS_AS(fc_area_mm2(m, short_lumen, geo), std::invalid_argument);
}
