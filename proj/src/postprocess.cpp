#include "fibcap/postprocess.hpp"

#include <stdexcept>
#include <vector>

namespace fibcap {
namespace {

std::vector<std::pair<int, int>> disk_offsets(int radius) {
  std::vector<std::pair<int, int>> off;
  for (int dr = -radius; dr <= radius; ++dr)
    for (int dt = -radius; dt <= radius; ++dt)
      if (dr * dr + dt * dt <= radius * radius) off.emplace_back(dr, dt);
  return off;
}

}  // namespace

Mask binarize(const ImageF& prob, double threshold) {
  Mask out(prob.rows(), prob.cols());
  for (size_t i = 0; i < prob.size(); ++i) {
    const float v = prob.raw()[i];
    if (v < 0.0f || v > 1.0f)
      throw std::invalid_argument("binarize: probability out of [0,1]");
    out.data.raw()[i] = v >= threshold ? 1 : 0;
  }
  return out;
}

Mask open_disk(const Mask& mask, int radius) {
  if (radius < 1) throw std::invalid_argument("open_disk: radius must be >= 1");
  const int nr = mask.rows(), nt = mask.cols();
  const auto off = disk_offsets(radius);

  Mask eroded(nr, nt, mask.class_tag);
  for (int r = 0; r < nr; ++r)
    for (int t = 0; t < nt; ++t) {
      bool all = true;
      for (const auto& [dr, dt] : off) {
        const int rr = r + dr;
        if (rr < 0 || rr >= nr) {  // outside r = background
          all = false;
          break;
        }
        const int tt = ((t + dt) % nt + nt) % nt;
        if (!mask.data.at(rr, tt)) {
          all = false;
          break;
        }
      }
      eroded.data.at(r, t) = all ? 1 : 0;
    }

  Mask out(nr, nt, mask.class_tag);
  for (int r = 0; r < nr; ++r)
    for (int t = 0; t < nt; ++t) {
      if (!eroded.data.at(r, t)) continue;
      for (const auto& [dr, dt] : off) {
        const int rr = r + dr;
        if (rr < 0 || rr >= nr) continue;
        const int tt = ((t + dt) % nt + nt) % nt;
        out.data.at(rr, tt) = 1;
      }
    }
  return out;
}

Mask fill_holes(const Mask& mask) {
  const int nr = mask.rows(), nt = mask.cols();
  // Flood background from the r borders; 4-connectivity with theta wrap.
  std::vector<uint8_t> reach(static_cast<size_t>(nr) * nt, 0);
  std::vector<std::pair<int, int>> stack;
  auto push = [&](int r, int t) {
    const size_t i = static_cast<size_t>(r) * nt + t;
    if (!reach[i] && !mask.data.at(r, t)) {
      reach[i] = 1;
      stack.emplace_back(r, t);
    }
  };
  for (int t = 0; t < nt; ++t) {
    push(0, t);
    push(nr - 1, t);
  }
  while (!stack.empty()) {
    const auto [r, t] = stack.back();
    stack.pop_back();
    if (r > 0) push(r - 1, t);
    if (r < nr - 1) push(r + 1, t);
    push(r, (t + 1) % nt);
    push(r, (t - 1 + nt) % nt);
  }

  Mask out = mask;
  for (int r = 0; r < nr; ++r)
    for (int t = 0; t < nt; ++t)
      if (!reach[static_cast<size_t>(r) * nt + t]) out.data.at(r, t) = 1;
  return out;
}

Mask postprocess_mask(const Mask& mask, int radius) {
  return fill_holes(open_disk(mask, radius));
}

}  // namespace fibcap
