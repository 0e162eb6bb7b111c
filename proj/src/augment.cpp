#include "fibcap/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fibcap {

void AugmentConfig::validate(int n_theta) const {
  auto prob_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob_ok(flip_prob) || !prob_ok(scale_prob) || !prob_ok(shift_prob))
    throw std::invalid_argument("AugmentConfig: probabilities must be in [0,1]");
  if (scale_factor <= 0 || shift_factor <= 0)
    throw std::invalid_argument("AugmentConfig: factors must be positive");
  for (int o : offsets)
    if (o < 0 || o >= n_theta)
      throw std::invalid_argument("AugmentConfig: offset out of range");
}

std::pair<Pullback, std::vector<Mask>> spiral_offsets(
    const Pullback& pb, const std::vector<Mask>& masks, int offset) {
  const int nt = pb.n_theta(), nr = pb.n_r(), n = pb.n_frames();
  if (offset < 0 || offset >= nt)
    throw std::invalid_argument("spiral_offsets: offset out of range");
  if (!masks.empty() && static_cast<int>(masks.size()) != n)
    throw std::invalid_argument("spiral_offsets: mask count mismatch");
  for (const auto& m : masks)
    if (m.rows() != nr || m.cols() != nt)
      throw std::invalid_argument("spiral_offsets: mask dimensions mismatch");
  if (offset == 0) return {pb, masks};

  // Global A-line index g = frame * n_theta + theta.
  auto src = [&](long g) { return std::pair<int, int>{g / nt, g % nt}; };

  Pullback out;
  out.geometry = pb.geometry;
  out.pullback_id = pb.pullback_id + "+off" + std::to_string(offset);
  std::vector<Mask> out_masks;
  const int n_out = n - 1;  // last partial frame dropped
  out.frames.reserve(n_out);
  for (int f = 0; f < n_out; ++f) {
    PolarFrame frame;
    frame.frame_index = f;
    frame.data = ImageF(nr, nt);
    Mask m(nr, nt, masks.empty() ? MaskClass::FC : masks.front().class_tag);
    for (int t = 0; t < nt; ++t) {
      const auto [sf, st] = src(static_cast<long>(offset) + static_cast<long>(f) * nt + t);
      for (int r = 0; r < nr; ++r) {
        frame.data.at(r, t) = pb.frames[sf].data.at(r, st);
        if (!masks.empty()) m.data.at(r, t) = masks[sf].data.at(r, st);
      }
    }
    out.frames.push_back(std::move(frame));
    if (!masks.empty()) out_masks.push_back(std::move(m));
  }
  return {out, out_masks};
}

void stochastic_augment(ImageF& frame, Mask& mask, const AugmentConfig& cfg,
                        std::mt19937_64& rng) {
  if (frame.rows() != mask.rows() || frame.cols() != mask.cols())
    throw std::invalid_argument("stochastic_augment: frame/mask shape mismatch");
  for (float v : frame.raw())
    if (v < 0.0f || v > 1.0f)
      throw std::invalid_argument("stochastic_augment: input not normalized to [0,1]");

  std::uniform_real_distribution<double> uni(0.0, 1.0);

  if (uni(rng) < cfg.flip_prob) {
    const int nr = frame.rows(), nt = frame.cols();
    for (int r = 0; r < nr; ++r)
      for (int t = 0; t < nt / 2; ++t) {
        std::swap(frame.at(r, t), frame.at(r, nt - 1 - t));
        std::swap(mask.data.at(r, t), mask.data.at(r, nt - 1 - t));
      }
  }
  if (uni(rng) < cfg.scale_prob) {
    std::uniform_real_distribution<double> u(1.0 - cfg.scale_factor,
                                             1.0 + cfg.scale_factor);
    const double s = u(rng);
    for (auto& v : frame.raw())
      v = static_cast<float>(std::clamp(v * s, 0.0, 1.0));
  }
  if (uni(rng) < cfg.shift_prob) {
    std::uniform_real_distribution<double> u(-cfg.shift_factor, cfg.shift_factor);
    const double d = u(rng);
    for (auto& v : frame.raw())
      v = static_cast<float>(std::clamp(v + d, 0.0, 1.0));
  }
}

}  // namespace fibcap
