#include "fibcap/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace fibcap {
namespace {

constexpr double kBig = 1e18;

int wrapped_distance(int a, int b, int n) {
  int d = std::abs(a - b);
  return std::min(d, n - d);
}

// Mean intensity of each theta column.
std::vector<double> column_means(const PolarFrame& frame) {
  const int nr = frame.n_r(), nt = frame.n_theta();
  std::vector<double> s(nt, 0.0);
  for (int r = 0; r < nr; ++r)
    for (int t = 0; t < nt; ++t) s[t] += frame.data.at(r, t);
  for (auto& v : s) v /= nr;
  return s;
}

struct IntervalScore {
  double cost;
  int width;
};

// Best interval (over allowed widths) centred at each A-line.
// cost(start, w) = sum over the wrapped interval of (col[t] - lambda), so
// every column darker than lambda = lambda_scale * mean pays to be covered
// and the minimizer recovers the full extent of the shadow.
std::vector<IntervalScore> best_interval_per_centre(
    const std::vector<double>& col, const GuidewireParams& p) {
  const int nt = static_cast<int>(col.size());
  const double mean = std::accumulate(col.begin(), col.end(), 0.0) / nt;
  const double lambda = p.lambda_scale * mean;

  std::vector<double> prefix(2 * nt + 1, 0.0);
  for (int i = 0; i < 2 * nt; ++i)
    prefix[i + 1] = prefix[i] + (col[i % nt] - lambda);

  const int w_min = 4;
  const int w_max = std::min(3 * p.width_prior, nt - 1);
  std::vector<IntervalScore> best(nt, {kBig, p.width_prior});
  for (int w = w_min; w <= w_max; ++w) {
    for (int start = 0; start < nt; ++start) {
      const double cost = prefix[start + w] - prefix[start];
      const int centre = (start + w / 2) % nt;
      if (cost < best[centre].cost) best[centre] = {cost, w};
    }
  }
  return best;
}

GuidewireShadow shadow_from_centre(int centre, int width, int nt) {
  GuidewireShadow s;
  s.theta_start = ((centre - width / 2) % nt + nt) % nt;
  s.theta_end = (s.theta_start + width - 1) % nt;
  return s;
}

void flag_confidence(GuidewireShadow& s, const std::vector<double>& col,
                     const GuidewireParams& p) {
  const int nt = static_cast<int>(col.size());
  const double mean = std::accumulate(col.begin(), col.end(), 0.0) / nt;
  double inside = 0.0;
  const int w = s.width(nt);
  for (int i = 0; i < w; ++i) inside += col[(s.theta_start + i) % nt];
  inside /= w;
  const double gap = mean > 1e-12 ? (mean - inside) / mean : 0.0;
  s.low_confidence = gap < p.confidence_tau;
}

// 1-D Gaussian weights for the 7x7 kernel, sigma = 1, normalized.
std::array<double, 7> gauss_weights() {
  std::array<double, 7> w{};
  double sum = 0.0;
  for (int k = -3; k <= 3; ++k) {
    w[k + 3] = std::exp(-0.5 * k * k);
    sum += w[k + 3];
  }
  for (auto& v : w) v /= sum;
  return w;
}

int reflect_r(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

}  // namespace

GuidewireShadow detect_guidewire(const PolarFrame& frame,
                                 const GuidewireParams& params) {
  const int nt = frame.n_theta();
  if (nt < 8) throw std::invalid_argument("detect_guidewire: n_theta < 8");
  const auto col = column_means(frame);
  const auto best = best_interval_per_centre(col, params);

  int centre = 0;
  for (int c = 1; c < nt; ++c)
    if (best[c].cost < best[centre].cost) centre = c;
  auto s = shadow_from_centre(centre, best[centre].width, nt);
  flag_confidence(s, col, params);
  // without a convincing dark gap the width estimate is meaningless; fall
  // back to the prior so downstream masking stays conservative
  if (s.low_confidence) {
    s = shadow_from_centre(centre, params.width_prior, nt);
    s.low_confidence = true;
  }
  return s;
}

std::vector<GuidewireShadow> detect_guidewire_pullback(
    const Pullback& pb, const GuidewireParams& params) {
  const int nt = pb.n_theta();
  if (nt < 8) throw std::invalid_argument("detect_guidewire: n_theta < 8");
  const int n = pb.n_frames();

  std::vector<std::vector<double>> cols(n);
  std::vector<std::vector<IntervalScore>> unary(n);
  for (int f = 0; f < n; ++f) {
    cols[f] = column_means(pb.frames[f]);
    unary[f] = best_interval_per_centre(cols[f], params);
  }

  // Viterbi over centres with a wrapped-distance jump cost between frames.
  std::vector<std::vector<double>> acc(n, std::vector<double>(nt));
  std::vector<std::vector<int>> from(n, std::vector<int>(nt, 0));
  for (int c = 0; c < nt; ++c) acc[0][c] = unary[0][c].cost;
  for (int f = 1; f < n; ++f) {
    for (int c = 0; c < nt; ++c) {
      double best_cost = kBig;
      int best_prev = 0;
      for (int p = 0; p < nt; ++p) {
        const double cost =
            acc[f - 1][p] + params.jump_cost * wrapped_distance(c, p, nt);
        if (cost < best_cost) {
          best_cost = cost;
          best_prev = p;
        }
      }
      acc[f][c] = best_cost + unary[f][c].cost;
      from[f][c] = best_prev;
    }
  }

  int centre = 0;
  for (int c = 1; c < nt; ++c)
    if (acc[n - 1][c] < acc[n - 1][centre]) centre = c;
  std::vector<GuidewireShadow> out(n);
  for (int f = n - 1; f >= 0; --f) {
    out[f] = shadow_from_centre(centre, unary[f][centre].width, nt);
    flag_confidence(out[f], cols[f], params);
    if (out[f].low_confidence) {
      out[f] = shadow_from_centre(centre, params.width_prior, nt);
      out[f].low_confidence = true;
    }
    if (f > 0) centre = from[f][centre];
  }
  return out;
}

LumenBoundary segment_lumen(const PolarFrame& frame,
                            const GuidewireShadow& shadow,
                            const LumenParams& params) {
  const int nr = frame.n_r(), nt = frame.n_theta();

  // 5-sample running mean along r per A-line.
  ImageF smooth(nr, nt, 0.0f);
  for (int t = 0; t < nt; ++t) {
    for (int r = 0; r < nr; ++r) {
      double acc = 0.0;
      int cnt = 0;
      for (int k = -2; k <= 2; ++k) {
        const int rr = r + k;
        if (rr >= 0 && rr < nr) {
          acc += frame.data.at(rr, t);
          ++cnt;
        }
      }
      smooth.at(r, t) = static_cast<float>(acc / cnt);
    }
  }

  // Otsu threshold over the smoothed frame.
  std::array<int, 256> hist{};
  for (float v : smooth.raw())
    hist[std::min(255, static_cast<int>(v * 255.0f))]++;
  const double total = static_cast<double>(smooth.size());
  double sum_all = 0.0;
  for (int i = 0; i < 256; ++i) sum_all += i * hist[i];
  double best_var = -1.0, w0 = 0.0, sum0 = 0.0;
  int otsu = 0;
  for (int i = 0; i < 256; ++i) {
    w0 += hist[i];
    if (w0 == 0) continue;
    const double w1 = total - w0;
    if (w1 == 0) break;
    sum0 += i * hist[i];
    const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
    const double var = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (var > best_var) {
      best_var = var;
      otsu = i;
    }
  }
  const float threshold = static_cast<float>(otsu / 255.0);

  // First above-threshold candidate per A-line.
  std::vector<int> candidate(nt, -1);
  bool any_valid = false;
  for (int t = 0; t < nt; ++t) {
    if (shadow.contains(t, nt)) continue;
    for (int r = 0; r < nr; ++r) {
      if (smooth.at(r, t) > threshold && smooth.at(r, t) > 0.0f) {
        candidate[t] = r;
        any_valid = true;
        break;
      }
    }
  }
  if (!any_valid) throw std::runtime_error("no lumen found");

  // Shortest path over theta: cost = -edge strength (above threshold only)
  // + gamma * |dr| between neighbours. The running mean flattens the edge
  // response over ~3 rows, so a small pull toward the first threshold
  // crossing breaks those ties at the luminal side.
  const double anchor_weight = 0.15;
  auto unary = [&](int t, int r) -> double {
    if (shadow.contains(t, nt) || candidate[t] < 0) return 0.0;
    if (smooth.at(r, t) <= threshold) return kBig;
    const double below = r >= 2 ? smooth.at(r - 2, t) : 0.0;
    return -(smooth.at(r, t) - below) +
           anchor_weight * std::abs(r - candidate[t]);
  };

  std::vector<double> prev(nr), cur(nr);
  std::vector<std::vector<int>> from(nt, std::vector<int>(nr, 0));
  for (int r = 0; r < nr; ++r) prev[r] = unary(0, r);
  for (int t = 1; t < nt; ++t) {
    for (int r = 0; r < nr; ++r) {
      double best_cost = kBig * 2;
      int best_prev = r;
      const int lo = std::max(0, r - params.max_step);
      const int hi = std::min(nr - 1, r + params.max_step);
      for (int p = lo; p <= hi; ++p) {
        const double cost =
            prev[p] + params.smoothness_gamma * std::abs(r - p);
        if (cost < best_cost) {
          best_cost = cost;
          best_prev = p;
        }
      }
      cur[r] = best_cost + unary(t, r);
      from[t][r] = best_prev;
    }
    std::swap(prev, cur);
  }

  LumenBoundary lb;
  lb.r_index.assign(nt, 0);
  lb.valid.assign(nt, false);
  int r = 0;
  for (int i = 1; i < nr; ++i)
    if (prev[i] < prev[r]) r = i;
  for (int t = nt - 1; t >= 0; --t) {
    lb.r_index[t] = r;
    lb.valid[t] = !shadow.contains(t, nt) && candidate[t] >= 0;
    if (t > 0) r = from[t][r];
  }

  // Replace shadow/invalid A-lines by linear interpolation between the
  // nearest valid neighbours (wrapping).
  for (int t = 0; t < nt; ++t) {
    if (lb.valid[t]) continue;
    int left = t, right = t, dl = 0, dr = 0;
    while (!lb.valid[left] && dl < nt) {
      left = (left - 1 + nt) % nt;
      ++dl;
    }
    while (!lb.valid[right] && dr < nt) {
      right = (right + 1) % nt;
      ++dr;
    }
    const double span = dl + dr;
    lb.r_index[t] = static_cast<int>(std::lround(
        (lb.r_index[left] * dr + lb.r_index[right] * dl) / span));
  }
  return lb;
}

PolarFrame pixel_shift(const PolarFrame& frame, const LumenBoundary& lumen,
                       const GuidewireShadow& shadow) {
  const int nr = frame.n_r(), nt = frame.n_theta();
  PolarFrame out;
  out.frame_index = frame.frame_index;
  out.data = ImageF(nr, nt, 0.0f);
  for (int t = 0; t < nt; ++t) {
    if (shadow.contains(t, nt)) continue;  // shadow columns stay zero
    const int shift = lumen.r_index[t];
    for (int r = shift; r < nr; ++r)
      out.data.at(r - shift, t) = frame.data.at(r, t);
  }
  return out;
}

Mask shift_mask(const Mask& mask, const LumenBoundary& lumen) {
  const int nr = mask.rows(), nt = mask.cols();
  Mask out(nr, nt, mask.class_tag);
  for (int t = 0; t < nt; ++t) {
    const int shift = lumen.r_index[t];
    for (int r = shift; r < nr; ++r)
      out.data.at(r - shift, t) = mask.data.at(r, t);
  }
  return out;
}

ImageF gaussian7x7(const ImageF& img) {
  static const auto w = gauss_weights();
  const int nr = img.rows(), nt = img.cols();
  ImageF tmp(nr, nt, 0.0f), out(nr, nt, 0.0f);
  // r pass, reflecting borders
  for (int r = 0; r < nr; ++r)
    for (int t = 0; t < nt; ++t) {
      double acc = 0.0;
      for (int k = -3; k <= 3; ++k)
        acc += w[k + 3] * img.at(reflect_r(r + k, nr), t);
      tmp.at(r, t) = static_cast<float>(acc);
    }
  // theta pass, wrapping
  for (int r = 0; r < nr; ++r)
    for (int t = 0; t < nt; ++t) {
      double acc = 0.0;
      for (int k = -3; k <= 3; ++k)
        acc += w[k + 3] * tmp.at(r, (t + k + nt) % nt);
      out.at(r, t) = static_cast<float>(acc);
    }
  return out;
}

PreprocFrame crop_and_filter(const PolarFrame& shifted,
                             const LumenBoundary& lumen,
                             const GuidewireShadow& shadow) {
  if (shifted.n_r() < kPreprocRows)
    throw std::invalid_argument("crop_and_filter: n_r < 200");
  const int nt = shifted.n_theta();
  ImageF cropped(kPreprocRows, nt, 0.0f);
  for (int r = 0; r < kPreprocRows; ++r)
    for (int t = 0; t < nt; ++t) cropped.at(r, t) = shifted.data.at(r, t);

  PreprocFrame out;
  out.data = gaussian7x7(cropped);
  out.lumen = lumen;
  out.shadow = shadow;
  out.source_frame_index = shifted.frame_index;
  return out;
}

PreprocFrame preprocess_frame(const PolarFrame& frame,
                              const GuidewireParams& gw,
                              const LumenParams& lp) {
  const auto shadow = detect_guidewire(frame, gw);
  const auto lumen = segment_lumen(frame, shadow, lp);
  const auto shifted = pixel_shift(frame, lumen, shadow);
  return crop_and_filter(shifted, lumen, shadow);
}

}  // namespace fibcap
