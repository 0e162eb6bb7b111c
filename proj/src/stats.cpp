#include "fibcap/stats.hpp"

#include <cmath>
#include <stdexcept>

namespace fibcap {
namespace {

MetricStat aggregate_one(const std::vector<std::optional<double>>& vals) {
  MetricStat s;
  double sum = 0.0;
  for (const auto& v : vals) {
    if (v) {
      sum += *v;
      ++s.n_defined;
    } else {
      ++s.n_excluded;
    }
  }
  if (s.n_defined == 0) return s;
  s.mean = sum / s.n_defined;
  double ss = 0.0;
  for (const auto& v : vals)
    if (v) ss += (*v - s.mean) * (*v - s.mean);
  s.stddev = s.n_defined > 1 ? std::sqrt(ss / (s.n_defined - 1)) : 0.0;
  return s;
}

}  // namespace

ConfusionCounts confusion(const Mask& pred, const Mask& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
    throw std::invalid_argument("confusion: shape mismatch");
  ConfusionCounts c;
  for (size_t i = 0; i < pred.data.size(); ++i) {
    const bool p = pred.data.raw()[i] != 0, t = truth.data.raw()[i] != 0;
    if (p && t)
      ++c.tp;
    else if (p && !t)
      ++c.fp;
    else if (!p && t)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

MetricsEntry metrics(const ConfusionCounts& c) {
  if (c.total() == 0) throw std::invalid_argument("metrics: empty counts");
  auto ratio = [](uint64_t num, uint64_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  MetricsEntry e;
  e.ppv = ratio(c.tp, c.tp + c.fp);
  e.npv = ratio(c.tn, c.tn + c.fn);
  e.sensitivity = ratio(c.tp, c.tp + c.fn);
  e.specificity = ratio(c.tn, c.tn + c.fp);
  e.accuracy = ratio(c.tp + c.tn, c.total());
  e.dice = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
  return e;
}

MetricsAggregate fold_aggregate(const std::vector<MetricsEntry>& entries) {
  if (entries.size() < 2)
    throw std::invalid_argument("fold_aggregate: need at least 2 entries");
  auto collect = [&](auto member) {
    std::vector<std::optional<double>> vals;
    vals.reserve(entries.size());
    for (const auto& e : entries) vals.push_back(e.*member);
    return aggregate_one(vals);
  };
  MetricsAggregate a;
  a.ppv = collect(&MetricsEntry::ppv);
  a.npv = collect(&MetricsEntry::npv);
  a.sensitivity = collect(&MetricsEntry::sensitivity);
  a.specificity = collect(&MetricsEntry::specificity);
  a.accuracy = collect(&MetricsEntry::accuracy);
  a.dice = collect(&MetricsEntry::dice);
  return a;
}

AgreementReport agreement(const std::vector<double>& auto_vals,
                          const std::vector<double>& truth_vals) {
  const size_t n = auto_vals.size();
  if (n != truth_vals.size())
    throw std::invalid_argument("agreement: length mismatch");
  if (n < 3) throw std::invalid_argument("agreement: need at least 3 pairs");

  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mx += truth_vals[i];
    my += auto_vals[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double dx = truth_vals[i] - mx, dy = auto_vals[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }

  AgreementReport rep;
  if (sxx > 0.0) {
    rep.slope = sxy / sxx;
    rep.intercept = my - rep.slope * mx;
    if (syy > 0.0)
      rep.r_squared = (sxy * sxy) / (sxx * syy);
    else
      rep.r_squared = 1.0;  // constant residual-free fit
  } else {
    rep.slope = 0.0;
    rep.intercept = my;
    rep.r_squared = std::nullopt;
  }

  // Bland-Altman on auto - truth.
  double sum = 0.0;
  for (size_t i = 0; i < n; ++i) sum += auto_vals[i] - truth_vals[i];
  rep.ba_bias = sum / n;
  double ss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double d = auto_vals[i] - truth_vals[i] - rep.ba_bias;
    ss += d * d;
  }
  rep.ba_sd = std::sqrt(ss / (n - 1));
  rep.ba_loa_low = rep.ba_bias - 1.96 * rep.ba_sd;
  rep.ba_loa_high = rep.ba_bias + 1.96 * rep.ba_sd;
  size_t within = 0;
  for (size_t i = 0; i < n; ++i) {
    const double d = auto_vals[i] - truth_vals[i];
    if (d >= rep.ba_loa_low && d <= rep.ba_loa_high) ++within;
  }
  rep.pct_within_loa = 100.0 * static_cast<double>(within) / n;
  return rep;
}

double coefficient_of_variation(const std::vector<double>& values) {
  if (values.size() < 2)
    throw std::invalid_argument("coefficient_of_variation: need n >= 2");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= values.size();
  if (mean == 0.0)
    throw std::invalid_argument("coefficient_of_variation: zero mean");
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / (values.size() - 1)) / mean;
}

}  // namespace fibcap
