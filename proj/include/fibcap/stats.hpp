#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fibcap/image.hpp"

namespace fibcap {

struct ConfusionCounts {
  uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

  uint64_t total() const { return tp + fp + tn + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }
};

// Pixel metrics; a metric is nullopt when its denominator is zero.
struct MetricsEntry {
  std::optional<double> ppv, npv, sensitivity, specificity, accuracy, dice;
};

struct MetricStat {
  double mean = 0.0;
  double stddev = 0.0;  // sample (n-1)
  int n_defined = 0;
  int n_excluded = 0;  // undefined entries left out of the mean
};

struct MetricsAggregate {
  MetricStat ppv, npv, sensitivity, specificity, accuracy, dice;
};

struct AgreementReport {
  double slope = 0.0, intercept = 0.0;
  std::optional<double> r_squared;  // undefined when truth variance is 0
  double ba_bias = 0.0, ba_sd = 0.0, ba_loa_low = 0.0, ba_loa_high = 0.0;
  double pct_within_loa = 0.0;
};

ConfusionCounts confusion(const Mask& pred, const Mask& truth);
MetricsEntry metrics(const ConfusionCounts& c);
MetricsAggregate fold_aggregate(const std::vector<MetricsEntry>& entries);

// OLS of auto on truth plus Bland-Altman on (auto - truth).
AgreementReport agreement(const std::vector<double>& auto_vals,
                          const std::vector<double>& truth_vals);

double coefficient_of_variation(const std::vector<double>& values);

}  // namespace fibcap
