#pragma once

// Detection scoring against a known mislabel mask. The positive class is
// "genuinely mislabeled".

#include "json.hpp"

#include <optional>
#include <string>
#include <vector>

namespace aled {

struct MetricsSummary {
  long tp = 0;
  long fp = 0;
  long tn = 0;
  long fn = 0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double ppv = 0.0;
  double npv = 0.0;
  double f1 = 0.0;
  std::optional<double> auprc;
  /// Names of rates whose denominator was zero; those rates read as 0.
  std::vector<std::string> undefined_rates;

  long total() const { return tp + fp + tn + fn; }
  bool is_undefined(const std::string& rate) const;
};

/// Throws kShape if the vectors differ in length.
MetricsSummary confusion_metrics(const std::vector<bool>& flags, const std::vector<bool>& truth);

/// Average precision of the ranking by descending score, ties broken by
/// ascending index. Throws kUndefined without positives, kShape on length
/// mismatch.
double auprc(const std::vector<double>& scores, const std::vector<bool>& truth);

struct SweepRow {
  double tau = 0.0;
  double sensitivity = 0.0;
  double ppv = 0.0;
  double f1 = 0.0;
};

/// Re-thresholds likelihood ratios at each tau (flag iff lambda > tau).
std::vector<SweepRow> threshold_sweep(const std::vector<double>& lambdas,
                                      const std::vector<bool>& truth,
                                      const std::vector<double>& taus);

nlohmann::ordered_json metrics_to_json(const MetricsSummary& metrics);

}  // namespace aled
