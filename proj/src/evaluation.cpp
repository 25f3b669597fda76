#include "aled/evaluation.hpp"

#include "aled/error.hpp"

#include <algorithm>
#include <numeric>

namespace aled {

namespace {

void require_same_length(std::size_t a, std::size_t b) {
  if (a != b) throw Error(ErrorKind::kShape, "prediction and truth vectors differ in length");
}

// num / den, or 0 with `name` recorded when den == 0.
double rate(long num, long den, const char* name, std::vector<std::string>& undefined) {
  if (den == 0) {
    undefined.emplace_back(name);
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

bool MetricsSummary::is_undefined(const std::string& name) const {
  return std::find(undefined_rates.begin(), undefined_rates.end(), name) != undefined_rates.end();
}

MetricsSummary confusion_metrics(const std::vector<bool>& flags, const std::vector<bool>& truth) {
  require_same_length(flags.size(), truth.size());
  MetricsSummary s;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (truth[i]) {
      flags[i] ? ++s.tp : ++s.fn;
    } else {
      flags[i] ? ++s.fp : ++s.tn;
    }
  }
  s.sensitivity = rate(s.tp, s.tp + s.fn, "sensitivity", s.undefined_rates);
  s.specificity = rate(s.tn, s.tn + s.fp, "specificity", s.undefined_rates);
  s.ppv = rate(s.tp, s.tp + s.fp, "ppv", s.undefined_rates);
  s.npv = rate(s.tn, s.tn + s.fn, "npv", s.undefined_rates);
  if (s.is_undefined("sensitivity") || s.is_undefined("ppv") || s.ppv + s.sensitivity == 0.0) {
    s.undefined_rates.emplace_back("f1");
    s.f1 = 0.0;
  } else {
    s.f1 = 2.0 * s.ppv * s.sensitivity / (s.ppv + s.sensitivity);
  }
  return s;
}

double auprc(const std::vector<double>& scores, const std::vector<bool>& truth) {
  require_same_length(scores.size(), truth.size());
  const auto positives = std::count(truth.begin(), truth.end(), true);
  if (positives == 0) throw Error(ErrorKind::kUndefined, "AUPRC is undefined without positives");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  double sum = 0.0;
  long hits = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (truth[order[rank]]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  return sum / static_cast<double>(positives);
}

std::vector<SweepRow> threshold_sweep(const std::vector<double>& lambdas,
                                      const std::vector<bool>& truth,
                                      const std::vector<double>& taus) {
  require_same_length(lambdas.size(), truth.size());
  std::vector<SweepRow> rows;
  for (double tau : taus) {
    std::vector<bool> flags(lambdas.size());
    for (std::size_t i = 0; i < lambdas.size(); ++i) flags[i] = lambdas[i] > tau;
    const MetricsSummary m = confusion_metrics(flags, truth);
    rows.push_back({tau, m.sensitivity, m.ppv, m.f1});
  }
  return rows;
}

nlohmann::ordered_json metrics_to_json(const MetricsSummary& metrics) {
  nlohmann::ordered_json json;
  json["tp"] = metrics.tp;
  json["fp"] = metrics.fp;
  json["tn"] = metrics.tn;
  json["fn"] = metrics.fn;
  json["sensitivity"] = metrics.sensitivity;
  json["specificity"] = metrics.specificity;
  json["ppv"] = metrics.ppv;
  json["npv"] = metrics.npv;
  json["f1"] = metrics.f1;
  json["auprc"] = metrics.auprc ? nlohmann::ordered_json(*metrics.auprc) : nlohmann::ordered_json(nullptr);
  json["undefined_rates"] = metrics.undefined_rates;
  return json;
}

}  // namespace aled
