#pragma once

// Synthetic pooled-feature datasets with known class manifolds, controlled
// label noise, and seeded multi-trial detection experiments.

#include "aled/detector.hpp"
#include "aled/evaluation.hpp"
#include "aled/tensor_io.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace aled {

enum class CovKind { kIsotropic, kDiagonalRandom, kFullRandom };

std::string to_string(CovKind kind);
CovKind cov_kind_from_string(const std::string& name);

struct SynthSpec {
  int m = 2000;
  int p = 256;
  /// Distance between class means in units of the average within-class std.
  double separation = 4.0;
  CovKind cov_kind = CovKind::kIsotropic;
  double cov_scale_ratio = 1.0;  // beta: Sigma_1 = beta * Sigma_0
  double class_balance = 0.5;    // fraction of class 1
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthData {
  FeatureMatrix features;
  LabelVector labels;
  Eigen::VectorXd mean0;
  Eigen::VectorXd mean1;
};

/// Class 0 centred at the origin, class 1 at separation * s * u for a seeded
/// random unit u, where s is the average within-class std. Rows are ordered
/// class 0 first.
SynthData synth_features(const SynthSpec& spec);

struct NoisyLabels {
  LabelVector labels;
  std::vector<bool> flip_mask;
};

/// Flips exactly round(rate * m) labels chosen uniformly without
/// replacement. Throws kShape unless 0 <= rate < 1, kDegenerate if every
/// label would flip.
NoisyLabels inject_label_noise(const LabelVector& labels, double rate, std::uint64_t seed);

/// Held-out accuracy of a linear discriminant (class MLE means, pooled
/// covariance, label-proportion priors) trained on `train_fraction` of a
/// clean draw and scored on the rest; averaged over `draws` seeded draws.
double linear_probe_accuracy(const SynthSpec& spec, int draws = 3, double train_fraction = 0.5);

struct Calibration {
  double separation = 0.0;
  double probe_accuracy = 0.0;
};

/// Bisects the separation so linear_probe_accuracy hits `target`.
Calibration calibrate_separation(SynthSpec spec, double target, int draws = 3);

struct TrialOutcome {
  int trial = 0;
  std::uint64_t data_seed = 0;
  std::uint64_t noise_seed = 0;
  std::uint64_t detector_seed = 0;
  MetricsSummary metrics;  // auprc set whenever the mask has positives
  std::vector<bool> flip_mask;
  int flagged = 0;
};

struct MeanSem {
  double mean = 0.0;
  double sem = 0.0;
  int n = 0;
};

/// Mean and sample-std / sqrt(n); sem is 0 when n == 1.
MeanSem mean_sem(const std::vector<double>& values);

struct TrialsSummary {
  double noise_rate = 0.0;
  int trials = 0;
  MeanSem sensitivity;
  MeanSem specificity;
  MeanSem ppv;
  MeanSem npv;
  MeanSem f1;
  MeanSem auprc;  // n counts trials where AUPRC is defined
  std::vector<TrialOutcome> outcomes;
};

TrialOutcome run_trial(const SynthSpec& spec, double noise_rate, const DetectorConfig& config, int trial);

/// Trial t uses data/noise seeds derived from (spec.seed, t) and a detector
/// seed derived from (config.seed, t). Aggregated in trial order.
TrialsSummary run_trials(const SynthSpec& spec, double noise_rate, const DetectorConfig& config,
                         int n_trials);

struct ExperimentConfig {
  SynthSpec spec;
  std::optional<double> target_probe_accuracy;  // calibrate separation when set
  std::vector<double> noise_rates{0.05};
  DetectorConfig detector;
  int trials = 3;
};

struct ExperimentResult {
  ExperimentConfig config;  // with the resolved separation
  std::optional<double> probe_accuracy;
  std::vector<TrialsSummary> rows;
};

/// {"spec": {...}, "noise_rate": x | [x, ...], "detector": {...}, "trials": n}.
/// Throws kFormat on malformed or unknown fields.
ExperimentConfig experiment_config_from_json(const nlohmann::ordered_json& json);
nlohmann::ordered_json synth_spec_to_json(const SynthSpec& spec);

ExperimentResult run_experiment(const ExperimentConfig& config);

nlohmann::ordered_json experiment_result_to_json(const ExperimentResult& result, bool per_trial);

}  // namespace aled
