#pragma once

// Label-error detection: an ensemble of MCD fits on randomly augmented
// mean-difference projections, a likelihood-ratio test per sample, and a
// Bayes posterior used for ranking.

#include "aled/mcd.hpp"
#include "aled/tensor_io.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace aled {

/// ln of the largest finite likelihood ratio we report. Anything above is
/// an overflow: reported as infinity and always flagged.
inline constexpr double kLogLambdaCeiling = 700.0;

struct Priors {
  double given = 0.5;
  double alt = 0.5;
};

struct DetectorConfig {
  int reduced_dim = 2;  // d = 1 + number of random directions
  int ensembles = 10;   // k
  double tau = 2.0;
  McdConfig mcd;  // seed is ignored; each member derives its own
  std::uint64_t seed = 0;
  /// Fixed (given, alt) priors for every sample. When unset each sample
  /// uses the label proportions of its given and alternate class.
  std::optional<Priors> priors;

  void validate() const;
  int random_directions() const { return reduced_dim - 1; }
};

struct SampleResult {
  int index = 0;
  int given_label = 0;
  double log_mean_given = 0.0;  // ln of the ensemble-mean likelihood
  double log_mean_alt = 0.0;
  double lambda = 1.0;          // +inf when the ratio overflowed
  bool lambda_overflow = false;
  bool flagged = false;
  double posterior_mislabel = 0.5;
};

struct DetectionReport {
  DetectorConfig config;
  std::vector<SampleResult> samples;
  std::vector<int> flagged;  // ascending sample indices
  std::vector<int> corrected_labels;
  int sample_count = 0;
  int feature_dim = 0;
  int failed_members = 0;
};

struct EnsembleLikelihoods {
  Eigen::VectorXd log_mean_given;
  Eigen::VectorXd log_mean_alt;
  int failed_members = 0;
};

/// Seed for ensemble member `member` under `root`.
std::uint64_t member_seed(std::uint64_t root, int member);

/// Log of the arithmetic mean over members of each sample's likelihood under
/// its given and its alternate label. Centroids come from the given labels
/// once, before the loop. Members whose MCD fit degenerates are dropped;
/// throws kDetection if all are, kClass if a class has fewer than 2(d+1)
/// samples.
EnsembleLikelihoods ensemble_likelihoods(const FeatureMatrix& features, const LabelVector& labels,
                                         const DetectorConfig& config);

/// exp(log_mean_alt - log_mean_given); +inf once the exponent exceeds
/// kLogLambdaCeiling.
double likelihood_ratio(double log_mean_given, double log_mean_alt);

/// flag[i] = lambdas[i] > tau (strict).
std::vector<bool> classify_labels(const std::vector<double>& lambdas, double tau);

/// prior_alt f_alt / (prior_alt f_alt + prior_given f_given), in log space.
double posterior_mislabel(double log_mean_given, double log_mean_alt, double prior_given,
                          double prior_alt);

DetectionReport detect(const FeatureMatrix& features, const LabelVector& labels,
                       const DetectorConfig& config);
DetectionReport detect(const FeatureTensor& features, const LabelVector& labels,
                       const DetectorConfig& config);

/// Numerically stable ln(mean(exp(values))) accumulated in index order.
double log_mean_exp(const std::vector<double>& values);

}  // namespace aled
