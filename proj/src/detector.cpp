#include "aled/detector.hpp"

#include "aled/error.hpp"
#include "aled/gaussian.hpp"
#include "aled/parallel.hpp"
#include "aled/projection.hpp"
#include "aled/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace aled {

namespace {

struct MemberResult {
  Eigen::VectorXd log_given;
  Eigen::VectorXd log_alt;
  bool ok = false;
};

Eigen::MatrixXd rows_with_label(const Eigen::MatrixXd& data, const LabelVector& labels, int label) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(labels.count(label)), data.cols());
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    if (labels[static_cast<std::size_t>(i)] == label) out.row(r++) = data.row(i);
  }
  return out;
}

}  // namespace

void DetectorConfig::validate() const {
  if (reduced_dim < 1) throw Error(ErrorKind::kShape, "reduced dimension d must be >= 1");
  if (ensembles < 1) throw Error(ErrorKind::kShape, "ensemble count k must be >= 1");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw Error(ErrorKind::kShape, "tau must be a positive number");
  if (priors) {
    const double sum = priors->given + priors->alt;
    if (!(priors->given > 0.0) || !(priors->alt > 0.0) || std::abs(sum - 1.0) > 1e-9) {
      throw Error(ErrorKind::kShape, "priors must be positive and sum to 1");
    }
  }
  mcd.validate();
}

std::uint64_t member_seed(std::uint64_t root, int member) {
  return derive_seed(root, static_cast<std::uint64_t>(member));
}

double log_mean_exp(const std::vector<double>& values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double peak = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(peak)) return peak;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - peak);
  return peak + std::log(sum) - std::log(static_cast<double>(values.size()));
}

EnsembleLikelihoods ensemble_likelihoods(const FeatureMatrix& features, const LabelVector& labels,
                                         const DetectorConfig& config) {
  config.validate();
  const auto& z = features.data();
  const auto m = static_cast<std::size_t>(z.rows());
  if (labels.size() != m) {
    throw Error(ErrorKind::kShape, "got " + std::to_string(labels.size()) + " labels for " +
                                       std::to_string(m) + " samples");
  }
  const auto d = static_cast<std::size_t>(config.reduced_dim);
  if (d >= m) throw Error(ErrorKind::kShape, "reduced dimension must be smaller than the sample count");
  const std::size_t min_class = 2 * (d + 1);
  for (int c = 0; c < 2; ++c) {
    if (labels.count(c) < min_class) {
      throw Error(ErrorKind::kClass, "class " + std::to_string(c) + " has " +
                                         std::to_string(labels.count(c)) + " samples; need at least " +
                                         std::to_string(min_class));
    }
  }

  const ClassCentroids centroids = class_centroids(features, labels);
  if (centroids.mu0 == centroids.mu1) {
    throw Error(ErrorKind::kDegenerate, "class centroids coincide; no mean-difference direction");
  }

  std::vector<MemberResult> members(static_cast<std::size_t>(config.ensembles));
  parallel_for(members.size(), [&](std::size_t j) {
    const std::uint64_t seed = member_seed(config.seed, static_cast<int>(j));
    const ProjectionBasis basis = assemble_projection(
        centroids.mu0, centroids.mu1,
        random_basis(z.cols(), config.random_directions(), derive_seed(seed, 0)));
    const Eigen::MatrixXd reduced = project(basis, z);

    // Both classes share one MCD seed so relabeling 0 <-> 1 reproduces the fits.
    McdConfig mcd = config.mcd;
    mcd.seed = derive_seed(seed, 1);
    MemberResult& out = members[j];
    try {
      const McdFit fit0 = fast_mcd(rows_with_label(reduced, labels, 0), mcd);
      const McdFit fit1 = fast_mcd(rows_with_label(reduced, labels, 1), mcd);
      const Eigen::VectorXd log0 = log_pdf_rows(fit0.model, reduced);
      const Eigen::VectorXd log1 = log_pdf_rows(fit1.model, reduced);
      out.log_given.resize(static_cast<Eigen::Index>(m));
      out.log_alt.resize(static_cast<Eigen::Index>(m));
      for (std::size_t i = 0; i < m; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const bool given_is_zero = labels[i] == 0;
        out.log_given(ii) = given_is_zero ? log0(ii) : log1(ii);
        out.log_alt(ii) = given_is_zero ? log1(ii) : log0(ii);
      }
      out.ok = true;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kDegenerate && e.kind() != ErrorKind::kNotPositiveDefinite) throw;
    }
  });

  EnsembleLikelihoods result;
  result.log_mean_given.resize(static_cast<Eigen::Index>(m));
  result.log_mean_alt.resize(static_cast<Eigen::Index>(m));
  std::vector<const MemberResult*> ok;
  for (const auto& member : members) {
    if (member.ok) {
      ok.push_back(&member);
    } else {
      ++result.failed_members;
    }
  }
  if (ok.empty()) throw Error(ErrorKind::kDetection, "MCD degenerated in every ensemble member");

  std::vector<double> given(ok.size());
  std::vector<double> alt(ok.size());
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(m); ++i) {
    for (std::size_t j = 0; j < ok.size(); ++j) {
      given[j] = ok[j]->log_given(i);
      alt[j] = ok[j]->log_alt(i);
    }
    result.log_mean_given(i) = log_mean_exp(given);
    result.log_mean_alt(i) = log_mean_exp(alt);
  }
  return result;
}

double likelihood_ratio(double log_mean_given, double log_mean_alt) {
  const double log_lambda = log_mean_alt - log_mean_given;
  if (log_lambda > kLogLambdaCeiling) return std::numeric_limits<double>::infinity();
  return std::exp(log_lambda);
}

std::vector<bool> classify_labels(const std::vector<double>& lambdas, double tau) {
  if (!(tau > 0.0)) throw Error(ErrorKind::kShape, "tau must be positive");
  std::vector<bool> flags(lambdas.size());
  std::transform(lambdas.begin(), lambdas.end(), flags.begin(), [tau](double l) { return l > tau; });
  return flags;
}

double posterior_mislabel(double log_mean_given, double log_mean_alt, double prior_given,
                          double prior_alt) {
  const double a = std::log(prior_alt) + log_mean_alt;
  const double b = std::log(prior_given) + log_mean_given;
  if (a >= b) return 1.0 / (1.0 + std::exp(b - a));
  const double e = std::exp(a - b);
  return e / (1.0 + e);
}

DetectionReport detect(const FeatureMatrix& features, const LabelVector& labels,
                       const DetectorConfig& config) {
  const EnsembleLikelihoods likelihoods = ensemble_likelihoods(features, labels, config);
  const auto m = labels.size();
  const double proportion[2] = {static_cast<double>(labels.count(0)) / static_cast<double>(m),
                                static_cast<double>(labels.count(1)) / static_cast<double>(m)};

  DetectionReport report;
  report.config = config;
  report.sample_count = static_cast<int>(m);
  report.feature_dim = static_cast<int>(features.dim());
  report.failed_members = likelihoods.failed_members;
  report.samples.resize(m);
  report.corrected_labels = labels.values();

  std::vector<double> lambdas(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    SampleResult& s = report.samples[i];
    s.index = static_cast<int>(i);
    s.given_label = labels[i];
    s.log_mean_given = likelihoods.log_mean_given(ii);
    s.log_mean_alt = likelihoods.log_mean_alt(ii);
    s.lambda = likelihood_ratio(s.log_mean_given, s.log_mean_alt);
    s.lambda_overflow = std::isinf(s.lambda);
    const Priors priors = config.priors.value_or(
        Priors{proportion[s.given_label], proportion[1 - s.given_label]});
    s.posterior_mislabel = posterior_mislabel(s.log_mean_given, s.log_mean_alt, priors.given, priors.alt);
    lambdas[i] = s.lambda;
  }

  const std::vector<bool> flags = classify_labels(lambdas, config.tau);
  for (std::size_t i = 0; i < m; ++i) {
    SampleResult& s = report.samples[i];
    s.flagged = flags[i] || s.lambda_overflow;
    if (s.flagged) {
      report.flagged.push_back(s.index);
      report.corrected_labels[i] = 1 - s.given_label;
    }
  }
  return report;
}

DetectionReport detect(const FeatureTensor& features, const LabelVector& labels,
                       const DetectorConfig& config) {
  return detect(as_feature_matrix(features), labels, config);
}

}  // namespace aled
