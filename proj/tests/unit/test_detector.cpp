#include "aled/detector.hpp"
#include "aled/error.hpp"
#include "aled/gaussian.hpp"
#include "aled/report_io.hpp"

#include "doctest.h"
#include "testing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace aled;

namespace {

struct Fixture {
  FeatureMatrix features;
  LabelVector labels;
};

// Two Gaussian blobs in p dimensions, `m` rows alternating labels, a few
// labels flipped.
Fixture two_blobs(std::uint64_t seed, int m = 160, int p = 12, double gap = 5.0, int flips = 6) {
  Rng rng(seed);
  Eigen::MatrixXd z = testing::normal_matrix(rng, m, p);
  std::vector<int> y(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    y[static_cast<std::size_t>(i)] = i % 2;
    if (i % 2) z(i, 0) += gap;
  }
  for (int f = 0; f < flips; ++f) y[static_cast<std::size_t>(7 * f + 3)] ^= 1;
  return {FeatureMatrix(z), LabelVector(y)};
}

double variance(const std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST_CASE("likelihood ratio examples") {
  CHECK(likelihood_ratio(-3.0, -3.0) == 1.0);
  CHECK(likelihood_ratio(-1.0, -1.0 + std::log(2.0)) == doctest::Approx(2.0).epsilon(1e-15));

  const GaussianModel c0(Eigen::VectorXd::Constant(1, 0.0), Eigen::MatrixXd::Identity(1, 1));
  const GaussianModel c1(Eigen::VectorXd::Constant(1, 2.0), Eigen::MatrixXd::Identity(1, 1));
  const Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
  CHECK(likelihood_ratio(log_pdf(c0, x), log_pdf(c1, x)) == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));
  CHECK(likelihood_ratio(log_pdf(c0, x), log_pdf(c1, x)) == doctest::Approx(0.1353353).epsilon(1e-7));
}

TEST_CASE("likelihood ratio overflows to infinity past the ceiling") {
  CHECK(std::isinf(likelihood_ratio(0.0, kLogLambdaCeiling + 1.0)));
  CHECK(std::isfinite(likelihood_ratio(0.0, kLogLambdaCeiling - 1.0)));
}

TEST_CASE("classify_labels uses a strict threshold") {
  CHECK(classify_labels({2.0}, 2.0) == std::vector<bool>{false});
  CHECK(classify_labels({2.001}, 2.0) == std::vector<bool>{true});
  CHECK(classify_labels({0.0, 0.0, 0.0}, 2.0) == std::vector<bool>(3, false));
}

TEST_CASE("threshold monotonicity") {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> lambdas(50);
    for (double& l : lambdas) l = std::exp(testing::uniform(rng, -5, 5));
    const double t1 = std::exp(testing::uniform(rng, -3, 3));
    const double t2 = t1 * std::exp(testing::uniform(rng, 0.01, 2));
    const auto low = classify_labels(lambdas, t1);
    const auto high = classify_labels(lambdas, t2);
    for (std::size_t i = 0; i < lambdas.size(); ++i) CHECK((!high[i] || low[i]));
  }
}

TEST_CASE("posterior examples") {
  CHECK(posterior_mislabel(-2.0, -2.0, 0.5, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(posterior_mislabel(-2.0, -2.0, 0.75, 0.25) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(posterior_mislabel(-2.0, -2.0 + std::log(3.0), 0.5, 0.5) == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(posterior_mislabel(0.0, -5000.0, 0.5, 0.5) == 0.0);
  CHECK(posterior_mislabel(-5000.0, 0.0, 0.5, 0.5) == 1.0);
}

TEST_CASE("posterior and ratio agree under equal priors") {
  Rng rng(6);
  for (int i = 0; i < 2000; ++i) {
    const double g = testing::uniform(rng, -50, 0);
    const double a = testing::uniform(rng, -50, 0);
    CHECK((posterior_mislabel(g, a, 0.5, 0.5) > 0.5) == (likelihood_ratio(g, a) > 1.0));
  }
}

TEST_CASE("log_mean_exp is stable") {
  CHECK(log_mean_exp({-1000.0, -1000.0}) == doctest::Approx(-1000.0).epsilon(1e-15));
  CHECK(log_mean_exp({0.0, std::log(3.0)}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(log_mean_exp({-2000.0}) == -2000.0);
}

TEST_CASE("single member reproduces its own log densities") {
  const Fixture f = two_blobs(1);
  DetectorConfig one;
  one.ensembles = 1;
  one.seed = 99;
  const EnsembleLikelihoods lik = ensemble_likelihoods(f.features, f.labels, one);
  // A second single-member run with the same root seed is the same member.
  const EnsembleLikelihoods again = ensemble_likelihoods(f.features, f.labels, one);
  CHECK(lik.log_mean_given == again.log_mean_given);
  CHECK(lik.log_mean_alt == again.log_mean_alt);
  // The first member of a larger ensemble is that member too, so a k=2 mean
  // sits within ln 2 of it from below.
  DetectorConfig two = one;
  two.ensembles = 2;
  const EnsembleLikelihoods pair = ensemble_likelihoods(f.features, f.labels, two);
  for (Eigen::Index i = 0; i < lik.log_mean_given.size(); ++i) {
    CHECK(pair.log_mean_given(i) >= lik.log_mean_given(i) - std::log(2.0) - 1e-12);
  }
}

TEST_CASE("mirrored classes give equal likelihoods at the midpoint") {
  Rng rng(12);
  const int half = 40;
  const Eigen::MatrixXd x = testing::normal_matrix(rng, half, 4).array() + 3.0;
  Eigen::MatrixXd z(2 * half + 2, 4);
  z.topRows(half) = x;
  z.row(half).setZero();
  z.block(half + 1, 0, half, 4) = -x;
  z.row(2 * half + 1).setZero();
  std::vector<int> y(2 * half + 2, 0);
  std::fill(y.begin() + half + 1, y.end(), 1);
  const EnsembleLikelihoods lik = ensemble_likelihoods(FeatureMatrix(z), LabelVector(y), DetectorConfig{});
  CHECK(std::abs(lik.log_mean_given(half) - lik.log_mean_alt(half)) <= 1e-6);
  CHECK(std::abs(lik.log_mean_given(2 * half + 1) - lik.log_mean_alt(2 * half + 1)) <= 1e-6);
}

TEST_CASE("detect is deterministic") {
  const Fixture f = two_blobs(2);
  DetectorConfig config;
  config.seed = 7;
  CHECK(report_to_string(detect(f.features, f.labels, config)) ==
        report_to_string(detect(f.features, f.labels, config)));
}

TEST_CASE("detect finds flipped labels in separated blobs") {
  const Fixture f = two_blobs(3, 400, 16, 8.0, 10);
  const DetectionReport report = detect(f.features, f.labels, DetectorConfig{});
  std::vector<int> flipped;
  for (int i = 0; i < 10; ++i) flipped.push_back(7 * i + 3);
  for (int i : flipped) CHECK(std::binary_search(report.flagged.begin(), report.flagged.end(), i));
  CHECK(report.flagged.size() <= flipped.size() + 2);
  CHECK(report.failed_members == 0);
  for (int i : report.flagged) {
    CHECK(report.corrected_labels[static_cast<std::size_t>(i)] == 1 - f.labels[static_cast<std::size_t>(i)]);
  }
}

TEST_CASE("clean well-separated data flags at most 1%") {
  const Fixture f = two_blobs(5, 400, 16, 10.0, 0);
  const DetectionReport report = detect(f.features, f.labels, DetectorConfig{});
  CHECK(report.flagged.size() <= 4);
}

TEST_CASE("swapping class labels keeps the flagged set") {
  for (std::uint64_t seed : {10u, 11u, 12u}) {
    const Fixture f = two_blobs(seed, 200, 10, 3.0, 8);
    std::vector<int> swapped = f.labels.values();
    for (int& v : swapped) v = 1 - v;
    DetectorConfig config;
    config.seed = seed;
    const DetectionReport a = detect(f.features, f.labels, config);
    const DetectionReport b = detect(f.features, LabelVector(swapped), config);
    CHECK(a.flagged == b.flagged);
  }
}

TEST_CASE("permuting samples permutes the outputs") {
  const Fixture f = two_blobs(20, 200, 8, 4.0, 8);
  const auto m = f.features.samples();
  std::vector<int> perm(static_cast<std::size_t>(m));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(3);
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::MatrixXd z(m, f.features.dim());
  std::vector<int> y(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    z.row(i) = f.features.data().row(perm[static_cast<std::size_t>(i)]);
    y[static_cast<std::size_t>(i)] = f.labels[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
  }
  const DetectionReport a = detect(f.features, f.labels, DetectorConfig{});
  const DetectionReport b = detect(FeatureMatrix(z), LabelVector(y), DetectorConfig{});
  for (Eigen::Index i = 0; i < m; ++i) {
    const SampleResult& sa = a.samples[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
    const SampleResult& sb = b.samples[static_cast<std::size_t>(i)];
    CHECK(sa.flagged == sb.flagged);
    CHECK(std::abs(sa.log_mean_given - sb.log_mean_given) <= 1e-8 * std::max(1.0, std::abs(sa.log_mean_given)));
    CHECK(std::abs(sa.log_mean_alt - sb.log_mean_alt) <= 1e-8 * std::max(1.0, std::abs(sa.log_mean_alt)));
  }
}

TEST_CASE("ratio spread across seeds shrinks as the ensemble grows") {
  const Fixture f = two_blobs(30, 120, 20, 3.0, 6);
  std::vector<double> medians;
  for (int k : {1, 10, 50}) {
    std::vector<std::vector<double>> lambdas(static_cast<std::size_t>(f.features.samples()));
    for (std::uint64_t rerun = 0; rerun < 20; ++rerun) {
      DetectorConfig config;
      config.ensembles = k;
      config.seed = 1000 + rerun;
      const DetectionReport report = detect(f.features, f.labels, config);
      for (std::size_t i = 0; i < lambdas.size(); ++i) lambdas[i].push_back(report.samples[i].lambda);
    }
    std::vector<double> variances;
    for (const auto& l : lambdas) variances.push_back(variance(l));
    medians.push_back(median(variances));
  }
  CAPTURE(medians[0]);
  CAPTURE(medians[1]);
  CAPTURE(medians[2]);
  CHECK(medians[1] < medians[0]);
  CHECK(medians[2] < medians[1]);
}

TEST_CASE("a ratio exactly at tau is not flagged") {
  const Fixture f = two_blobs(40);
  const DetectionReport first = detect(f.features, f.labels, DetectorConfig{});
  const auto it = std::max_element(first.samples.begin(), first.samples.end(),
                                   [](const SampleResult& a, const SampleResult& b) { return a.lambda < b.lambda; });
  REQUIRE(std::isfinite(it->lambda));
  DetectorConfig at_boundary;
  at_boundary.tau = it->lambda;
  const DetectionReport second = detect(f.features, f.labels, at_boundary);
  CHECK(second.samples[static_cast<std::size_t>(it->index)].lambda == it->lambda);
  CHECK_FALSE(second.samples[static_cast<std::size_t>(it->index)].flagged);
}

TEST_CASE("far-tail samples overflow and are forced flagged") {
  Rng rng(50);
  Eigen::MatrixXd z = testing::normal_matrix(rng, 60, 3);
  std::vector<int> y(60);
  for (int i = 0; i < 60; ++i) {
    y[static_cast<std::size_t>(i)] = i < 30 ? 0 : 1;
    if (i >= 30) z(i, 0) += 2000.0;
  }
  y[45] = 0;
  const DetectionReport report = detect(FeatureMatrix(z), LabelVector(y), DetectorConfig{});
  const SampleResult& s = report.samples[45];
  CHECK(s.lambda_overflow);
  CHECK(std::isinf(s.lambda));
  CHECK(s.flagged);
  CHECK(report_to_json(report).at("samples").at(45).at("lambda") == "Infinity");
}

TEST_CASE("fixed priors override label proportions") {
  const Fixture f = two_blobs(60);
  DetectorConfig config;
  config.priors = Priors{0.9, 0.1};
  const DetectionReport report = detect(f.features, f.labels, config);
  for (const SampleResult& s : report.samples) {
    CHECK(s.posterior_mislabel ==
          doctest::Approx(posterior_mislabel(s.log_mean_given, s.log_mean_alt, 0.9, 0.1)).epsilon(1e-15));
  }
}

TEST_CASE("rank-4 input is pooled before detection") {
  const Fixture f = two_blobs(70, 80, 6, 5.0, 3);
  std::vector<double> values;
  for (Eigen::Index i = 0; i < f.features.samples(); ++i)
    for (Eigen::Index c = 0; c < f.features.dim(); ++c)
      for (int k = 0; k < 4; ++k) values.push_back(f.features.data()(i, c));
  const FeatureTensor stack = FeatureMapStack(80, 6, 2, values);
  CHECK(report_to_string(detect(stack, f.labels, DetectorConfig{})) ==
        report_to_string(detect(f.features, f.labels, DetectorConfig{})));
}

TEST_CASE("detector input errors") {
  const Fixture f = two_blobs(80, 20, 4, 5.0, 0);
  auto kind = [](const auto& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::kFormat;
  };
  std::vector<int> few(20, 0);
  few[0] = 1;
  few[1] = 1;
  CHECK(kind([&] { detect(f.features, LabelVector(few), DetectorConfig{}); }) == ErrorKind::kClass);
  CHECK(kind([&] { detect(f.features, LabelVector(std::vector<int>(19, 0)), DetectorConfig{}); }) ==
        ErrorKind::kShape);
  DetectorConfig bad;
  bad.tau = 0.0;
  CHECK(kind([&] { detect(f.features, f.labels, bad); }) == ErrorKind::kShape);
  const FeatureMatrix flat(Eigen::MatrixXd::Ones(20, 4));
  std::vector<int> half(20, 0);
  std::fill(half.begin() + 10, half.end(), 1);
  CHECK(kind([&] { detect(flat, LabelVector(half), DetectorConfig{}); }) == ErrorKind::kDegenerate);
}

TEST_CASE("all members degenerate is a detection error") {
  // Each class collapses onto a single point, so every MCD subset is singular.
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(20, 3);
  std::vector<int> y(20, 0);
  for (int i = 10; i < 20; ++i) {
    z(i, 0) = 1.0;
    y[static_cast<std::size_t>(i)] = 1;
  }
  try {
    (void)detect(FeatureMatrix(z), LabelVector(y), DetectorConfig{});
    FAIL("expected detection error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDetection);
  }
}
