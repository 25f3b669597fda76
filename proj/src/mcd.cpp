#include "aled/mcd.hpp"

#include "aled/error.hpp"
#include "aled/random.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>

namespace aled {

namespace {

constexpr int kMaxStartRetries = 5;
constexpr int kInitialCSteps = 2;
constexpr double kRidgeSteps[] = {1e-8, 1e-6};

struct Moments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd scatter;
};

Moments subset_moments(const Eigen::Ref<const Eigen::MatrixXd>& data,
                       const std::vector<int>& subset) {
  const auto q = data.cols();
  const auto n = static_cast<double>(subset.size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(q);
  for (int i : subset) mean += data.row(i).transpose();
  mean /= n;
  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(q, q);
  for (int i : subset) {
    const Eigen::VectorXd d = data.row(i).transpose() - mean;
    scatter.selfadjointView<Eigen::Lower>().rankUpdate(d);
  }
  scatter = scatter.selfadjointView<Eigen::Lower>();
  scatter /= n;
  return {std::move(mean), std::move(scatter)};
}

// Indices of the h smallest entries, ties to the lower index, returned sorted.
std::vector<int> smallest_h(const Eigen::VectorXd& distances, int h) {
  std::vector<int> order(static_cast<std::size_t>(distances.size()));
  std::iota(order.begin(), order.end(), 0);
  auto less = [&](int a, int b) {
    return distances(a) < distances(b) || (distances(a) == distances(b) && a < b);
  };
  std::nth_element(order.begin(), order.begin() + (h - 1), order.end(), less);
  order.resize(static_cast<std::size_t>(h));
  std::sort(order.begin(), order.end());
  return order;
}

struct Candidate {
  std::vector<int> subset;
  double log_det = std::numeric_limits<double>::infinity();
  int start = 0;
  bool valid = false;
};

bool better(const Candidate& a, const Candidate& b) {
  if (a.valid != b.valid) return a.valid;
  return a.log_det < b.log_det || (a.log_det == b.log_det && a.start < b.start);
}

// Concentrates `candidate` until its subset stops changing or `budget` steps run out.
void concentrate(const Eigen::Ref<const Eigen::MatrixXd>& data, Candidate& candidate, int budget) {
  for (int step = 0; step < budget; ++step) {
    std::vector<int> next = c_step(data, candidate.subset);
    if (next == candidate.subset) break;
    candidate.subset = std::move(next);
  }
  candidate.log_det = subset_model(data, candidate.subset).log_det();
}

}  // namespace

void McdConfig::validate() const {
  if (support_fraction && !(*support_fraction > 0.5 && *support_fraction <= 1.0)) {
    throw Error(ErrorKind::kShape, "support_fraction must lie in (0.5, 1]");
  }
  if (n_initial_subsets < 1 || n_best_carried < 1 || max_c_steps < 1) {
    throw Error(ErrorKind::kShape, "MCD schedule counts must be positive");
  }
  if (n_best_carried > n_initial_subsets) {
    throw Error(ErrorKind::kShape, "n_best_carried cannot exceed n_initial_subsets");
  }
}

int support_size(const McdConfig& config, int m, int q) {
  int h = config.support_fraction
              ? static_cast<int>(std::floor(*config.support_fraction * m))
              : (m + q + 1) / 2;
  return std::clamp(h, std::min(q + 1, m), m);
}

GaussianModel subset_model(const Eigen::Ref<const Eigen::MatrixXd>& data,
                           const std::vector<int>& subset) {
  Moments moments = subset_moments(data, subset);
  try {
    return GaussianModel(moments.mean, moments.scatter);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kNotPositiveDefinite) throw;
  }
  const auto q = static_cast<double>(data.cols());
  const double scale = moments.scatter.trace() / q;
  for (double eps : kRidgeSteps) {
    Eigen::MatrixXd ridged = moments.scatter;
    ridged.diagonal().array() += eps * scale;
    try {
      return GaussianModel(moments.mean, std::move(ridged));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kNotPositiveDefinite) throw;
    }
  }
  throw Error(ErrorKind::kDegenerate, "subset scatter is singular after regularization");
}

std::vector<int> c_step(const Eigen::Ref<const Eigen::MatrixXd>& data,
                        const std::vector<int>& subset) {
  const auto h = static_cast<int>(subset.size());
  if (h <= data.cols() || h > data.rows()) {
    throw Error(ErrorKind::kShape, "C-step subset size must satisfy q < h <= m");
  }
  const GaussianModel model = subset_model(data, subset);
  return smallest_h(mahalanobis_sq_rows(model, data), h);
}

double consistency_factor(int h, int m, int q) {
  if (h <= 0 || h > m) throw Error(ErrorKind::kShape, "consistency factor needs 0 < h <= m");
  if (h == m) return 1.0;
  const double alpha = static_cast<double>(h) / m;
  const boost::math::chi_squared_distribution<double> chi_q(q);
  const boost::math::chi_squared_distribution<double> chi_q2(q + 2);
  const double cutoff = boost::math::quantile(chi_q, alpha);
  return alpha / boost::math::cdf(chi_q2, cutoff);
}

Eigen::MatrixXd consistency_correction(const Eigen::Ref<const Eigen::MatrixXd>& raw_cov, int h,
                                       int m, int q) {
  return consistency_factor(h, m, q) * raw_cov;
}

McdFit fast_mcd(const Eigen::Ref<const Eigen::MatrixXd>& input, const McdConfig& config) {
  config.validate();
  const auto m = static_cast<int>(input.rows());
  const auto q = static_cast<int>(input.cols());
  if (q < 1 || m < 2 * (q + 1)) {
    throw Error(ErrorKind::kShape, "MCD needs q >= 1 and m >= 2(q+1); got m=" + std::to_string(m) +
                                       ", q=" + std::to_string(q));
  }
  const int h = support_size(config, m, q);

  // Work on rows in lexicographic order so the random starts, and hence the
  // fit, do not depend on how the caller ordered the samples.
  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    for (int j = 0; j < q; ++j) {
      if (input(a, j) != input(b, j)) return input(a, j) < input(b, j);
    }
    return false;
  });
  Eigen::MatrixXd data(m, q);
  for (int i = 0; i < m; ++i) data.row(i) = input.row(order[static_cast<std::size_t>(i)]);

  Candidate best;
  if (h == m) {
    best.subset.resize(static_cast<std::size_t>(m));
    std::iota(best.subset.begin(), best.subset.end(), 0);
    best.valid = true;
  } else {
    // All randomness is drawn up front, in start order, from one root generator.
    const int prefix_len = std::min(m, q + 1 + kMaxStartRetries);
    std::vector<std::vector<int>> prefixes(static_cast<std::size_t>(config.n_initial_subsets));
    Rng rng(config.seed);
    std::vector<int> pool(static_cast<std::size_t>(m));
    for (auto& prefix : prefixes) {
      std::iota(pool.begin(), pool.end(), 0);
      for (int i = 0; i < prefix_len; ++i) {
        std::uniform_int_distribution<int> pick(i, m - 1);
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
      }
      prefix.assign(pool.begin(), pool.begin() + prefix_len);
    }

    std::vector<Candidate> candidates(prefixes.size());
    for (std::size_t s = 0; s < prefixes.size(); ++s) {
      Candidate& candidate = candidates[s];
      candidate.start = static_cast<int>(s);
      const auto& prefix = prefixes[s];
      for (int size = q + 1; size <= prefix_len && !candidate.valid; ++size) {
        std::vector<int> elemental(prefix.begin(), prefix.begin() + size);
        Moments moments = subset_moments(data, elemental);
        try {
          const GaussianModel start_model(moments.mean, moments.scatter);
          candidate.subset = smallest_h(mahalanobis_sq_rows(start_model, data), h);
          candidate.valid = true;
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::kNotPositiveDefinite) throw;
        }
      }
      if (!candidate.valid) continue;
      try {
        concentrate(data, candidate, kInitialCSteps);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kDegenerate) throw;
        candidate.valid = false;
      }
    }

    std::sort(candidates.begin(), candidates.end(), better);
    const auto carried = std::min<std::size_t>(static_cast<std::size_t>(config.n_best_carried),
                                               candidates.size());
    for (std::size_t c = 0; c < carried && candidates[c].valid; ++c) {
      try {
        concentrate(data, candidates[c], config.max_c_steps);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kDegenerate) throw;
        candidates[c].valid = false;
      }
      if (better(candidates[c], best)) best = candidates[c];
    }
  }

  if (!best.valid) throw Error(ErrorKind::kDegenerate, "every MCD start produced a singular subset");

  const GaussianModel raw = subset_model(data, best.subset);
  std::vector<bool> mask(static_cast<std::size_t>(m), false);
  for (int i : best.subset) mask[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;
  return McdFit{
      GaussianModel(raw.mean(), consistency_correction(raw.covariance(), h, m, q)),
      std::move(mask),
      std::exp(raw.log_det()),
      raw.log_det(),
      h,
  };
}

}  // namespace aled
