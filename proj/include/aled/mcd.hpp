#pragma once

// Minimum Covariance Determinant estimation (FastMCD: random elemental
// starts refined by concentration steps).

#include "aled/gaussian.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <vector>

namespace aled {

struct McdConfig {
  /// Fraction of samples in the h-subset; nullopt selects
  /// h = floor((m + q + 1) / 2), the maximal-breakdown choice.
  std::optional<double> support_fraction;
  int n_initial_subsets = 500;
  int n_best_carried = 10;
  int max_c_steps = 100;
  std::uint64_t seed = 0;

  /// Throws kShape on out-of-range fields.
  void validate() const;
};

struct McdFit {
  GaussianModel model;             // subset mean, consistency-corrected scatter
  std::vector<bool> support_mask;  // exactly h entries set
  double raw_determinant = 0.0;    // det of the uncorrected subset scatter
  double raw_log_determinant = 0.0;
  int support_size = 0;
};

/// h for m samples in q dimensions under `config`.
int support_size(const McdConfig& config, int m, int q);

/// Mean and scatter (divisor n) of the selected rows. The scatter gets the
/// deterministic ridge escalation (1e-8, then 1e-6, times tr/q) when it is
/// not positive definite; throws kDegenerate if that still fails.
GaussianModel subset_model(const Eigen::Ref<const Eigen::MatrixXd>& data,
                           const std::vector<int>& subset);

/// One concentration step: fit the subset, return the indices of the h
/// samples with smallest Mahalanobis distance (ascending index order).
/// Ties in distance go to the lower sample index.
std::vector<int> c_step(const Eigen::Ref<const Eigen::MatrixXd>& data,
                        const std::vector<int>& subset);

/// Scales a raw MCD scatter so it is consistent at the normal model:
/// c = (h/m) / P(chi2_{q+2} <= chi2_{q, h/m}).
double consistency_factor(int h, int m, int q);
Eigen::MatrixXd consistency_correction(const Eigen::Ref<const Eigen::MatrixXd>& raw_cov, int h,
                                       int m, int q);

/// Raw (unreweighted) FastMCD. Deterministic for a fixed config.seed and
/// equivariant under row permutations: rows are put in lexicographic order
/// before any random start is drawn.
/// Throws kShape unless m >= 2(q+1), kDegenerate if every start degenerates.
McdFit fast_mcd(const Eigen::Ref<const Eigen::MatrixXd>& data, const McdConfig& config);

}  // namespace aled
