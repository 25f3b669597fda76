#pragma once

#include <Eigen/Core>

namespace aled {

/// Multivariate normal N(mean, covariance) with a cached Cholesky factor.
/// Immutable once built; all density work happens in log space.
class GaussianModel {
 public:
  /// Symmetrizes `covariance` and factors it. Throws kShape on dimension
  /// mismatch and kNotPositiveDefinite if the factorization fails.
  GaussianModel(Eigen::VectorXd mean, Eigen::MatrixXd covariance);

  Eigen::Index dim() const { return mean_.size(); }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& covariance() const { return covariance_; }
  const Eigen::MatrixXd& chol() const { return chol_; }
  double log_det() const { return log_det_; }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd chol_;
  double log_det_ = 0.0;
};

/// Lower-triangular L with L * L^T == cov. The input is symmetrized first.
/// Throws kNotPositiveDefinite when cov is not positive definite.
Eigen::MatrixXd cholesky_factor(const Eigen::Ref<const Eigen::MatrixXd>& cov);

/// Column means and unbiased (m - 1) covariance of the rows of `samples`.
/// Throws kRank if m <= q or the covariance is not positive definite.
GaussianModel fit_mle(const Eigen::Ref<const Eigen::MatrixXd>& samples);

/// (x - mu)^T Sigma^{-1} (x - mu) via a triangular solve against L.
double mahalanobis_sq(const GaussianModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Squared distances for every row of `points` in one blocked solve.
Eigen::VectorXd mahalanobis_sq_rows(const GaussianModel& model,
                                    const Eigen::Ref<const Eigen::MatrixXd>& points);

double log_pdf(const GaussianModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

Eigen::VectorXd log_pdf_rows(const GaussianModel& model,
                             const Eigen::Ref<const Eigen::MatrixXd>& points);

}  // namespace aled
