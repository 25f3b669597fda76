#include "aled/gaussian.hpp"

#include "aled/error.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <string>

namespace aled {

namespace {

void require_dim(const GaussianModel& model, Eigen::Index n) {
  if (n != model.dim()) {
    throw Error(ErrorKind::kShape, "point has dimension " + std::to_string(n) +
                                       ", model has " + std::to_string(model.dim()));
  }
}

}  // namespace

Eigen::MatrixXd cholesky_factor(const Eigen::Ref<const Eigen::MatrixXd>& cov) {
  if (cov.rows() != cov.cols() || cov.rows() == 0) {
    throw Error(ErrorKind::kShape, "covariance must be a non-empty square matrix");
  }
  const Eigen::MatrixXd symmetric = 0.5 * (cov + cov.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(symmetric);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::kNotPositiveDefinite, "covariance is not positive definite");
  }
  Eigen::MatrixXd lower = llt.matrixL();
  // LLT accepts tiny positive pivots that underflow the log; treat as singular.
  for (Eigen::Index i = 0; i < lower.rows(); ++i) {
    if (!(lower(i, i) > 0.0) || !std::isfinite(std::log(lower(i, i)))) {
      throw Error(ErrorKind::kNotPositiveDefinite, "covariance is numerically singular");
    }
  }
  return lower;
}

GaussianModel::GaussianModel(Eigen::VectorXd mean, Eigen::MatrixXd covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
  if (covariance_.rows() != mean_.size() || covariance_.cols() != mean_.size()) {
    throw Error(ErrorKind::kShape, "mean and covariance dimensions disagree");
  }
  covariance_ = 0.5 * (covariance_ + covariance_.transpose()).eval();
  chol_ = cholesky_factor(covariance_);
  log_det_ = 2.0 * chol_.diagonal().array().log().sum();
}

GaussianModel fit_mle(const Eigen::Ref<const Eigen::MatrixXd>& samples) {
  const Eigen::Index m = samples.rows();
  const Eigen::Index q = samples.cols();
  if (m <= q) {
    throw Error(ErrorKind::kRank, "need more samples (" + std::to_string(m) +
                                      ") than dimensions (" + std::to_string(q) + ")");
  }
  Eigen::VectorXd mean = samples.colwise().mean().transpose();
  const Eigen::MatrixXd centered = samples.rowwise() - mean.transpose();
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(m - 1);
  try {
    return GaussianModel(std::move(mean), std::move(cov));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kNotPositiveDefinite) {
      throw Error(ErrorKind::kRank, "sample covariance is degenerate");
    }
    throw;
  }
}

double mahalanobis_sq(const GaussianModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  require_dim(model, x.size());
  const Eigen::VectorXd diff = x - model.mean();
  const Eigen::VectorXd z = model.chol().triangularView<Eigen::Lower>().solve(diff);
  return z.squaredNorm();
}

Eigen::VectorXd mahalanobis_sq_rows(const GaussianModel& model,
                                    const Eigen::Ref<const Eigen::MatrixXd>& points) {
  require_dim(model, points.cols());
  const Eigen::MatrixXd diff = (points.rowwise() - model.mean().transpose()).transpose();
  const Eigen::MatrixXd z = model.chol().triangularView<Eigen::Lower>().solve(diff);
  return z.colwise().squaredNorm().transpose();
}

namespace {

double log_normalizer(const GaussianModel& model) {
  constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // ln(2*pi)
  return -0.5 * static_cast<double>(model.dim()) * kLog2Pi - 0.5 * model.log_det();
}

}  // namespace

double log_pdf(const GaussianModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return log_normalizer(model) - 0.5 * mahalanobis_sq(model, x);
}

Eigen::VectorXd log_pdf_rows(const GaussianModel& model,
                             const Eigen::Ref<const Eigen::MatrixXd>& points) {
  return (log_normalizer(model) - 0.5 * mahalanobis_sq_rows(model, points).array()).matrix();
}

}  // namespace aled
