#include "aled/projection.hpp"

#include "aled/error.hpp"
#include "aled/random.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace aled {

ClassCentroids class_centroids(const FeatureMatrix& features, const LabelVector& labels) {
  const auto& z = features.data();
  if (static_cast<std::size_t>(z.rows()) != labels.size()) {
    throw Error(ErrorKind::kShape, "feature rows and label count differ");
  }
  Eigen::VectorXd sums[2] = {Eigen::VectorXd::Zero(z.cols()), Eigen::VectorXd::Zero(z.cols())};
  std::size_t counts[2] = {0, 0};
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const int c = labels[static_cast<std::size_t>(i)];
    sums[c] += z.row(i).transpose();
    ++counts[c];
  }
  if (counts[0] == 0 || counts[1] == 0) {
    throw Error(ErrorKind::kClass, "both classes must be present");
  }
  return {sums[0] / static_cast<double>(counts[0]), sums[1] / static_cast<double>(counts[1])};
}

Eigen::MatrixXd random_basis(Eigen::Index p, Eigen::Index r, std::uint64_t seed) {
  if (p < 1 || r < 0) throw Error(ErrorKind::kShape, "random basis needs p >= 1 and r >= 0");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd rows(r, p);
  for (Eigen::Index i = 0; i < r; ++i) {
    // A zero draw has probability zero; redraw rather than divide by it.
    do {
      for (Eigen::Index j = 0; j < p; ++j) rows(i, j) = normal(rng);
    } while (rows.row(i).squaredNorm() == 0.0);
    rows.row(i) /= rows.row(i).norm();
  }
  return rows;
}

ProjectionBasis assemble_projection(const Eigen::Ref<const Eigen::VectorXd>& mu0,
                                    const Eigen::Ref<const Eigen::VectorXd>& mu1,
                                    const Eigen::Ref<const Eigen::MatrixXd>& random_rows) {
  if (mu0.size() != mu1.size() || (random_rows.rows() > 0 && random_rows.cols() != mu0.size())) {
    throw Error(ErrorKind::kShape, "centroid and random direction dimensions disagree");
  }
  if (mu0 == mu1) throw Error(ErrorKind::kDegenerate, "class centroids coincide");
  ProjectionBasis basis;
  basis.random_rows = static_cast<int>(random_rows.rows());
  basis.matrix.resize(1 + random_rows.rows(), mu0.size());
  basis.matrix.row(0) = (mu1 - mu0).transpose();
  if (random_rows.rows() > 0) basis.matrix.bottomRows(random_rows.rows()) = random_rows;
  return basis;
}

Eigen::MatrixXd project(const ProjectionBasis& basis, const Eigen::Ref<const Eigen::MatrixXd>& features) {
  if (features.cols() != basis.matrix.cols()) {
    throw Error(ErrorKind::kShape, "feature dimension does not match the projection basis");
  }
  return features * basis.matrix.transpose();
}

double hellinger_sq(const UnivariateGaussian& a, const UnivariateGaussian& b) {
  const double var_sum = a.sigma * a.sigma + b.sigma * b.sigma;
  const double diff = a.mu - b.mu;
  const double h2 = 1.0 - std::sqrt(2.0 * a.sigma * b.sigma / var_sum) *
                              std::exp(-diff * diff / (4.0 * var_sum));
  return std::clamp(h2, 0.0, 1.0);
}

double rayleigh_quotient(const Eigen::Ref<const Eigen::VectorXd>& x,
                         const Eigen::Ref<const Eigen::VectorXd>& v,
                         const Eigen::Ref<const Eigen::MatrixXd>& sigma) {
  if (x.size() != v.size() || sigma.rows() != x.size() || sigma.cols() != x.size()) {
    throw Error(ErrorKind::kShape, "Rayleigh quotient operands disagree in dimension");
  }
  if (x.isZero(0.0)) throw Error(ErrorKind::kDegenerate, "Rayleigh quotient of the zero vector");
  const double num = x.dot(v);
  return num * num / x.dot(sigma * x);
}

}  // namespace aled
