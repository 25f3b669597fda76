#pragma once

// Reduced feature space: class centroids, the mean-difference direction,
// random directions, and the linear map they define. Also the univariate
// Hellinger distance and Rayleigh quotient used to justify that direction.

#include "aled/tensor_io.hpp"

#include <Eigen/Core>

#include <cstdint>

namespace aled {

/// (1 + r) x p. Row 0 is mu1 - mu0 verbatim (not normalized); rows 1..r are
/// unit-norm random directions.
struct ProjectionBasis {
  Eigen::MatrixXd matrix;
  int random_rows = 0;

  Eigen::Index output_dim() const { return matrix.rows(); }
};

struct ClassCentroids {
  Eigen::VectorXd mu0;
  Eigen::VectorXd mu1;
};

struct UnivariateGaussian {
  double mu = 0.0;
  double sigma = 1.0;
};

/// Row means per label. Throws kShape on a length mismatch, kClass if a
/// class has no rows.
ClassCentroids class_centroids(const FeatureMatrix& features, const LabelVector& labels);

/// r x p rows of i.i.d. standard normals, each scaled to unit length. Not
/// orthogonalized. Identical for identical (p, r, seed).
Eigen::MatrixXd random_basis(Eigen::Index p, Eigen::Index r, std::uint64_t seed);

/// Stacks (mu1 - mu0)^T over `random_rows`. Throws kDegenerate when
/// mu1 == mu0 exactly, kShape when dimensions disagree.
ProjectionBasis assemble_projection(const Eigen::Ref<const Eigen::VectorXd>& mu0,
                                    const Eigen::Ref<const Eigen::VectorXd>& mu1,
                                    const Eigen::Ref<const Eigen::MatrixXd>& random_rows);

/// Row i of the result is basis.matrix * z_i.
Eigen::MatrixXd project(const ProjectionBasis& basis, const Eigen::Ref<const Eigen::MatrixXd>& features);

/// Squared Hellinger distance between two univariate normals, in [0, 1].
double hellinger_sq(const UnivariateGaussian& a, const UnivariateGaussian& b);

/// (x^T v)^2 / (x^T Sigma x). Throws kDegenerate for x == 0.
double rayleigh_quotient(const Eigen::Ref<const Eigen::VectorXd>& x,
                         const Eigen::Ref<const Eigen::VectorXd>& v,
                         const Eigen::Ref<const Eigen::MatrixXd>& sigma);

}  // namespace aled
