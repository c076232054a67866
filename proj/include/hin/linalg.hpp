#pragma once

#include <cstddef>

#include <Eigen/Dense>

namespace hin {

struct SvdResult {
  Eigen::MatrixXd u;         // m x n, orthonormal columns
  Eigen::VectorXd singular;  // descending, non-negative
  Eigen::MatrixXd v;         // n x n, orthogonal
  std::size_t sweeps = 0;
  bool converged = false;
};

/// Thin SVD a = u diag(singular) v^T by one-sided (Hestenes) Jacobi rotations.
/// Columns of u for numerically zero singular values are completed to an
/// orthonormal set. Sign convention: every column of u has a non-negative
/// largest-magnitude entry (v follows u). Requires rows >= cols.
SvdResult jacobi_svd(const Eigen::MatrixXd& a, double tolerance = 1e-12,
                     std::size_t max_sweeps = 60);

}  // namespace hin
