#include "hin/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "hin/error.hpp"

namespace hin {

namespace {

// Gram-Schmidt completion of the columns flagged in `missing`.
void complete_basis(Eigen::MatrixXd& u, std::vector<bool> missing) {
  const auto m = u.rows();
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    if (!missing[static_cast<std::size_t>(j)]) continue;
    Eigen::VectorXd best;
    double best_norm = -1.0;
    for (Eigen::Index e = 0; e < m; ++e) {
      Eigen::VectorXd cand = Eigen::VectorXd::Unit(m, e);
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index k = 0; k < u.cols(); ++k) {
          if (k == j || missing[static_cast<std::size_t>(k)]) continue;
          cand -= u.col(k).dot(cand) * u.col(k);
        }
      }
      const double norm = cand.norm();
      if (norm > best_norm + 1e-12) {
        best_norm = norm;
        best = cand;
      }
    }
    u.col(j) = best / best_norm;
    missing[static_cast<std::size_t>(j)] = false;
  }
}

}  // namespace

SvdResult jacobi_svd(const Eigen::MatrixXd& a, double tolerance, std::size_t max_sweeps) {
  if (a.rows() < a.cols())
    throw Error(ErrorKind::ShapeMismatch, "jacobi_svd needs rows >= cols");
  const auto n = a.cols();
  Eigen::MatrixXd work = a;
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);

  SvdResult result;
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double alpha = work.col(p).squaredNorm();
        const double beta = work.col(q).squaredNorm();
        const double gamma = work.col(p).dot(work.col(q));
        if (gamma == 0.0 || std::abs(gamma) <= tolerance * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (Eigen::Index i = 0; i < work.rows(); ++i) {
          const double wp = work(i, p), wq = work(i, q);
          work(i, p) = c * wp - s * wq;
          work(i, q) = s * wp + c * wq;
        }
        for (Eigen::Index i = 0; i < n; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    result.sweeps = sweep + 1;
    if (!rotated) {
      result.converged = true;
      break;
    }
  }

  Eigen::VectorXd sigma(n);
  for (Eigen::Index j = 0; j < n; ++j) sigma(j) = work.col(j).norm();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return sigma(x) > sigma(y); });

  const double largest = n > 0 ? sigma(order.front()) : 0.0;
  const double cutoff = largest * 1e-13;
  result.u.resize(a.rows(), n);
  result.v.resize(n, n);
  result.singular.resize(n);
  std::vector<bool> missing(static_cast<std::size_t>(n), false);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto j = order[static_cast<std::size_t>(k)];
    result.v.col(k) = v.col(j);
    if (sigma(j) > cutoff && sigma(j) > 0.0) {
      result.singular(k) = sigma(j);
      result.u.col(k) = work.col(j) / sigma(j);
    } else {
      result.singular(k) = 0.0;
      result.u.col(k).setZero();
      missing[static_cast<std::size_t>(k)] = true;
    }
  }
  complete_basis(result.u, missing);

  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index arg = 0;
    result.u.col(k).cwiseAbs().maxCoeff(&arg);
    if (result.u(arg, k) < 0.0) {
      result.u.col(k) *= -1.0;
      result.v.col(k) *= -1.0;
    }
  }
  return result;
}

}  // namespace hin
