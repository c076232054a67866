#pragma once

#include <algorithm>
#include <cmath>

#include "hin/infomax.hpp"

namespace oracle {

/// Largest |analytic - numeric| / max(|analytic|, |numeric|, floor) over all
/// parameters, numeric by central differences with step h.
inline double max_gradient_error(const Eigen::MatrixXd& x, const hin::SparsePattern& a,
                                 const hin::CorruptedGraph& negative, const hin::WorkerParams& params,
                                 double h = 1e-5, double floor = 1e-6) {
  const auto analytic = hin::dgi_loss_and_gradient(x, a, negative, params).gradient.flatten();
  const Eigen::VectorXd theta = params.flatten();
  hin::WorkerParams probe = params;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd t = theta;
    t(i) = theta(i) + h;
    probe.assign(t);
    const double up = hin::dgi_objective(x, a, negative, probe);
    t(i) = theta(i) - h;
    probe.assign(t);
    const double down = hin::dgi_objective(x, a, negative, probe);
    const double numeric = (up - down) / (2.0 * h);
    const double scale = std::max({std::abs(analytic(i)), std::abs(numeric), floor});
    worst = std::max(worst, std::abs(analytic(i) - numeric) / scale);
  }
  return worst;
}

}  // namespace oracle
