#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "netinfer/errors.hpp"
#include "netinfer/family.hpp"

namespace netinfer {

struct GlmFit {
  Eigen::VectorXd coef;
  Eigen::MatrixXd information;  // X^T W X / psi at the estimate
  int iterations = 0;
  bool converged = false;
};

/// Log-likelihood of a canonical-link GLM with design X.
inline double glm_loglik(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ResponseFamily& fam,
                         const Eigen::VectorXd& coef) {
  const Eigen::VectorXd eta = X * coef;
  double s = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) s += log_density(fam, y[i], eta[i]);
  return s;
}

/**
 * @brief Maximum likelihood for a canonical-link GLM by damped Newton
 * (iteratively reweighted least squares with step halving).
 */
inline GlmFit fit_glm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ResponseFamily& fam,
                      int max_iters = 100, double tol = 1e-10) {
  if (X.rows() != y.size()) throw ValidationError("design and response lengths differ");
  GlmFit out;
  out.coef = Eigen::VectorXd::Zero(X.cols());
  double ll = glm_loglik(X, y, fam, out.coef);
  for (int it = 0; it < max_iters; ++it) {
    const Eigen::VectorXd eta = X * out.coef;
    Eigen::VectorXd resid(y.size());
    Eigen::VectorXd w(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      resid[i] = (y[i] - mean(fam, eta[i])) / fam.psi;
      w[i] = cumulant_curvature(fam, eta[i]) / fam.psi;
    }
    const Eigen::VectorXd score = X.transpose() * resid;
    const Eigen::MatrixXd info = X.transpose() * w.asDiagonal() * X;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    Eigen::VectorXd step = ldlt.solve(score);
    if (ldlt.info() != Eigen::Success || !step.allFinite()) {
      const double ridge = 1e-8 * std::max(1.0, info.trace() / static_cast<double>(info.rows()));
      step = (info + ridge * Eigen::MatrixXd::Identity(info.rows(), info.cols())).ldlt().solve(score);
    }
    out.iterations = it + 1;
    if (step.norm() < tol) {
      out.coef += step;
      out.converged = true;
      break;
    }
    double t = 1.0;
    bool improved = false;
    for (int h = 0; h < 30; ++h, t *= 0.5) {
      const Eigen::VectorXd next = out.coef + t * step;
      const double next_ll = glm_loglik(X, y, fam, next);
      if (std::isfinite(next_ll) && next_ll >= ll) {
        out.coef = next;
        ll = next_ll;
        improved = true;
        break;
      }
    }
    if (!improved) {
      out.converged = step.norm() < 1e-6;
      break;
    }
  }
  const Eigen::VectorXd eta = X * out.coef;
  Eigen::VectorXd w(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) w[i] = cumulant_curvature(fam, eta[i]) / fam.psi;
  out.information = X.transpose() * w.asDiagonal() * X;
  return out;
}

}  // namespace netinfer
