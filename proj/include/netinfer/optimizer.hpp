#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "netinfer/errors.hpp"
#include "netinfer/glm.hpp"
#include "netinfer/minorizer.hpp"
#include "netinfer/model.hpp"
#include "netinfer/pseudolik.hpp"

namespace netinfer {

struct FitOptions {
  int max_iters = 1000;
  /// Converged when ||theta_t+1 - theta_t||_2 < step_tol and |dl / l| < loglik_tol.
  double step_tol = 1e-6;
  double loglik_tol = 1e-6;
  int max_halvings = 30;
  bool quasi_newton = true;
  /// Start from observed density and an independence GLM instead of theta = 0.
  bool warm_start = false;
  /// An MM step may not lower l by more than this times max(1, |l|).
  double ascent_tol = 1e-10;
  /// SR1 update skipped when |q^T k| < sr1_skip * ||q|| ||k||.
  double sr1_skip = 1e-8;
};

struct IterationRecord {
  double loglik_after_theta1 = 0.0;
  double loglik = 0.0;
  double theta1_step = 0.0;
  double theta2_step = 0.0;
  bool quasi_newton_chosen = false;
  int halvings = 0;
};

struct FitResult {
  Eigen::VectorXd theta_hat;
  int iterations = 0;
  double initial_loglik = 0.0;
  double final_loglik = 0.0;
  double final_grad_inf_norm = 0.0;
  bool converged = false;
  bool ridge_used = false;
  std::vector<IterationRecord> trace;

  /// Initial value followed by the loglik after every half-step.
  [[nodiscard]] std::vector<double> loglik_sequence() const {
    std::vector<double> s{initial_loglik};
    for (const auto& r : trace) {
      s.push_back(r.loglik_after_theta1);
      s.push_back(r.loglik);
    }
    return s;
  }
};

/**
 * @brief Symmetric rank-one correction M ~ (A*)^{-1} - A(theta)^{-1}.
 *
 * The quasi-Newton direction is ((A*)^{-1} - M) g; with M = 0 it is the MM step.
 */
class QNState {
 public:
  explicit QNState(int dim) : M_(Eigen::MatrixXd::Zero(dim, dim)) {}

  [[nodiscard]] const Eigen::MatrixXd& M() const noexcept { return M_; }
  [[nodiscard]] int updates() const noexcept { return updates_; }
  [[nodiscard]] int skipped() const noexcept { return skipped_; }

  /**
   * Inverse secant update from the step s = theta1_t - theta1_{t-1} and the
   * gradient change k = grad1(theta1_t) - grad1(theta1_{t-1}), both at the
   * current theta2. Returns false when the update was skipped.
   */
  bool update(const MinorizerMatrix& astar, const Eigen::VectorXd& s, const Eigen::VectorXd& k, double skip_tol) {
    const Eigen::VectorXd r = s + astar.apply_inverse(k);
    const Eigen::VectorXd q = r - M_ * k;
    const double c = q.dot(k);
    if (!std::isfinite(c) || std::abs(c) < skip_tol * q.norm() * k.norm() || c == 0.0) {
      ++skipped_;
      return false;
    }
    M_.noalias() += (q * q.transpose()) / c;
    ++updates_;
    return true;
  }

  [[nodiscard]] Eigen::VectorXd direction(const MinorizerMatrix& astar, const Eigen::VectorXd& grad1) const {
    return astar.apply_inverse(grad1) - M_ * grad1;
  }

 private:
  Eigen::MatrixXd M_;
  int updates_ = 0;
  int skipped_ = 0;
};

/// theta1 + (A*)^{-1} grad1: maximizer of the quadratic minorizer.
inline Eigen::VectorXd mm_step_theta1(const MinorizerMatrix& astar, const Eigen::VectorXd& theta1,
                                      const Eigen::VectorXd& grad1) {
  return theta1 + astar.apply_inverse(grad1);
}

/// SR1 candidate theta1 + ((A*)^{-1} - M) grad1.
inline Eigen::VectorXd qn_step_theta1(const QNState& state, const MinorizerMatrix& astar,
                                      const Eigen::VectorXd& theta1, const Eigen::VectorXd& grad1) {
  return theta1 + state.direction(astar, grad1);
}

struct Theta2Step {
  Eigen::VectorXd theta;
  Objective objective;  // at theta, level interest_hessian
  int halvings = 0;
  bool moved = false;
  bool ridge_used = false;
};

/**
 * @brief One Newton step on theta2 with theta1 fixed, halved until l does not decrease.
 *
 * `current` must be evaluated at `theta` with at least interest_hessian level.
 */
/// Size of accumulated rounding error in a pseudo-loglikelihood sum of this magnitude.
inline double rounding_slack(double loglik) {
  return 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(loglik));
}

inline Theta2Step newton_step_theta2(const PseudoLikelihood& pl, const Eigen::VectorXd& theta,
                                     const Objective& current, int max_halvings = 30, double slack = 0.0) {
  const int q = pl.n_nuisance();
  const int r = pl.n_params() - q;
  Theta2Step out{theta, current, 0, false, false};
  if (r == 0) return out;
  const Eigen::VectorXd g2 = current.gradient.tail(r);
  if (g2.isZero(0.0)) return out;
  const Eigen::MatrixXd& C = current.interest_hessian;
  Eigen::LLT<Eigen::MatrixXd> llt(C);
  Eigen::VectorXd dir;
  if (llt.info() == Eigen::Success) dir = llt.solve(g2);
  if (llt.info() != Eigen::Success || !dir.allFinite()) {
    out.ridge_used = true;
    dir = (C + 1e-8 * Eigen::MatrixXd::Identity(r, r)).ldlt().solve(g2);
  }
  if (!dir.allFinite()) return out;
  double t = 1.0;
  for (int h = 0; h <= max_halvings; ++h, t *= 0.5) {
    Eigen::VectorXd trial = theta;
    trial.tail(r) += t * dir;
    Objective obj;
    try {
      obj = pl.evaluate(trial, EvalLevel::interest_hessian);
    } catch (const NumericalError&) {
      continue;
    }
    if (obj.value >= current.value - slack) {
      out.theta = std::move(trial);
      out.objective = std::move(obj);
      out.halvings = h;
      out.moved = true;
      return out;
    }
  }
  out.halvings = max_halvings;
  return out;
}

/**
 * Starting point from marginal summaries: propensities from the observed
 * connection density and response weights from a GLM of y on the unit terms
 * alone; every other weight is 0.
 */
inline Eigen::VectorXd warm_start(const ModelSpec& spec, const PseudoLikelihood& pl) {
  const ConditionalDesign& d = pl.design();
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(spec.n_params());
  const int n = spec.n_units();
  double edges = 0.0;
  const double slots = static_cast<double>(d.rows() - n);
  for (std::int64_t r = n; r < d.rows(); ++r) edges += d.observed(r);
  const double dens = std::clamp(edges / slots, 0.5 / slots, 1.0 - 0.5 / slots);
  const double lo = std::log(dens / (1.0 - dens));
  switch (spec.minorizer()) {
    case MinorizerKind::undirected_propensity: theta.head(n).setConstant(0.5 * lo); break;
    case MinorizerKind::directed_propensity: theta.head(n).setConstant(lo); break;
    case MinorizerKind::none: break;
  }
  const auto& units = spec.unit_terms();
  if (units.empty()) return theta;
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(units.size()));
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    y[i] = d.observed(i);
    for (std::int64_t k = d.begin(i); k < d.end(i); ++k) {
      for (std::size_t u = 0; u < units.size(); ++u) {
        if (units[u].offset == d.index(k)) X(i, static_cast<Eigen::Index>(u)) += d.value(k);
      }
    }
  }
  const GlmFit glm = fit_glm(X, y, spec.family());
  if (glm.coef.allFinite()) {
    for (std::size_t u = 0; u < units.size(); ++u) theta[units[u].offset] = glm.coef[static_cast<Eigen::Index>(u)];
  }
  return theta;
}

/**
 * @brief Maximizes the pseudo-loglikelihood by alternating an MM (or SR1
 * quasi-Newton, whichever scores higher) step on theta1 with a damped Newton
 * step on theta2.
 */
namespace detail {

inline FitResult fit_impl(const PseudoLikelihood& pl, const MinorizerMatrix* minorizer, const Eigen::VectorXd& init,
                          const FitOptions& opt) {
  const int p = pl.n_params();
  const int q = pl.n_nuisance();
  if (init.size() != p) throw ValidationError("initial theta has wrong length");
  if (!init.allFinite()) throw ValidationError("initial theta is not finite");
  if (q > 0 && (minorizer == nullptr || minorizer->dim() != q)) {
    throw ValidationError("minorizer dimension does not match the nuisance block");
  }

  FitResult res;
  Eigen::VectorXd theta = init;
  Objective cur = pl.evaluate(theta, EvalLevel::interest_hessian);
  res.initial_loglik = cur.value;
  QNState qn(q);
  Eigen::VectorXd prev_theta1;
  bool have_prev = false;

  for (int it = 1; it <= opt.max_iters; ++it) {
    IterationRecord rec;
    const Eigen::VectorXd theta_start = theta;
    const double ll_start = cur.value;

    // Step 1: theta1.
    if (q > 0) {
      const MinorizerMatrix& astar = *minorizer;
      const Eigen::VectorXd th1 = theta.head(q);
      const Eigen::VectorXd g1 = cur.gradient.head(q);
      if (opt.quasi_newton && have_prev) {
        Eigen::VectorXd at_prev = theta;
        at_prev.head(q) = prev_theta1;
        const Eigen::VectorXd g_prev = pl.evaluate(at_prev, EvalLevel::gradient).gradient.head(q);
        qn.update(astar, th1 - prev_theta1, g1 - g_prev, opt.sr1_skip);
      }
      Eigen::VectorXd mm = theta;
      mm.head(q) = mm_step_theta1(astar, th1, g1);
      Objective mm_obj = pl.evaluate(mm, EvalLevel::interest_hessian);
      if (!std::isfinite(mm_obj.value)) {
        throw NumericalError("non-finite pseudo-loglikelihood at iteration " + std::to_string(it));
      }
      if (mm_obj.value < cur.value - opt.ascent_tol * std::max(1.0, std::abs(cur.value))) {
        throw InternalConsistencyError("MM step decreased the pseudo-loglikelihood at iteration " + std::to_string(it) +
                                       " (" + std::to_string(cur.value) + " -> " + std::to_string(mm_obj.value) + ")");
      }
      Eigen::VectorXd best = std::move(mm);
      Objective best_obj = std::move(mm_obj);
      if (opt.quasi_newton && qn.updates() > 0) {
        Eigen::VectorXd cand = theta;
        cand.head(q) = qn_step_theta1(qn, astar, th1, g1);
        if (cand.allFinite()) {
          try {
            Objective cand_obj = pl.evaluate(cand, EvalLevel::interest_hessian);
            if (cand_obj.value > best_obj.value) {
              best = std::move(cand);
              best_obj = std::move(cand_obj);
              rec.quasi_newton_chosen = true;
            }
          } catch (const NumericalError&) {
            // an overshooting SR1 candidate is simply not taken
          }
        }
      }
      prev_theta1 = th1;
      have_prev = true;
      theta = std::move(best);
      cur = std::move(best_obj);
    }
    rec.loglik_after_theta1 = cur.value;
    rec.theta1_step = (theta.head(q) - theta_start.head(q)).norm();

    // Step 2: theta2.
    const double slack = rounding_slack(cur.value);
    Theta2Step s2 = newton_step_theta2(pl, theta, cur, opt.max_halvings, slack);
    rec.halvings = s2.halvings;
    res.ridge_used = res.ridge_used || s2.ridge_used;
    if (s2.moved) {
      rec.theta2_step = (s2.theta - theta).norm();
      theta = std::move(s2.theta);
      cur = std::move(s2.objective);
    }
    rec.loglik = cur.value;
    if (!std::isfinite(cur.value)) {
      throw NumericalError("non-finite pseudo-loglikelihood at iteration " + std::to_string(it));
    }
    res.trace.push_back(rec);
    res.iterations = it;

    const double step = (theta - theta_start).norm();
    const double rel = std::abs(cur.value - ll_start) / std::max(std::abs(ll_start), std::numeric_limits<double>::min());
    if (step < opt.step_tol && rel < opt.loglik_tol) {
      res.converged = true;
      break;
    }
  }
  res.theta_hat = theta;
  res.final_loglik = cur.value;
  res.final_grad_inf_norm = cur.gradient.lpNorm<Eigen::Infinity>();
  return res;
}

}  // namespace detail

inline FitResult fit(const PseudoLikelihood& pl, const MinorizerMatrix& astar, const Eigen::VectorXd& init,
                     const FitOptions& opt = {}) {
  return detail::fit_impl(pl, &astar, init, opt);
}

/// Models without a nuisance block reduce to damped Newton on theta2.
inline FitResult fit(const PseudoLikelihood& pl, const Eigen::VectorXd& init, const FitOptions& opt = {}) {
  return detail::fit_impl(pl, nullptr, init, opt);
}

inline FitResult fit(const ModelSpec& spec, const Population& pop, const Dataset& data,
                     const Eigen::VectorXd& init, const FitOptions& opt = {}) {
  const PseudoLikelihood pl(spec, pop, data);
  const Eigen::VectorXd start =
      init.size() != 0 ? init
                       : (opt.warm_start ? warm_start(spec, pl) : Eigen::VectorXd::Zero(spec.n_params()));
  if (spec.layout().n_nuisance == 0) return fit(pl, start, opt);
  return fit(pl, MinorizerMatrix::for_model(spec), start, opt);
}

}  // namespace netinfer
