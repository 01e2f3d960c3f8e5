#pragma once

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "netinfer/errors.hpp"
#include "netinfer/model.hpp"
#include "netinfer/parallel.hpp"
#include "netinfer/pseudolik.hpp"
#include "netinfer/sampler.hpp"

namespace netinfer {

struct GodambeOptions {
  int draws = 500;
  int burn_in = 500;
  int thin = 10;
  std::uint64_t seed = 0;
  /**
   * Give every Monte Carlo dataset its own chain started at the observed
   * state with `burn_in` sweeps. Otherwise a single chain from the observed
   * state is burned in once and thinned by `thin`.
   */
  bool independent_chains = false;
  int threads = 1;
};

/// Sandwich covariance H^{-1} Var[G] H^{-1} of the pseudo-likelihood estimator.
struct CovEstimate {
  Eigen::MatrixXd sandwich;
  Eigen::VectorXd se;
  Eigen::MatrixXd neg_hessian;
  Eigen::MatrixXd gradient_cov;
  int mc_draws = 0;
  bool ridge_used = false;
};

/// Empirical covariance (divisor R - 1) of the rows of `g`.
inline Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& g) {
  if (g.rows() < 2) throw ValidationError("covariance needs at least two rows");
  const Eigen::RowVectorXd mean = g.colwise().mean();
  const Eigen::MatrixXd c = g.rowwise() - mean;
  return (c.transpose() * c) / static_cast<double>(g.rows() - 1);
}

/**
 * @brief H^{-1} V H^{-1} by two dense symmetric solves.
 *
 * A singular or indefinite H is regularized by 1e-8 * trace(H) / p on the
 * diagonal; `ridge_used` reports it.
 */
inline CovEstimate sandwich_from(const Eigen::MatrixXd& H, const Eigen::MatrixXd& V, int draws) {
  const Eigen::Index p = H.rows();
  if (H.cols() != p || V.rows() != p || V.cols() != p) throw ValidationError("sandwich blocks have mismatched sizes");
  CovEstimate out;
  out.neg_hessian = H;
  out.gradient_cov = V;
  out.mc_draws = draws;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
  const double scale = std::abs(H.trace()) / static_cast<double>(std::max<Eigen::Index>(p, 1));
  const bool pd = ldlt.info() == Eigen::Success && ldlt.isPositive() &&
                  ldlt.vectorD().minCoeff() > 1e-12 * std::max(scale, 1e-300);
  if (!pd) {
    out.ridge_used = true;
    ldlt.compute(H + 1e-8 * std::max(scale, 1.0) * Eigen::MatrixXd::Identity(p, p));
  }
  const Eigen::MatrixXd left = ldlt.solve(V);
  Eigen::MatrixXd s = ldlt.solve(left.transpose());
  s = 0.5 * (s + s.transpose());
  if (!s.allFinite()) throw NumericalError("sandwich covariance is not finite");
  out.sandwich = s;
  out.se = s.diagonal().cwiseMax(0.0).cwiseSqrt();
  return out;
}

/**
 * @brief Godambe covariance at theta_hat.
 *
 * H is the negative Hessian of the pseudo-loglikelihood on the observed data;
 * Var[G] is the covariance of its gradient at theta_hat over datasets drawn
 * from the fitted model with the covariates held at their observed values.
 */
inline CovEstimate godambe_cov(const ModelSpec& spec, const Population& pop, const Dataset& data,
                               const Eigen::VectorXd& theta_hat, const GodambeOptions& opt = {}) {
  check_theta(spec, theta_hat);
  if (opt.draws < 2) throw ValidationError("Godambe covariance needs at least 2 Monte Carlo draws");
  if (opt.burn_in < 0 || opt.thin < 1) throw ValidationError("invalid burn-in or thinning");
  const PseudoLikelihood observed(spec, pop, data);
  const Eigen::MatrixXd H = observed.neg_hessian(theta_hat);
  const int p = spec.n_params();
  const ChainState start{data.responses, data.network};

  Eigen::MatrixXd grads(opt.draws, p);
  auto gradient_of = [&](const Dataset& d) -> Eigen::VectorXd {
    return PseudoLikelihood(spec, pop, d).gradient(theta_hat);
  };
  if (opt.independent_chains) {
    const CounterRng base(opt.seed);
    parallel_for(opt.draws, opt.threads, [&](int r) {
      GibbsConfig cfg;
      cfg.burn_in = opt.burn_in;
      cfg.thin = 1;
      cfg.seed = base.substream(static_cast<std::uint64_t>(r))();
      cfg.initial_state = start;
      const Dataset d = simulate(spec, pop, data.covariates, theta_hat, cfg, 1).front();
      grads.row(r) = gradient_of(d).transpose();
    });
  } else {
    GibbsConfig cfg;
    cfg.burn_in = opt.burn_in;
    cfg.thin = opt.thin;
    cfg.seed = opt.seed;
    cfg.initial_state = start;
    const std::vector<Dataset> sims = simulate(spec, pop, data.covariates, theta_hat, cfg, opt.draws);
    parallel_for(opt.draws, opt.threads,
                 [&](int r) { grads.row(r) = gradient_of(sims[static_cast<std::size_t>(r)]).transpose(); });
  }
  if (!grads.allFinite()) throw NumericalError("non-finite gradient on a simulated dataset");
  return sandwich_from(H, sample_covariance(grads), opt.draws);
}

/// Inverse negative Hessian; ignores the dependence between conditionals, diagnostics only.
inline Eigen::MatrixXd naive_covariance(const Eigen::MatrixXd& neg_hessian) {
  const Eigen::MatrixXd inv = neg_hessian.ldlt().solve(Eigen::MatrixXd::Identity(neg_hessian.rows(), neg_hessian.cols()));
  if (!inv.allFinite()) throw NumericalError("negative Hessian is singular");
  return 0.5 * (inv + inv.transpose());
}

/// Two-sided standard normal quantile z with P(|Z| <= z) = level.
inline double normal_critical_value(double level) {
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("confidence level must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal(), 0.5 * (1.0 + level));
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  [[nodiscard]] bool contains(double v) const noexcept { return lo <= v && v <= hi; }
};

/// theta_hat_k +- z se_k for every component.
inline std::vector<Interval> confidence_intervals(const Eigen::VectorXd& se, const Eigen::VectorXd& theta_hat,
                                                  double level) {
  if (se.size() != theta_hat.size()) throw ValidationError("standard errors and estimates differ in length");
  const double z = normal_critical_value(level);
  std::vector<Interval> out(static_cast<std::size_t>(theta_hat.size()));
  for (Eigen::Index k = 0; k < theta_hat.size(); ++k) {
    out[static_cast<std::size_t>(k)] = {theta_hat[k] - z * se[k], theta_hat[k] + z * se[k]};
  }
  return out;
}

inline std::vector<Interval> confidence_intervals(const CovEstimate& cov, const Eigen::VectorXd& theta_hat,
                                                  double level) {
  return confidence_intervals(cov.se, theta_hat, level);
}

}  // namespace netinfer
