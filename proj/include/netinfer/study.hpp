#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "netinfer/errors.hpp"
#include "netinfer/inference.hpp"
#include "netinfer/model.hpp"
#include "netinfer/optimizer.hpp"
#include "netinfer/parallel.hpp"
#include "netinfer/rng.hpp"
#include "netinfer/sampler.hpp"

namespace netinfer {

/// Interaction weights (lambda, alpha_y, beta_xy, gamma_zz, gamma_xyz, gamma_yyz) of the study design.
inline Eigen::VectorXd default_study_theta2() {
  Eigen::VectorXd t(6);
  t << 0.3, -2.0, 2.0, 0.2, 0.1, 0.1;
  return t;
}

/**
 * @brief Replicated simulate-fit-infer experiment on the subpopulation layout.
 *
 * Per replication: propensities i.i.d. Normal(theta1_mean, theta1_sd^2),
 * covariates i.i.d. Uniform(covariate_lo, covariate_hi), one draw of (y, z)
 * after `burn_in` sweeps from the empty state, a fit and optionally Godambe
 * intervals. Replication (N, r) uses its own random substream.
 */
struct SimStudyConfig {
  std::vector<int> sizes{250};
  int replications = 10;
  std::uint64_t seed = 1;
  double theta1_mean = -1.4;
  double theta1_sd = 0.2;
  Eigen::VectorXd theta2 = default_study_theta2();
  double covariate_lo = 0.0;
  double covariate_hi = 1.0;
  int burn_in = 1000;
  FitOptions fit;
  bool init_at_truth = false;
  bool intervals = true;
  GodambeOptions godambe;
  double level = 0.95;
  int threads = 1;

  void validate() const {
    if (replications < 0) throw ValidationError("replications must be >= 0");
    for (int n : sizes) {
      if (n < 50 || n % 25 != 0) throw ValidationError("study sizes must be >= 50 and divisible by 25");
    }
    if (theta2.size() != 6) throw ValidationError("theta2 must have 6 entries");
    if (!(theta1_sd >= 0.0)) throw ValidationError("theta1_sd must be >= 0");
    if (!(covariate_hi >= covariate_lo)) throw ValidationError("covariate range is empty");
    if (burn_in < 0) throw ValidationError("burn_in must be >= 0");
    if (intervals && !(level > 0.0 && level < 1.0)) throw ValidationError("level must lie in (0, 1)");
    if (threads < 1) throw ValidationError("threads must be >= 1");
  }
};

struct ReplicationRecord {
  int n = 0;
  int rep = 0;
  bool ok = false;
  std::string error;
  std::vector<std::string> names;
  Eigen::VectorXd theta_star;
  Eigen::VectorXd theta_hat;
  std::vector<Interval> intervals;
  double max_abs_err = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  int iterations = 0;
  double mean_degree = 0.0;
  double seconds = 0.0;

  /// ||theta_hat - theta*||_inf over the interaction weights only.
  [[nodiscard]] double theta2_max_abs_err() const {
    const Eigen::Index r = std::min<Eigen::Index>(6, theta_hat.size());
    return (theta_hat.tail(r) - theta_star.tail(r)).cwiseAbs().maxCoeff();
  }
};

inline std::uint64_t replication_stream(int n, int rep) {
  return (static_cast<std::uint64_t>(n) << 32) | static_cast<std::uint32_t>(rep);
}

/// Random inputs of replication (N, rep): true parameters, covariates and seeds.
struct ReplicationDraw {
  Eigen::VectorXd theta_star;
  Eigen::MatrixXd x;
  std::uint64_t gibbs_seed = 0;
  std::uint64_t godambe_seed = 0;
};

inline ReplicationDraw replication_draw(const SimStudyConfig& cfg, int n, int rep) {
  CounterRng rng = CounterRng(cfg.seed).substream(replication_stream(n, rep));
  ReplicationDraw d;
  d.theta_star.resize(n + 6);
  std::normal_distribution<double> prop(cfg.theta1_mean, cfg.theta1_sd);
  for (int i = 0; i < n; ++i) d.theta_star[i] = prop(rng);
  d.theta_star.tail(6) = cfg.theta2;
  d.x.resize(n, 1);
  for (int i = 0; i < n; ++i) d.x(i, 0) = cfg.covariate_lo + (cfg.covariate_hi - cfg.covariate_lo) * rng.uniform();
  d.gibbs_seed = rng();
  d.godambe_seed = rng();
  return d;
}

/// The dataset of replication (N, rep) drawn from the empty state after cfg.burn_in sweeps.
inline Dataset replication_dataset(const SimStudyConfig& cfg, const Population& pop, const ReplicationDraw& draw) {
  const ModelSpec spec = make_undirected_example(ResponseFamily::bernoulli(), pop.size());
  GibbsConfig gc;
  gc.burn_in = cfg.burn_in;
  gc.thin = 1;
  gc.seed = draw.gibbs_seed;
  return simulate(spec, pop, draw.x, draw.theta_star, gc, 1).front();
}

inline ReplicationRecord run_replication(const SimStudyConfig& cfg, int n, int rep) {
  const auto t0 = std::chrono::steady_clock::now();
  ReplicationRecord rec;
  rec.n = n;
  rec.rep = rep;
  const ModelSpec spec = make_undirected_example(ResponseFamily::bernoulli(), n);
  rec.names = spec.layout().names;
  const ReplicationDraw draw = replication_draw(cfg, n, rep);
  rec.theta_star = draw.theta_star;
  const std::uint64_t godambe_seed = draw.godambe_seed;
  try {
    const Population pop = make_subpopulation_neighborhoods(n);
    const Dataset data = replication_dataset(cfg, pop, draw);
    rec.mean_degree = 2.0 * static_cast<double>(data.network.edge_count()) / n;
    const FitResult fr = fit(spec, pop, data, cfg.init_at_truth ? rec.theta_star : Eigen::VectorXd(), cfg.fit);
    rec.theta_hat = fr.theta_hat;
    rec.converged = fr.converged;
    rec.iterations = fr.iterations;
    rec.max_abs_err = (rec.theta_hat - rec.theta_star).cwiseAbs().maxCoeff();
    if (cfg.intervals) {
      GodambeOptions go = cfg.godambe;
      go.seed = godambe_seed;
      go.threads = 1;
      rec.intervals = confidence_intervals(godambe_cov(spec, pop, data, rec.theta_hat, go), rec.theta_hat, cfg.level);
    }
    rec.ok = true;
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error = e.what();
  }
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

/**
 * @brief Runs every (N, replication) job, skipping those for which `skip`
 * returns true, and reports each finished record through `on_record`.
 *
 * Records are returned in (size, replication) order regardless of threads.
 * A failing replication is recorded with ok = false and does not stop the run.
 */
inline std::vector<ReplicationRecord> run_simulation_study(
    const SimStudyConfig& cfg, const std::function<void(const ReplicationRecord&)>& on_record = {},
    const std::function<bool(int, int)>& skip = {}) {
  cfg.validate();
  std::vector<std::pair<int, int>> jobs;
  for (int n : cfg.sizes) {
    for (int r = 0; r < cfg.replications; ++r) {
      if (!skip || !skip(n, r)) jobs.emplace_back(n, r);
    }
  }
  std::vector<ReplicationRecord> out(jobs.size());
  std::mutex report;
  parallel_for(static_cast<int>(jobs.size()), cfg.threads, [&](int k) {
    out[static_cast<std::size_t>(k)] = run_replication(cfg, jobs[static_cast<std::size_t>(k)].first,
                                                       jobs[static_cast<std::size_t>(k)].second);
    if (on_record) {
      const std::lock_guard<std::mutex> lock(report);
      on_record(out[static_cast<std::size_t>(k)]);
    }
  });
  return out;
}

}  // namespace netinfer
