#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "netinfer/errors.hpp"
#include "netinfer/family.hpp"
#include "netinfer/model.hpp"
#include "netinfer/network.hpp"
#include "netinfer/population.hpp"
#include "netinfer/rng.hpp"

namespace netinfer {

/**
 * Neighborhoods built from L = (N - 25) / 25 overlapping subpopulations of 50
 * consecutive units, A_l = {25(l-1), ..., 25(l+1) - 1}; N_i is the union of
 * the subpopulations containing i.
 */
inline Population make_subpopulation_neighborhoods(int n) {
  if (n < 50 || n % 25 != 0) {
    throw ValidationError("subpopulation layout needs N >= 50 and N divisible by 25, got " + std::to_string(n));
  }
  const int blocks = (n - 25) / 25;
  std::vector<std::vector<int>> nb(static_cast<std::size_t>(n));
  for (int l = 0; l < blocks; ++l) {
    const int lo = 25 * l;
    const int hi = 25 * (l + 2);
    for (int i = lo; i < hi; ++i) {
      auto& dst = nb[static_cast<std::size_t>(i)];
      for (int k = lo; k < hi; ++k) dst.push_back(k);
    }
  }
  return Population(std::move(nb));
}

struct ChainState {
  Eigen::VectorXd y;
  Network z;
};

struct GibbsConfig {
  int burn_in = 1000;
  int thin = 10;
  std::uint64_t seed = 0;
  /// Chain start; all-zero responses and the empty network when absent.
  std::optional<ChainState> initial_state;
  /// Hold the network at its initial value and update responses only.
  bool fix_network = false;
  /**
   * Pairs whose neighborhoods do not overlap are independent of every other
   * coordinate; when set they are redrawn exactly only when a draw is
   * retained instead of in every sweep. The retained draws have the same law.
   */
  bool collapse_detached = true;

  void validate() const {
    if (burn_in < 0) throw ValidationError("burn_in must be >= 0");
    if (thin < 1) throw ValidationError("thin must be >= 1");
  }
};

/**
 * @brief Systematic-scan Gibbs sampler for (Y, Z) | X = x at fixed theta.
 *
 * A sweep visits the responses 1..N, then the connection slots in
 * lexicographic order, each drawn from its full conditional.
 */
class GibbsSampler {
 public:
  GibbsSampler(const ModelSpec& spec, const Population& pop, const Eigen::MatrixXd& x, const Eigen::VectorXd& theta)
      : spec_(&spec), pop_(&pop), x_(&x), theta_(theta), n_(pop.size()) {
    check_theta(spec, theta);
    if (pop.size() != spec.n_units()) throw ValidationError("population size does not match the model");
    if (x.rows() != n_ || x.cols() < spec.required_covariates()) throw ValidationError("covariate matrix has wrong shape");
    const ModelState s{pop_, x_, nullptr, nullptr, std::log(static_cast<double>(n_))};
    unit_eta_.resize(n_);
    for (int i = 0; i < n_; ++i) {
      double e = 0.0;
      for (const auto& slot : spec.unit_terms()) e += theta_[slot.offset] * slot.term->part1(s, i);
      unit_eta_[i] = e;
    }
    collapsible_ = true;
    for (const auto& slot : spec.pair_terms()) {
      if (slot.term->touches_response()) response_terms_.push_back(slot);
      if (!slot.term->static_change()) dynamic_terms_.push_back(slot);
      if (!slot.term->overlap_gated() && (slot.term->touches_response() || !slot.term->dyad_local())) {
        collapsible_ = false;
      }
    }
    // Static part of every connection log-odds.
    static_eta_.assign(static_cast<std::size_t>(n_) * n_, 0.0);
    for (int i = 0; i < n_; ++i) {
      for (int j = 0; j < n_; ++j) {
        if (i == j) continue;
        Contributions c(theta_.data());
        const bool overlap = pop.overlaps(i, j);
        for (const auto& slot : spec.pair_terms()) {
          if (!slot.term->static_change() || (slot.term->overlap_gated() && !overlap)) continue;
          slot.term->edge_change(s, i, j, slot.offset, c);
        }
        static_eta_[static_cast<std::size_t>(i) * n_ + j] = c.dot();
      }
    }
    spillover_weight_ = 0.0;
    for (const auto& slot : spec.pair_terms()) {
      if (dynamic_cast<const terms::OutcomeSpillover*>(slot.term.get()) != nullptr) {
        spillover_weight_ += theta_[slot.offset];
      }
    }
  }

  [[nodiscard]] bool collapsible() const noexcept { return collapsible_; }
  [[nodiscard]] const ModelSpec& spec() const noexcept { return *spec_; }

  /**
   * Gaussian responses are only well defined while I - xi U is positive
   * definite, xi = gamma_yyz / psi, U = (c_ij z_ij). With a fixed network this
   * is checked exactly; otherwise |xi| rho(C) < 1 over the overlap matrix C is
   * required, which covers every network.
   */
  void check_gaussian(const Network* fixed) const {
    if (spec_->family().kind != FamilyKind::gaussian || spillover_weight_ == 0.0) return;
    const double xi = spillover_weight_ / spec_->family().psi;
    Eigen::MatrixXd U = Eigen::MatrixXd::Zero(n_, n_);
    for (const auto& [i, j] : pop_->overlap_pairs()) {
      if (fixed == nullptr || fixed->has_edge(i, j)) U(i, j) = U(j, i) = 1.0;
    }
    if (fixed != nullptr) {
      const Eigen::MatrixXd K = Eigen::MatrixXd::Identity(n_, n_) - xi * U;
      const double lo = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(K, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
      if (!(lo > 0.0)) {
        throw ValidationError("Gaussian responses: I - xi U is not positive definite (smallest eigenvalue " +
                              std::to_string(lo) + ")");
      }
      return;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(U, Eigen::EigenvaluesOnly);
    const double rho = es.eigenvalues().cwiseAbs().maxCoeff();
    if (!(std::abs(xi) * rho < 1.0)) {
      throw ValidationError("Gaussian responses: |gamma_yyz / psi| * rho(C) = " + std::to_string(std::abs(xi) * rho) +
                            " must be < 1 for the joint law to exist when the network is updated");
    }
  }

  /// One full systematic scan (responses, then every connection slot).
  void sweep(ChainState& st, CounterRng& rng, bool fix_network = false) const {
    Eigen::VectorXd ystar = st.y / spec_->family().psi;
    const ModelState s = state(st, ystar);
    sweep_responses(st, ystar, s, rng);
    if (fix_network) return;
    for (int i = 0; i < n_; ++i) {
      for (int j = spec_->directed() ? 0 : i + 1; j < n_; ++j) {
        if (i != j) visit_pair(st, s, i, j, rng);
      }
    }
  }

  /// Responses and overlapping pairs only; detached pairs are left as they are.
  void sweep_attached(ChainState& st, CounterRng& rng) const {
    Eigen::VectorXd ystar = st.y / spec_->family().psi;
    const ModelState s = state(st, ystar);
    sweep_responses(st, ystar, s, rng);
    for (int i = 0; i < n_; ++i) {
      for (int j : pop_->overlap_partners(i)) {
        if (spec_->directed() || j > i) visit_pair(st, s, i, j, rng);
      }
    }
  }

  /// Exact joint draw of all non-overlapping pairs (dyads if directed).
  void draw_detached(ChainState& st, CounterRng& rng) const {
    const Eigen::VectorXd ystar = st.y / spec_->family().psi;
    const ModelState s = state(st, ystar);
    for (int i = 0; i < n_; ++i) {
      for (int j = i + 1; j < n_; ++j) {
        if (pop_->overlaps(i, j)) continue;
        if (!spec_->directed()) {
          st.z.set_edge(i, j, rng.uniform() < logistic(connection_eta(s, i, j)));
          continue;
        }
        st.z.set_edge(i, j, false);
        st.z.set_edge(j, i, false);
        const double e_ji0 = connection_eta(s, j, i);
        const double e_ij0 = connection_eta(s, i, j);
        st.z.set_edge(j, i, true);
        const double e_ij1 = connection_eta(s, i, j);
        st.z.set_edge(j, i, false);
        // log weights of (z_ij, z_ji) = (0,0), (1,0), (0,1), (1,1)
        const double lw[4] = {0.0, e_ij0, e_ji0, e_ji0 + e_ij1};
        const double m = std::max(std::max(lw[0], lw[1]), std::max(lw[2], lw[3]));
        double w[4];
        double tot = 0.0;
        for (int k = 0; k < 4; ++k) tot += (w[k] = std::exp(lw[k] - m));
        double u = rng.uniform() * tot;
        int pick = 3;
        for (int k = 0; k < 3; ++k) {
          if (u < w[k]) {
            pick = k;
            break;
          }
          u -= w[k];
        }
        st.z.set_edge(i, j, pick == 1 || pick == 3);
        st.z.set_edge(j, i, pick == 2 || pick == 3);
      }
    }
  }

  /// Log-odds of z_ij = 1 given the rest of the state.
  [[nodiscard]] double connection_eta(const ModelState& s, int i, int j) const {
    Contributions c(theta_.data());
    const bool overlap = pop_->overlaps(i, j);
    for (const auto& slot : dynamic_terms_) {
      if (slot.term->overlap_gated() && !overlap) continue;
      slot.term->edge_change(s, i, j, slot.offset, c);
    }
    return static_eta_[static_cast<std::size_t>(i) * n_ + j] + c.dot();
  }

  /// Linear predictor of y_i given the rest of the state.
  [[nodiscard]] double response_eta(const ModelState& s, int i) const {
    Contributions c(theta_.data());
    for (const auto& slot : response_terms_) {
      if (slot.term->overlap_gated()) {
        for (int j : pop_->overlap_partners(i)) slot.term->response_coef(s, i, j, slot.offset, c);
      } else {
        for (int j = 0; j < n_; ++j) {
          if (j != i) slot.term->response_coef(s, i, j, slot.offset, c);
        }
      }
    }
    return unit_eta_[i] + c.dot();
  }

 private:
  [[nodiscard]] ModelState state(const ChainState& st, const Eigen::VectorXd& ystar) const {
    return ModelState{pop_, x_, ystar.data(), &st.z, std::log(static_cast<double>(n_))};
  }

  void sweep_responses(ChainState& st, Eigen::VectorXd& ystar, const ModelState& s, CounterRng& rng) const {
    const ResponseFamily& fam = spec_->family();
    for (int i = 0; i < n_; ++i) {
      const double eta = response_eta(s, i);
      if (!std::isfinite(eta)) throw NumericalError("non-finite linear predictor for response of unit " + std::to_string(i + 1));
      double y = 0.0;
      switch (fam.kind) {
        case FamilyKind::bernoulli: y = rng.uniform() < logistic(eta) ? 1.0 : 0.0; break;
        case FamilyKind::poisson: {
          check_poisson_eta(eta);
          std::poisson_distribution<long long> d(std::exp(eta));
          y = static_cast<double>(d(rng));
          break;
        }
        case FamilyKind::gaussian: {
          std::normal_distribution<double> d(eta, std::sqrt(fam.psi));
          y = d(rng);
          break;
        }
      }
      st.y[i] = y;
      ystar[i] = y / fam.psi;
    }
  }

  void visit_pair(ChainState& st, const ModelState& s, int i, int j, CounterRng& rng) const {
    const double eta = connection_eta(s, i, j);
    if (std::isnan(eta)) {
      throw NumericalError("non-finite log-odds for connection (" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")");
    }
    st.z.set_edge(i, j, rng.uniform() < logistic(eta));
  }

  const ModelSpec* spec_;
  const Population* pop_;
  const Eigen::MatrixXd* x_;
  Eigen::VectorXd theta_;
  int n_;
  Eigen::VectorXd unit_eta_;
  std::vector<double> static_eta_;
  std::vector<ModelSpec::PairSlot> response_terms_;
  std::vector<ModelSpec::PairSlot> dynamic_terms_;
  bool collapsible_ = true;
  double spillover_weight_ = 0.0;
};

inline ChainState empty_state(const ModelSpec& spec) {
  return ChainState{Eigen::VectorXd::Zero(spec.n_units()), Network(spec.n_units(), spec.directed())};
}

/// One systematic scan over every coordinate.
inline void gibbs_sweep(const ModelSpec& spec, const Population& pop, const Eigen::MatrixXd& x,
                        const Eigen::VectorXd& theta, ChainState& st, CounterRng& rng) {
  GibbsSampler(spec, pop, x, theta).sweep(st, rng);
}

/**
 * @brief Runs burn_in + thin * draws sweeps and returns `draws` datasets.
 *
 * Bit-reproducible for a given seed on one platform.
 */
inline std::vector<Dataset> simulate(const ModelSpec& spec, const Population& pop, const Eigen::MatrixXd& x,
                                     const Eigen::VectorXd& theta, const GibbsConfig& cfg, int draws) {
  cfg.validate();
  if (draws < 0) throw ValidationError("number of draws must be >= 0");
  const GibbsSampler sampler(spec, pop, x, theta);
  ChainState st = cfg.initial_state ? *cfg.initial_state : empty_state(spec);
  if (st.y.size() != spec.n_units() || st.z.size() != spec.n_units() || st.z.directed() != spec.directed()) {
    throw ValidationError("initial state does not match the model");
  }
  sampler.check_gaussian(cfg.fix_network ? &st.z : nullptr);
  std::vector<Dataset> out;
  if (draws == 0) return out;
  out.reserve(static_cast<std::size_t>(draws));
  CounterRng rng(cfg.seed);
  const bool collapse = cfg.collapse_detached && !cfg.fix_network && sampler.collapsible();
  auto one = [&] {
    if (collapse) {
      sampler.sweep_attached(st, rng);
    } else {
      sampler.sweep(st, rng, cfg.fix_network);
    }
  };
  for (int b = 0; b < cfg.burn_in; ++b) one();
  for (int d = 0; d < draws; ++d) {
    for (int t = 0; t < cfg.thin; ++t) one();
    if (collapse) sampler.draw_detached(st, rng);
    out.push_back(Dataset{x, st.y, st.z});
  }
  return out;
}

}  // namespace netinfer
