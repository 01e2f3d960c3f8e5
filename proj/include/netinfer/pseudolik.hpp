#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "netinfer/errors.hpp"
#include "netinfer/family.hpp"
#include "netinfer/model.hpp"

namespace netinfer {

/**
 * @brief Every full conditional of a dataset as a GLM row.
 *
 * Row r has a sparse design vector u_r (eta_r = theta . u_r), an observed
 * value and a family. Rows 0..N-1 are the responses, the remaining rows the
 * connection slots (i < j if undirected, ordered pairs otherwise) in
 * lexicographic order. The design does not depend on theta, so it is built
 * once per dataset.
 */
class ConditionalDesign {
 public:
  ConditionalDesign(const ModelSpec& spec, const Population& pop, const Dataset& data)
      : family_(spec.family()), n_units_(pop.size()), n_params_(spec.n_params()),
        n_nuisance_(spec.layout().n_nuisance) {
    validate_dataset(spec, pop, data);
    const Eigen::VectorXd ystar = scaled_responses(spec, data.responses);
    const ModelState s = make_state(pop, data, ystar);
    const int n = n_units_;
    const std::size_t slots = spec.directed() ? static_cast<std::size_t>(n) * (n - 1)
                                              : static_cast<std::size_t>(n) * (n - 1) / 2;
    start_.reserve(static_cast<std::size_t>(n) + slots + 1);
    observed_.reserve(static_cast<std::size_t>(n) + slots);
    pairs_.reserve(slots);
    start_.push_back(0);
    Contributions c;
    for (int i = 0; i < n; ++i) {
      c.clear();
      response_design(spec, s, i, c);
      push_row(c, data.responses[i]);
    }
    for (int i = 0; i < n; ++i) {
      for (int j = spec.directed() ? 0 : i + 1; j < n; ++j) {
        if (i == j) continue;
        c.clear();
        connection_design(spec, s, i, j, c);
        push_row(c, data.network.has_edge(i, j) ? 1.0 : 0.0);
        pairs_.emplace_back(i, j);
      }
    }
  }

  [[nodiscard]] std::int64_t rows() const noexcept { return static_cast<std::int64_t>(observed_.size()); }
  [[nodiscard]] int n_units() const noexcept { return n_units_; }
  [[nodiscard]] int n_params() const noexcept { return n_params_; }
  [[nodiscard]] int n_nuisance() const noexcept { return n_nuisance_; }
  [[nodiscard]] const ResponseFamily& response_family() const noexcept { return family_; }

  [[nodiscard]] bool is_response(std::int64_t r) const noexcept { return r < n_units_; }
  [[nodiscard]] double observed(std::int64_t r) const noexcept { return observed_[static_cast<std::size_t>(r)]; }
  [[nodiscard]] std::pair<int, int> pair_of(std::int64_t r) const { return pairs_[static_cast<std::size_t>(r - n_units_)]; }

  [[nodiscard]] std::int64_t begin(std::int64_t r) const noexcept { return start_[static_cast<std::size_t>(r)]; }
  [[nodiscard]] std::int64_t end(std::int64_t r) const noexcept { return start_[static_cast<std::size_t>(r) + 1]; }
  [[nodiscard]] int index(std::int64_t k) const noexcept { return index_[static_cast<std::size_t>(k)]; }
  [[nodiscard]] double value(std::int64_t k) const noexcept { return value_[static_cast<std::size_t>(k)]; }

  [[nodiscard]] double eta(std::int64_t r, const double* theta) const noexcept {
    double e = 0.0;
    for (std::int64_t k = begin(r); k < end(r); ++k) e += theta[index(k)] * value(k);
    return e;
  }

  /// Human-readable name of row r, for diagnostics.
  [[nodiscard]] std::string describe(std::int64_t r) const {
    if (is_response(r)) return "response of unit " + std::to_string(r + 1);
    auto [i, j] = pair_of(r);
    return "connection (" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")";
  }

 private:
  void push_row(const Contributions& c, double observed) {
    for (const auto& e : c.entries()) {
      index_.push_back(e.index);
      value_.push_back(e.value);
    }
    start_.push_back(static_cast<std::int64_t>(index_.size()));
    observed_.push_back(observed);
  }

  ResponseFamily family_;
  int n_units_;
  int n_params_;
  int n_nuisance_;
  std::vector<std::int64_t> start_;
  std::vector<int> index_;
  std::vector<double> value_;
  std::vector<double> observed_;
  std::vector<std::pair<int, int>> pairs_;
};

enum class EvalLevel { value, gradient, interest_hessian, full_hessian };

/// Negative Hessian partitioned as [[A, B], [B^T, C]] with A over theta1.
struct HessianBlocks {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd C;

  [[nodiscard]] Eigen::MatrixXd assemble() const {
    const auto q = A.rows();
    const auto r = C.rows();
    Eigen::MatrixXd H(q + r, q + r);
    H.topLeftCorner(q, q) = A;
    H.topRightCorner(q, r) = B;
    H.bottomLeftCorner(r, q) = B.transpose();
    H.bottomRightCorner(r, r) = C;
    return H;
  }
};

/// Pseudo-loglikelihood with whatever derivatives the requested level asks for.
struct Objective {
  double value = 0.0;
  Eigen::VectorXd gradient;      // level >= gradient
  Eigen::MatrixXd interest_hessian;  // C block; level >= interest_hessian
  Eigen::MatrixXd neg_hessian;   // full; level == full_hessian

  [[nodiscard]] HessianBlocks blocks(int n_nuisance) const {
    const auto q = n_nuisance;
    const auto r = neg_hessian.rows() - q;
    return {neg_hessian.topLeftCorner(q, q), neg_hessian.topRightCorner(q, r), neg_hessian.bottomRightCorner(r, r)};
  }
};

/**
 * @brief Pseudo-loglikelihood sum_i log f(y_i | rest) + sum_pairs log f(z_ij | rest).
 *
 * Evaluation is sequential in row order, so values are bit-reproducible.
 */
class PseudoLikelihood {
 public:
  PseudoLikelihood(const ModelSpec& spec, const Population& pop, const Dataset& data)
      : design_(spec, pop, data) {}
  explicit PseudoLikelihood(ConditionalDesign design) : design_(std::move(design)) {}

  [[nodiscard]] const ConditionalDesign& design() const noexcept { return design_; }
  [[nodiscard]] int n_params() const noexcept { return design_.n_params(); }
  [[nodiscard]] int n_nuisance() const noexcept { return design_.n_nuisance(); }

  [[nodiscard]] Objective evaluate(const Eigen::VectorXd& theta, EvalLevel level) const {
    const int p = n_params();
    if (theta.size() != p) {
      throw ValidationError("theta has " + std::to_string(theta.size()) + " entries, model has " + std::to_string(p));
    }
    const int q = n_nuisance();
    const int r_dim = p - q;
    const bool want_grad = level != EvalLevel::value;
    const bool want_c = level == EvalLevel::interest_hessian || level == EvalLevel::full_hessian;
    const bool want_full = level == EvalLevel::full_hessian;

    Objective out;
    if (want_grad) out.gradient = Eigen::VectorXd::Zero(p);
    if (want_c) out.interest_hessian = Eigen::MatrixXd::Zero(r_dim, r_dim);
    if (want_full) out.neg_hessian = Eigen::MatrixXd::Zero(p, p);

    const ResponseFamily& yfam = design_.response_family();
    const double* th = theta.data();
    double total = 0.0;
    const std::int64_t rows = design_.rows();
    for (std::int64_t r = 0; r < rows; ++r) {
      const double eta = design_.eta(r, th);
      if (!std::isfinite(eta)) throw NumericalError("non-finite linear predictor for " + design_.describe(r));
      const double obs = design_.observed(r);
      double resid = 0.0;
      double weight = 0.0;
      if (design_.is_response(r)) {
        if (yfam.kind == FamilyKind::poisson && eta > kPoissonEtaCap) {
          throw NumericalError("Poisson linear predictor " + std::to_string(eta) + " exceeds cap for " + design_.describe(r));
        }
        total += log_density(yfam, obs, eta);
        if (want_grad) resid = (obs - mean(yfam, eta)) / yfam.psi;
        if (want_c) weight = cumulant_curvature(yfam, eta) / yfam.psi;
      } else {
        total += obs * eta - log1p_exp(eta);
        if (want_grad) {
          const double pr = logistic(eta);
          resid = obs - pr;
          weight = pr * (1.0 - pr);
        }
      }
      if (!want_grad) continue;
      const std::int64_t b = design_.begin(r);
      const std::int64_t e = design_.end(r);
      for (std::int64_t k = b; k < e; ++k) out.gradient[design_.index(k)] += resid * design_.value(k);
      if (!want_c || weight == 0.0) continue;
      for (std::int64_t k = b; k < e; ++k) {
        const int ik = design_.index(k);
        const double wk = weight * design_.value(k);
        for (std::int64_t l = b; l < e; ++l) {
          const int il = design_.index(l);
          if (want_full) out.neg_hessian(ik, il) += wk * design_.value(l);
          if (ik >= q && il >= q) out.interest_hessian(ik - q, il - q) += wk * design_.value(l);
        }
      }
    }
    if (!std::isfinite(total)) throw NumericalError("pseudo-loglikelihood is not finite");
    out.value = total;
    return out;
  }

  [[nodiscard]] double value(const Eigen::VectorXd& theta) const { return evaluate(theta, EvalLevel::value).value; }
  [[nodiscard]] Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const {
    return evaluate(theta, EvalLevel::gradient).gradient;
  }
  [[nodiscard]] Eigen::MatrixXd neg_hessian(const Eigen::VectorXd& theta) const {
    return evaluate(theta, EvalLevel::full_hessian).neg_hessian;
  }
  [[nodiscard]] HessianBlocks neg_hessian_blocks(const Eigen::VectorXd& theta) const {
    return evaluate(theta, EvalLevel::full_hessian).blocks(n_nuisance());
  }

 private:
  ConditionalDesign design_;
};

inline double pseudo_loglik(const ModelSpec& spec, const Population& pop, const Dataset& data,
                            const Eigen::VectorXd& theta) {
  return PseudoLikelihood(spec, pop, data).value(theta);
}

inline Eigen::VectorXd gradient(const ModelSpec& spec, const Population& pop, const Dataset& data,
                                const Eigen::VectorXd& theta) {
  return PseudoLikelihood(spec, pop, data).gradient(theta);
}

inline HessianBlocks neg_hessian_blocks(const ModelSpec& spec, const Population& pop, const Dataset& data,
                                        const Eigen::VectorXd& theta) {
  return PseudoLikelihood(spec, pop, data).neg_hessian_blocks(theta);
}

}  // namespace netinfer
