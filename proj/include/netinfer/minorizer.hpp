#pragma once

#include <Eigen/Dense>

#include <string>

#include "netinfer/errors.hpp"
#include "netinfer/model.hpp"

namespace netinfer {

/**
 * @brief Fixed curvature bound A* >= A(theta) for the propensity block.
 *
 * Undirected: A* = [(N-2) I + 1 1^T] / 4 over the N propensities.
 * Directed:   A* = [[(N-1) I_N, K], [K^T, (N-1) I_{N-1}]] / 4 over the N
 *             sender and N-1 receiver propensities, with K = 1 1^T - E and
 *             E_ij = 1{i = j}.
 * Both are applied and inverted in O(N) without forming a dense matrix.
 */
class MinorizerMatrix {
 public:
  enum class Mode { undirected, directed };

  MinorizerMatrix(Mode mode, int n) : mode_(mode), n_(n) {
    if (n < 3) throw ValidationError("minorizer matrix needs N >= 3, got " + std::to_string(n));
  }

  static MinorizerMatrix for_model(const ModelSpec& spec) {
    switch (spec.minorizer()) {
      case MinorizerKind::undirected_propensity: return {Mode::undirected, spec.n_units()};
      case MinorizerKind::directed_propensity: return {Mode::directed, spec.n_units()};
      case MinorizerKind::none: break;
    }
    throw ValidationError("model " + spec.id() + " has no closed-form minorizer for its nuisance block");
  }

  [[nodiscard]] Mode mode() const noexcept { return mode_; }
  [[nodiscard]] int n() const noexcept { return n_; }
  [[nodiscard]] int dim() const noexcept { return mode_ == Mode::undirected ? n_ : 2 * n_ - 1; }

  /// A* v.
  [[nodiscard]] Eigen::VectorXd apply(const Eigen::VectorXd& v) const {
    check(v);
    const double n = n_;
    if (mode_ == Mode::undirected) return 0.25 * ((n - 2.0) * v.array() + v.sum()).matrix();
    const auto f = v.head(n_);
    const auto g = v.tail(n_ - 1);
    Eigen::VectorXd out(dim());
    const double sf = f.sum();
    const double sg = g.sum();
    // (K g)_i = sum(g) - g_i for i < N-1, sum(g) for the last sender.
    out.head(n_) = ((n - 1.0) * f).array() + sg;
    out.head(n_ - 1) -= g;
    // (K^T f)_j = sum(f) - f_j.
    out.tail(n_ - 1) = ((n - 1.0) * g.array() + sf) - f.head(n_ - 1).array();
    return 0.25 * out;
  }

  /// (A*)^{-1} v in O(N).
  [[nodiscard]] Eigen::VectorXd apply_inverse(const Eigen::VectorXd& v) const {
    check(v);
    const double n = n_;
    if (mode_ == Mode::undirected) {
      return (4.0 / (n - 2.0)) * (v.array() - v.sum() / (2.0 * n - 2.0)).matrix();
    }
    // Solve a u + K w = f, K^T u + a w = g with a = N-1, then scale by 4.
    const double a = n - 1.0;
    const auto f = v.head(n_);
    const auto g = v.tail(n_ - 1);
    Eigen::VectorXd kt_f = (f.sum() - f.head(n_ - 1).array()).matrix();
    Eigen::VectorXd rhs = a * g - kt_f;
    // (a^2 I - K^T K)^{-1} = (I + 1 1^T) / (N (N - 2)).
    Eigen::VectorXd w = (rhs.array() + rhs.sum()).matrix() / (n * (n - 2.0));
    Eigen::VectorXd k_w(n_);
    const double sw = w.sum();
    k_w.setConstant(sw);
    k_w.head(n_ - 1) -= w;
    Eigen::VectorXd out(dim());
    out.head(n_) = (f - k_w) / a;
    out.tail(n_ - 1) = w;
    return 4.0 * out;
  }

  [[nodiscard]] Eigen::MatrixXd dense() const {
    Eigen::MatrixXd m(dim(), dim());
    for (int k = 0; k < dim(); ++k) m.col(k) = apply(Eigen::VectorXd::Unit(dim(), k));
    return m;
  }

 private:
  void check(const Eigen::VectorXd& v) const {
    if (v.size() != dim()) {
      throw ValidationError("vector of length " + std::to_string(v.size()) + " does not match minorizer dimension " +
                            std::to_string(dim()));
    }
  }

  Mode mode_;
  int n_;
};

inline Eigen::VectorXd astar_apply_inverse(const MinorizerMatrix& m, const Eigen::VectorXd& v) {
  return m.apply_inverse(v);
}

/**
 * Quadratic minorizer of theta1 -> l(theta1, theta2) at theta1_t:
 * m(theta1) = l_t + g_t . d - d^T A* d / 2 with d = theta1 - theta1_t.
 */
inline double minorizer_value(const MinorizerMatrix& m, double loglik_at_t, const Eigen::VectorXd& grad1_at_t,
                              const Eigen::VectorXd& delta) {
  return loglik_at_t + grad1_at_t.dot(delta) - 0.5 * delta.dot(m.apply(delta));
}

}  // namespace netinfer
