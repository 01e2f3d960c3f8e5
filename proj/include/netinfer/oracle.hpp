#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "netinfer/errors.hpp"
#include "netinfer/model.hpp"
#include "netinfer/population.hpp"
#include "netinfer/sampler.hpp"

namespace netinfer::oracle {

/**
 * @brief Sufficient statistics of the two built-in models computed directly
 * from their definitions with plain loops and set intersections.
 *
 * Deliberately shares nothing with the term classes so that it can serve as
 * an independent reference.
 */
inline Eigen::VectorXd brute_statistics(const std::string& model_id, const std::vector<std::vector<int>>& nbhd,
                                        const Eigen::MatrixXd& x, const Eigen::VectorXd& ystar,
                                        const std::vector<std::vector<int>>& z) {
  const int n = static_cast<int>(nbhd.size());
  auto in_set = [&](int i, int k) {
    const auto& v = nbhd[static_cast<std::size_t>(i)];
    return std::find(v.begin(), v.end(), k) != v.end();
  };
  auto overlap = [&](int i, int j) {
    for (int k : nbhd[static_cast<std::size_t>(i)]) {
      if (in_set(j, k)) return true;
    }
    return false;
  };
  auto two_path = [&](int i, int j) {
    for (int k = 0; k < n; ++k) {
      if (k == i || k == j) continue;
      if (in_set(i, k) && in_set(j, k) && z[i][k] == 1 && z[k][j] == 1) return true;
    }
    return false;
  };
  const double logn = std::log(static_cast<double>(n));
  if (model_id == kUndirectedExampleId) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(n + 6);
    for (int i = 0; i < n; ++i) {
      s[n + 1] += ystar[i];
      s[n + 2] += x(i, 0) * ystar[i];
    }
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (z[i][j] == 0) continue;
        s[i] += 1.0;
        s[j] += 1.0;
        if (!overlap(i, j)) {
          s[n] -= logn;
          continue;
        }
        s[n + 3] += two_path(i, j) ? 1.0 : 0.0;
        s[n + 4] += x(i, 0) * ystar[j] + x(j, 0) * ystar[i];
        s[n + 5] += ystar[i] * ystar[j];
      }
    }
    return s;
  }
  if (model_id == kDirectedApplicationId) {
    const int b = 2 * n - 1;
    Eigen::VectorXd s = Eigen::VectorXd::Zero(b + 13);
    for (int i = 0; i < n; ++i) {
      s[b] += ystar[i];
      for (int m = 0; m < 3; ++m) s[b + 1 + m] += x(i, m) * ystar[i];
    }
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j || z[i][j] == 0) continue;
        s[i] += 1.0;
        if (j < n - 1) s[n + j] += 1.0;
        s[b + 5] += 0.5 * z[j][i];
        if (!overlap(i, j)) {
          s[b + 4] -= logn;
          continue;
        }
        s[b + 6] += two_path(i, j) ? 1.0 : 0.0;
        s[b + 7] += x(i, 0);
        for (int m = 1; m < 4; ++m) s[b + 7 + m] += x(i, m) == x(j, m) ? 1.0 : 0.0;
        s[b + 11] += ystar[j];
        s[b + 12] += x(i, 0) * ystar[j];
      }
    }
    return s;
  }
  throw ValidationError("no reference statistics for model '" + model_id + "'");
}

/// T(z) = sum over pairs of d_ab(z) z_ab (ordered pairs if directed), by exhaustive search.
inline int brute_transitive_statistic(const std::vector<std::vector<int>>& nbhd, const std::vector<std::vector<int>>& z,
                                      bool directed) {
  const int n = static_cast<int>(nbhd.size());
  auto in_set = [&](int i, int k) {
    const auto& v = nbhd[static_cast<std::size_t>(i)];
    return std::find(v.begin(), v.end(), k) != v.end();
  };
  int t = 0;
  for (int a = 0; a < n; ++a) {
    for (int b = directed ? 0 : a + 1; b < n; ++b) {
      if (a == b || z[a][b] == 0) continue;
      for (int k = 0; k < n; ++k) {
        if (k != a && k != b && in_set(a, k) && in_set(b, k) && z[a][k] == 1 && z[k][b] == 1) {
          ++t;
          break;
        }
      }
    }
  }
  return t;
}

inline std::vector<std::vector<int>> to_matrix(const Network& z) {
  std::vector<std::vector<int>> m(static_cast<std::size_t>(z.size()), std::vector<int>(static_cast<std::size_t>(z.size()), 0));
  for (int i = 0; i < z.size(); ++i) {
    for (int j = 0; j < z.size(); ++j) m[i][j] = z.has_edge(i, j) ? 1 : 0;
  }
  return m;
}

inline constexpr int kMaxEnumerationBits = 22;

/**
 * @brief Exact joint law of a Bernoulli-response model on a tiny population.
 *
 * A state is a bit-vector: bit i < N is y_i, bit N + s is the connection slot
 * s, slots ordered as the sampler visits them (lexicographic; i < j if
 * undirected).
 */
struct Enumeration {
  int n_units = 0;
  bool directed = false;
  std::vector<std::pair<int, int>> slots;
  std::vector<double> log_weight;  // theta . s(state)
  double log_phi = 0.0;

  [[nodiscard]] int bits() const noexcept { return n_units + static_cast<int>(slots.size()); }
  [[nodiscard]] std::uint32_t states() const noexcept { return std::uint32_t{1} << bits(); }
  [[nodiscard]] double probability(std::uint32_t s) const { return std::exp(log_weight[s] - log_phi); }

  [[nodiscard]] ChainState decode(std::uint32_t s) const {
    ChainState st{Eigen::VectorXd::Zero(n_units), Network(n_units, directed)};
    for (int i = 0; i < n_units; ++i) st.y[i] = (s >> i) & 1U;
    for (std::size_t k = 0; k < slots.size(); ++k) {
      if ((s >> (n_units + static_cast<int>(k))) & 1U) st.z.set_edge(slots[k].first, slots[k].second, true);
    }
    return st;
  }

  [[nodiscard]] std::uint32_t encode(const Eigen::VectorXd& y, const Network& z) const {
    std::uint32_t s = 0;
    for (int i = 0; i < n_units; ++i) {
      if (y[i] != 0.0) s |= std::uint32_t{1} << i;
    }
    for (std::size_t k = 0; k < slots.size(); ++k) {
      if (z.has_edge(slots[k].first, slots[k].second)) s |= std::uint32_t{1} << (n_units + static_cast<int>(k));
    }
    return s;
  }
};

inline std::vector<std::pair<int, int>> scan_slots(int n, bool directed) {
  std::vector<std::pair<int, int>> slots;
  for (int i = 0; i < n; ++i) {
    for (int j = directed ? 0 : i + 1; j < n; ++j) {
      if (i != j) slots.emplace_back(i, j);
    }
  }
  return slots;
}

inline Enumeration enumerate_joint(const ModelSpec& spec, const Population& pop, const Eigen::MatrixXd& x,
                                   const Eigen::VectorXd& theta) {
  if (spec.family().kind != FamilyKind::bernoulli) throw ValidationError("enumeration requires Bernoulli responses");
  check_theta(spec, theta);
  Enumeration e;
  e.n_units = pop.size();
  e.directed = spec.directed();
  e.slots = scan_slots(e.n_units, e.directed);
  if (e.bits() > kMaxEnumerationBits) {
    throw ValidationError("state space of " + std::to_string(e.bits()) + " bits exceeds the enumeration cap of " +
                          std::to_string(kMaxEnumerationBits));
  }
  e.log_weight.resize(e.states());
  const int n = e.n_units;
  std::vector<std::vector<int>> z(static_cast<std::size_t>(n), std::vector<int>(static_cast<std::size_t>(n), 0));
  Eigen::VectorXd y(n);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::uint32_t s = 0; s < e.states(); ++s) {
    for (int i = 0; i < n; ++i) y[i] = (s >> i) & 1U;
    for (std::size_t k = 0; k < e.slots.size(); ++k) {
      const int v = (s >> (n + static_cast<int>(k))) & 1U;
      auto [i, j] = e.slots[k];
      z[i][j] = v;
      if (!e.directed) z[j][i] = v;
    }
    const double w = theta.dot(brute_statistics(spec.id(), pop.neighborhoods(), x, y, z));
    e.log_weight[s] = w;
    mx = std::max(mx, w);
  }
  double tot = 0.0;
  for (double w : e.log_weight) tot += std::exp(w - mx);
  e.log_phi = mx + std::log(tot);
  return e;
}

/// P(coordinate = 1 | all other coordinates as in `state`).
inline double exact_conditional(const Enumeration& e, int coordinate, std::uint32_t state) {
  if (coordinate < 0 || coordinate >= e.bits()) throw ValidationError("coordinate out of range");
  const std::uint32_t one = state | (std::uint32_t{1} << coordinate);
  const std::uint32_t zero = state & ~(std::uint32_t{1} << coordinate);
  return logistic(e.log_weight[one] - e.log_weight[zero]);
}

/// log P(coordinate = 1 | rest) - log P(coordinate = 0 | rest).
inline double exact_log_odds(const Enumeration& e, int coordinate, std::uint32_t state) {
  if (coordinate < 0 || coordinate >= e.bits()) throw ValidationError("coordinate out of range");
  const std::uint32_t one = state | (std::uint32_t{1} << coordinate);
  const std::uint32_t zero = state & ~(std::uint32_t{1} << coordinate);
  return e.log_weight[one] - e.log_weight[zero];
}

struct GaussianConditional {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/**
 * Law of Y | Z = z, X = x for the undirected example model with Gaussian
 * responses: mean (I - xi U)^{-1} v, covariance psi (I - xi U)^{-1}, where
 * u_ij = c_ij z_ij, xi = gamma_yyz / psi and
 * v_i = alpha_y + beta x_i + gamma_xyz sum_j u_ij x_j.
 * `theta` uses the undirected example layout.
 */
inline GaussianConditional gaussian_conditional_params(const Population& pop, const Eigen::MatrixXd& x,
                                                       const Network& z, const Eigen::VectorXd& theta, double psi) {
  const int n = pop.size();
  if (theta.size() != n + 6) throw ValidationError("theta does not have the undirected example layout");
  if (!(psi > 0.0)) throw ValidationError("psi must be positive");
  const double alpha = theta[n + 1];
  const double beta = theta[n + 2];
  const double g_xyz = theta[n + 4];
  const double xi = theta[n + 5] / psi;
  Eigen::MatrixXd U = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j && pop.overlaps(i, j) && z.has_edge(i, j)) U(i, j) = 1.0;
    }
  }
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = alpha + beta * x(i, 0) + g_xyz * U.row(i).dot(x.col(0));
  const Eigen::MatrixXd K = Eigen::MatrixXd::Identity(n, n) - xi * U;
  const double lo = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(K, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  if (!(lo > 0.0)) {
    throw ValidationError("I - xi U is not positive definite (smallest eigenvalue " + std::to_string(lo) + ")");
  }
  const Eigen::MatrixXd Kinv = K.inverse();
  return {Kinv * v, psi * Kinv};
}

inline double fd_step(double step, double t) { return step * std::max(1.0, std::abs(t)); }

/// Central-difference gradient with step h_k = step * max(1, |theta_k|).
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& theta,
                                   double step = 1e-5) {
  Eigen::VectorXd g(theta.size());
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    const double h = fd_step(step, theta[k]);
    Eigen::VectorXd a = theta;
    Eigen::VectorXd b = theta;
    a[k] += h;
    b[k] -= h;
    const double fa = f(a);
    const double fb = f(b);
    if (!std::isfinite(fa) || !std::isfinite(fb)) throw NumericalError("non-finite evaluation in finite differences");
    g[k] = (fa - fb) / (2.0 * h);
  }
  return g;
}

/// Central-difference Jacobian of a vector function (column k = d/d theta_k).
inline Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& g,
                                   const Eigen::VectorXd& theta, double step = 1e-5) {
  Eigen::MatrixXd J;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    const double h = fd_step(step, theta[k]);
    Eigen::VectorXd a = theta;
    Eigen::VectorXd b = theta;
    a[k] += h;
    b[k] -= h;
    const Eigen::VectorXd ga = g(a);
    const Eigen::VectorXd gb = g(b);
    if (!ga.allFinite() || !gb.allFinite()) throw NumericalError("non-finite evaluation in finite differences");
    if (k == 0) J.resize(ga.size(), theta.size());
    J.col(k) = (ga - gb) / (2.0 * h);
  }
  return J;
}

/// Richardson extrapolation of two central-difference Jacobians, (4 J(h/2) - J(h)) / 3; error O(h^4).
inline Eigen::MatrixXd fd_jacobian_richardson(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& g,
                                              const Eigen::VectorXd& theta, double step = 1e-4) {
  return (4.0 * fd_jacobian(g, theta, 0.5 * step) - fd_jacobian(g, theta, step)) / 3.0;
}

/// Central second differences of a scalar function.
inline Eigen::MatrixXd fd_hessian(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& theta,
                                  double step = 1e-4) {
  const Eigen::Index p = theta.size();
  Eigen::MatrixXd H(p, p);
  for (Eigen::Index k = 0; k < p; ++k) {
    for (Eigen::Index l = k; l < p; ++l) {
      const double hk = fd_step(step, theta[k]);
      const double hl = fd_step(step, theta[l]);
      auto at = [&](double sk, double sl) {
        Eigen::VectorXd t = theta;
        t[k] += sk * hk;
        t[l] += sl * hl;
        const double v = f(t);
        if (!std::isfinite(v)) throw NumericalError("non-finite evaluation in finite differences");
        return v;
      };
      H(k, l) = H(l, k) = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * hk * hl);
    }
  }
  return H;
}

}  // namespace netinfer::oracle
