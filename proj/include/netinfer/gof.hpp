#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "netinfer/errors.hpp"
#include "netinfer/glm.hpp"
#include "netinfer/model.hpp"
#include "netinfer/pseudolik.hpp"
#include "netinfer/sampler.hpp"

namespace netinfer {

/**
 * @brief Number of connected pairs with k shared partners, k = 0..N-2.
 *
 * Undirected: partners of an edge {i,j} are common neighbors. Directed: the
 * partners of i -> j are the k with i -> k -> j.
 */
inline std::vector<double> shared_partner_distribution(const Network& z) {
  const int n = z.size();
  std::vector<double> hist(static_cast<std::size_t>(std::max(n - 1, 1)), 0.0);
  for (int i = 0; i < n; ++i) {
    const auto out_i = z.out_bits(i);
    for (int j = z.directed() ? 0 : i + 1; j < n; ++j) {
      if (i == j || !z.has_edge(i, j)) continue;
      const auto in_j = z.in_bits(j);
      int k = 0;
      for (std::size_t w = 0; w < out_i.size(); ++w) k += std::popcount(out_i[w] & in_j[w]);
      hist[static_cast<std::size_t>(k)] += 1.0;
    }
  }
  return hist;
}

struct SpilloverDegrees {
  std::vector<int> in;
  std::vector<int> out;
};

/**
 * Degrees in the subnetwork of ordered pairs (i, j) with z_ij = 1,
 * x_{i,treat} = 1, y_j = 1 and overlapping neighborhoods. An undirected
 * network contributes both orientations of every edge.
 */
inline SpilloverDegrees spillover_degrees(const Population& pop, const Dataset& d, int treat_column = 0) {
  const int n = d.size();
  if (pop.size() != n || d.network.size() != n) throw ValidationError("population, responses and network sizes differ");
  if (treat_column < 0 || treat_column >= d.covariates.cols()) throw ValidationError("treatment column out of range");
  SpilloverDegrees out{std::vector<int>(static_cast<std::size_t>(n), 0), std::vector<int>(static_cast<std::size_t>(n), 0)};
  for (int i = 0; i < n; ++i) {
    if (d.covariates(i, treat_column) != 1.0) continue;
    for (int j : pop.overlap_partners(i)) {
      if (d.responses[j] == 1.0 && d.network.has_edge(i, j)) {
        ++out.out[static_cast<std::size_t>(i)];
        ++out.in[static_cast<std::size_t>(j)];
      }
    }
  }
  return out;
}

/// Counts of each value 0..max_value (larger values land in the last bin).
inline std::vector<double> value_histogram(const std::vector<int>& values, int max_value) {
  std::vector<double> h(static_cast<std::size_t>(max_value + 1), 0.0);
  for (int v : values) h[static_cast<std::size_t>(std::clamp(v, 0, max_value))] += 1.0;
  return h;
}

enum class GofStatistic { edges, shared_partners, spillover_in, spillover_out };

inline std::string gof_statistic_name(GofStatistic s) {
  switch (s) {
    case GofStatistic::edges: return "edges";
    case GofStatistic::shared_partners: return "shared_partners";
    case GofStatistic::spillover_in: return "spillover_in";
    case GofStatistic::spillover_out: return "spillover_out";
  }
  return "unknown";
}

inline GofStatistic parse_gof_statistic(const std::string& s) {
  for (auto v : {GofStatistic::edges, GofStatistic::shared_partners, GofStatistic::spillover_in, GofStatistic::spillover_out}) {
    if (gof_statistic_name(v) == s) return v;
  }
  throw ValidationError("unknown GOF statistic '" + s + "' (expected edges, shared_partners, spillover_in, spillover_out)");
}

/// Statistic as a vector indexed by k (a single entry for scalar statistics).
inline std::vector<double> compute_statistic(GofStatistic s, const Population& pop, const Dataset& d) {
  const int n = d.size();
  switch (s) {
    case GofStatistic::edges: return {static_cast<double>(d.network.edge_count())};
    case GofStatistic::shared_partners: return shared_partner_distribution(d.network);
    case GofStatistic::spillover_in: return value_histogram(spillover_degrees(pop, d).in, std::max(n - 1, 0));
    case GofStatistic::spillover_out: return value_histogram(spillover_degrees(pop, d).out, std::max(n - 1, 0));
  }
  return {};
}

/// Sample quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw ValidationError("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct Envelope {
  double observed = 0.0;
  double min = std::numeric_limits<double>::quiet_NaN();
  double q05 = std::numeric_limits<double>::quiet_NaN();
  double median = std::numeric_limits<double>::quiet_NaN();
  double q95 = std::numeric_limits<double>::quiet_NaN();
  double max = std::numeric_limits<double>::quiet_NaN();

  /// Observed value within the 90% band [q05, q95].
  [[nodiscard]] bool inside() const noexcept { return q05 <= observed && observed <= q95; }
};

struct GofReference {
  GofStatistic statistic = GofStatistic::edges;
  int n_sims = 0;
  std::vector<Envelope> rows;  // row k for statistic index k

  [[nodiscard]] bool all_inside() const {
    return std::all_of(rows.begin(), rows.end(), [](const Envelope& e) { return e.inside(); });
  }
};

/**
 * @brief Simulation envelopes of `statistics` under theta and the observed
 * values on `data`.
 *
 * Datasets are drawn with the covariates held at their observed values using
 * `gibbs` (burn-in, thinning, seed). Histogram rows past the last index that
 * is non-zero in the observed data or any simulation are dropped. With
 * n_sims = 0 only the observed values are filled in.
 */
inline std::vector<GofReference> gof_reference(const ModelSpec& spec, const Population& pop, const Dataset& data,
                                               const Eigen::VectorXd& theta, const std::vector<GofStatistic>& statistics,
                                               int n_sims, const GibbsConfig& gibbs = {}) {
  validate_dataset(spec, pop, data);
  if (n_sims < 0) throw ValidationError("n_sims must be >= 0");
  const std::vector<Dataset> sims = simulate(spec, pop, data.covariates, theta, gibbs, n_sims);
  std::vector<GofReference> out;
  for (GofStatistic s : statistics) {
    GofReference ref;
    ref.statistic = s;
    ref.n_sims = n_sims;
    const std::vector<double> obs = compute_statistic(s, pop, data);
    std::vector<std::vector<double>> sim_values;
    sim_values.reserve(sims.size());
    for (const auto& d : sims) sim_values.push_back(compute_statistic(s, pop, d));
    std::size_t len = obs.size() == 1 ? 1 : 0;
    for (std::size_t k = 0; k < obs.size(); ++k) {
      bool nonzero = obs[k] != 0.0;
      for (const auto& v : sim_values) nonzero = nonzero || v[k] != 0.0;
      if (nonzero) len = k + 1;
    }
    for (std::size_t k = 0; k < len; ++k) {
      Envelope e;
      e.observed = obs[k];
      if (!sim_values.empty()) {
        std::vector<double> col;
        col.reserve(sim_values.size());
        for (const auto& v : sim_values) col.push_back(v[k]);
        e.min = *std::min_element(col.begin(), col.end());
        e.max = *std::max_element(col.begin(), col.end());
        e.q05 = quantile(col, 0.05);
        e.median = quantile(col, 0.5);
        e.q95 = quantile(col, 0.95);
      }
      ref.rows.push_back(e);
    }
    out.push_back(std::move(ref));
  }
  return out;
}

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

/**
 * @brief ROC curve over all distinct score thresholds and its area by the
 * trapezoid rule. Tied scores move together, which gives tied pairs credit
 * one half, as in the Mann-Whitney statistic.
 */
inline RocCurve roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw ValidationError("scores and labels differ in length");
  double pos = 0.0;
  double neg = 0.0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw ValidationError("labels must be 0 or 1");
    (l == 1 ? pos : neg) += 1.0;
  }
  if (pos == 0.0 || neg == 0.0) throw ValidationError("ROC needs at least one positive and one negative label");
  for (double s : scores) {
    if (!std::isfinite(s)) throw ValidationError("scores must be finite");
  }
  std::vector<std::size_t> order(scores.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  RocCurve roc;
  roc.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  double tp = 0.0;
  double fp = 0.0;
  for (std::size_t k = 0; k < order.size();) {
    const double t = scores[order[k]];
    while (k < order.size() && scores[order[k]] == t) {
      (labels[order[k]] == 1 ? tp : fp) += 1.0;
      ++k;
    }
    const RocPoint& prev = roc.points.back();
    const RocPoint next{t, fp / neg, tp / pos};
    roc.auc += (next.fpr - prev.fpr) * 0.5 * (next.tpr + prev.tpr);
    roc.points.push_back(next);
  }
  return roc;
}

/// Unit indices with neighborhood size at most split, and the rest.
struct NeighborhoodSizeSplit {
  std::vector<int> small;
  std::vector<int> large;
};

inline NeighborhoodSizeSplit split_by_neighborhood_size(const Population& pop, int split) {
  NeighborhoodSizeSplit out;
  for (int i = 0; i < pop.size(); ++i) {
    (static_cast<int>(pop.neighborhood(i).size()) <= split ? out.small : out.large).push_back(i);
  }
  return out;
}

/// Elements of v at the given indices.
template <class T>
std::vector<T> take(const std::vector<T>& v, const std::vector<int>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(v.at(static_cast<std::size_t>(i)));
  return out;
}

/// P(y_i = 1 | y_{-i}, z, x) under the joint model at theta.
inline Eigen::VectorXd predict_response_probs(const ModelSpec& spec, const Population& pop, const Dataset& data,
                                              const Eigen::VectorXd& theta) {
  if (spec.family().kind != FamilyKind::bernoulli) throw ValidationError("response probabilities need Bernoulli responses");
  check_theta(spec, theta);
  const ConditionalDesign design(spec, pop, data);
  Eigen::VectorXd p(data.size());
  for (int i = 0; i < data.size(); ++i) p[i] = logistic(design.eta(i, theta.data()));
  return p;
}

/// Covariate-only design of the model's unit terms (intercept and slopes).
inline Eigen::MatrixXd unit_term_design(const ModelSpec& spec, const Population& pop, const Dataset& data) {
  validate_dataset(spec, pop, data);
  const Eigen::VectorXd ystar = scaled_responses(spec, data.responses);
  const ModelState s = make_state(pop, data, ystar);
  const auto& units = spec.unit_terms();
  Eigen::MatrixXd X(data.size(), static_cast<Eigen::Index>(units.size()));
  for (int i = 0; i < data.size(); ++i) {
    for (std::size_t k = 0; k < units.size(); ++k) X(i, static_cast<Eigen::Index>(k)) = units[k].term->part1(s, i);
  }
  return X;
}

/// Logistic regression of y on the unit-term covariates, ignoring the network.
struct BaselineModel {
  GlmFit fit;
  Eigen::MatrixXd design;

  [[nodiscard]] Eigen::VectorXd probabilities() const {
    Eigen::VectorXd p = design * fit.coef;
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = logistic(p[i]);
    return p;
  }
};

inline BaselineModel fit_baseline(const ModelSpec& spec, const Population& pop, const Dataset& data) {
  if (spec.family().kind != FamilyKind::bernoulli) throw ValidationError("baseline logistic model needs Bernoulli responses");
  BaselineModel b;
  b.design = unit_term_design(spec, pop, data);
  b.fit = fit_glm(b.design, data.responses, spec.family());
  return b;
}

inline std::vector<int> binary_labels(const Eigen::VectorXd& y) {
  std::vector<int> out(static_cast<std::size_t>(y.size()));
  for (Eigen::Index i = 0; i < y.size(); ++i) out[static_cast<std::size_t>(i)] = y[i] != 0.0 ? 1 : 0;
  return out;
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

namespace detail {

inline std::string shortest_decimal(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

}  // namespace detail

/// CSV rows statistic,k,observed,q05,median,q95 (simulated columns empty without simulations).
inline void write_gof_csv(std::ostream& os, const std::vector<GofReference>& refs) {
  os << "statistic,k,observed,q05,median,q95\n";
  auto num = [&](double v) {
    if (std::isfinite(v)) os << detail::shortest_decimal(v);
  };
  for (const auto& r : refs) {
    for (std::size_t k = 0; k < r.rows.size(); ++k) {
      const Envelope& e = r.rows[k];
      os << gof_statistic_name(r.statistic) << ',' << k << ',';
      num(e.observed);
      os << ',';
      num(e.q05);
      os << ',';
      num(e.median);
      os << ',';
      num(e.q95);
      os << '\n';
    }
  }
}

/// CSV rows model,threshold,fpr,tpr.
inline void write_roc_csv(std::ostream& os, const std::vector<std::pair<std::string, RocCurve>>& curves) {
  os << "model,threshold,fpr,tpr\n";
  for (const auto& [name, c] : curves) {
    for (const auto& p : c.points) {
      os << name << ',';
      os << (std::isfinite(p.threshold) ? detail::shortest_decimal(p.threshold) : "inf") << ','
         << detail::shortest_decimal(p.fpr) << ',' << detail::shortest_decimal(p.tpr) << '\n';
    }
  }
}

}  // namespace netinfer
