#pragma once

#include <Eigen/Dense>

#include <bit>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "netinfer/errors.hpp"
#include "netinfer/family.hpp"
#include "netinfer/network.hpp"
#include "netinfer/population.hpp"

namespace netinfer {

/// Observed (or simulated) data: covariates x (N x d), responses y, network z.
struct Dataset {
  Eigen::MatrixXd covariates;
  Eigen::VectorXd responses;
  Network network;

  [[nodiscard]] int size() const noexcept { return static_cast<int>(responses.size()); }
};

/**
 * @brief Read-only view of one configuration (x, y*, z) handed to terms.
 *
 * y* = y / psi. The view does not own anything; the caller keeps the pointed-to
 * objects alive and may mutate y* and z between calls (the Gibbs sampler does).
 */
struct ModelState {
  const Population* pop = nullptr;
  const Eigen::MatrixXd* x = nullptr;
  const double* ystar = nullptr;
  const Network* z = nullptr;
  double log_n = 0.0;

  [[nodiscard]] double xv(int i, int col) const { return (*x)(i, col); }
  [[nodiscard]] double y(int i) const { return ystar[i]; }
  [[nodiscard]] bool edge(int i, int j) const { return z->has_edge(i, j); }
  [[nodiscard]] bool c(int i, int j) const { return pop->overlaps(i, j); }
};

/**
 * @brief Sparse accumulator for parameter-indexed contributions.
 *
 * In dot mode (constructed with theta) it keeps only sum theta[k]*v; in
 * collect mode it records the (k, v) entries.
 */
class Contributions {
 public:
  struct Entry {
    int index;
    double value;
  };

  Contributions() = default;
  explicit Contributions(const double* theta) : theta_(theta) {}

  void add(int index, double value) {
    if (value == 0.0) return;
    if (theta_ != nullptr) {
      dot_ += theta_[index] * value;
    } else {
      entries_.push_back({index, value});
    }
  }

  [[nodiscard]] double dot() const noexcept { return dot_; }
  [[nodiscard]] const std::vector<Entry>& entries() const noexcept { return entries_; }
  void clear() noexcept {
    dot_ = 0.0;
    entries_.clear();
  }

  /// Dense p-vector of the collected entries.
  [[nodiscard]] Eigen::VectorXd to_dense(int p) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(p);
    for (const auto& e : entries_) v[e.index] += e.value;
    return v;
  }

 private:
  const double* theta_ = nullptr;
  double dot_ = 0.0;
  std::vector<Entry> entries_;
};

/// Response-side term g: affine in y*, value = part0(x_i) + part1(x_i) * y*_i.
class UnitTerm {
 public:
  virtual ~UnitTerm() = default;
  [[nodiscard]] virtual std::string name() const = 0;
  [[nodiscard]] virtual double part0(const ModelState&, int) const { return 0.0; }
  [[nodiscard]] virtual double part1(const ModelState& s, int i) const = 0;
  [[nodiscard]] double value(const ModelState& s, int i) const { return part0(s, i) + part1(s, i) * s.y(i); }
};

/**
 * @brief Pair-side term h.
 *
 * Undirected models evaluate value(i, j) on unordered pairs i < j; directed
 * models on ordered pairs. Every term vanishes when z(i,j) = 0, and an
 * overlap-gated term only reads connections between overlapping units.
 *
 * - edge_change(i, j): change in the global statistic sum_pairs h when z(i,j)
 *   flips 0 -> 1, everything else fixed (change statistic).
 * - response_coef(unit, other): coefficient of y*_unit in the contributions of
 *   the pair {unit, other} (directed: h(unit,other) + h(other,unit)).
 */
class PairTerm {
 public:
  virtual ~PairTerm() = default;
  [[nodiscard]] virtual std::vector<std::string> param_names() const = 0;
  [[nodiscard]] int dim() const { return static_cast<int>(param_names().size()); }
  /// Identically zero (value, change, coefficient) whenever c(i,j) = 0.
  [[nodiscard]] virtual bool overlap_gated() const = 0;
  /// edge_change depends on neither y nor z.
  [[nodiscard]] virtual bool static_change() const = 0;
  /// response_coef can be nonzero.
  [[nodiscard]] virtual bool touches_response() const { return false; }
  /// edge_change(i, j) reads the network at most through z(j,i).
  [[nodiscard]] virtual bool dyad_local() const { return static_change(); }

  virtual void value(const ModelState& s, int i, int j, int offset, Contributions& out) const = 0;
  virtual void edge_change(const ModelState& s, int i, int j, int offset, Contributions& out) const = 0;
  virtual void response_coef(const ModelState&, int, int, int, Contributions&) const {}
};

// ---------------------------------------------------------------------------
// Neighborhood-bound network statistics
// ---------------------------------------------------------------------------

namespace detail {
/// Witnesses k in N_a ∩ N_b with z(a,k) = z(k,b) = 1, ignoring unit `skip`.
inline int count_witnesses(const Population& pop, const Network& z, int a, int b, int skip) {
  auto na = pop.neighborhood_bits(a);
  auto nb = pop.neighborhood_bits(b);
  auto out_a = z.out_bits(a);
  auto in_b = z.in_bits(b);
  int count = 0;
  for (std::size_t w = 0; w < na.size(); ++w) {
    Word m = na[w] & nb[w] & out_a[w] & in_b[w];
    if (skip >= 0 && static_cast<std::size_t>(skip >> 6) == w) m &= ~(Word{1} << (skip & 63));
    count += std::popcount(m);
  }
  return count;
}
}  // namespace detail

/// d(i,j): 1 iff some k in N_i ∩ N_j has z(i,k) = z(k,j) = 1.
inline int two_path_indicator(const Population& pop, const Network& z, int i, int j) {
  pop.check_pair(i, j);
  if (z.size() != pop.size()) throw ValidationError("network size does not match population");
  return detail::count_witnesses(pop, z, i, j, -1) > 0 ? 1 : 0;
}

/**
 * @brief Change in T(z) = sum_pairs d(a,b) z(a,b) when z(i,j) flips 0 -> 1.
 *
 * Three contributions: the pair's own indicator d(i,j), plus every pair (i,b)
 * or (a,j) that is connected and whose only two-path witness is the new leg
 * through j or i respectively.
 */
inline int transitive_change_unchecked(const Population& pop, const Network& z, int i, int j) {
  int delta = detail::count_witnesses(pop, z, i, j, -1) > 0 ? 1 : 0;
  const std::size_t words = pop.neighborhood_bits(i).size();
  // pairs (i,b) gaining witness j: z(i,b) = z(j,b) = 1, j in N_i ∩ N_b
  if (pop.in_neighborhood(i, j)) {
    auto out_i = z.out_bits(i);
    auto out_j = z.out_bits(j);
    auto mem_j = pop.member_bits(j);
    for (std::size_t w = 0; w < words; ++w) {
      Word cand = out_i[w] & out_j[w] & mem_j[w];
      while (cand != 0) {
        const int b = static_cast<int>(w * 64) + std::countr_zero(cand);
        cand &= cand - 1;
        if (b == i || b == j) continue;
        if (detail::count_witnesses(pop, z, i, b, j) == 0) ++delta;
      }
    }
  }
  // pairs (a,j) gaining witness i: z(a,i) = z(a,j) = 1, i in N_a ∩ N_j
  if (pop.in_neighborhood(j, i)) {
    auto in_i = z.in_bits(i);
    auto in_j = z.in_bits(j);
    auto mem_i = pop.member_bits(i);
    for (std::size_t w = 0; w < words; ++w) {
      Word cand = in_i[w] & in_j[w] & mem_i[w];
      while (cand != 0) {
        const int a = static_cast<int>(w * 64) + std::countr_zero(cand);
        cand &= cand - 1;
        if (a == i || a == j) continue;
        if (detail::count_witnesses(pop, z, a, j, i) == 0) ++delta;
      }
    }
  }
  return delta;
}

inline int change_statistic_transitive(const Population& pop, const Network& z, int i, int j) {
  pop.check_pair(i, j);
  if (z.size() != pop.size()) throw ValidationError("network size does not match population");
  return transitive_change_unchecked(pop, z, i, j);
}

// ---------------------------------------------------------------------------
// Terms
// ---------------------------------------------------------------------------

namespace terms {

inline std::vector<std::string> indexed_names(const std::string& stem, int count) {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 1; k <= count; ++k) out.push_back(stem + "." + std::to_string(k));
  return out;
}

/// y*_i (intercept of the response GLM).
class ResponseIntercept final : public UnitTerm {
 public:
  explicit ResponseIntercept(std::string name = "alpha_y") : name_(std::move(name)) {}
  [[nodiscard]] std::string name() const override { return name_; }
  [[nodiscard]] double part1(const ModelState&, int) const override { return 1.0; }

 private:
  std::string name_;
};

/// x_{i,col} y*_i.
class ResponseSlope final : public UnitTerm {
 public:
  ResponseSlope(int column, std::string name) : column_(column), name_(std::move(name)) {}
  [[nodiscard]] std::string name() const override { return name_; }
  [[nodiscard]] double part1(const ModelState& s, int i) const override { return s.xv(i, column_); }

 private:
  int column_;
  std::string name_;
};

/// e_{i,j} z_ij: one propensity weight per unit, undirected.
class Propensity final : public PairTerm {
 public:
  explicit Propensity(int n) : n_(n) {}
  [[nodiscard]] std::vector<std::string> param_names() const override { return indexed_names("alpha_z", n_); }
  [[nodiscard]] bool overlap_gated() const override { return false; }
  [[nodiscard]] bool static_change() const override { return true; }
  void value(const ModelState& s, int i, int j, int off, Contributions& out) const override {
    if (s.edge(i, j)) edge_change(s, i, j, off, out);
  }
  void edge_change(const ModelState&, int i, int j, int off, Contributions& out) const override {
    out.add(off + i, 1.0);
    out.add(off + j, 1.0);
  }

 private:
  int n_;
};

/// e_i z_ij: sender activity, directed.
class OutPropensity final : public PairTerm {
 public:
  explicit OutPropensity(int n) : n_(n) {}
  [[nodiscard]] std::vector<std::string> param_names() const override { return indexed_names("alpha_out", n_); }
  [[nodiscard]] bool overlap_gated() const override { return false; }
  [[nodiscard]] bool static_change() const override { return true; }
  void value(const ModelState& s, int i, int j, int off, Contributions& out) const override {
    if (s.edge(i, j)) out.add(off + i, 1.0);
  }
  void edge_change(const ModelState&, int i, int, int off, Contributions& out) const override {
    out.add(off + i, 1.0);
  }

 private:
  int n_;
};

/// e_j z_ij: receiver attractiveness, directed; the last unit's weight is pinned to 0.
class InPropensity final : public PairTerm {
 public:
  explicit InPropensity(int n) : n_(n) {}
  [[nodiscard]] std::vector<std::string> param_names() const override { return indexed_names("alpha_in", n_ - 1); }
  [[nodiscard]] bool overlap_gated() const override { return false; }
  [[nodiscard]] bool static_change() const override { return true; }
  void value(const ModelState& s, int i, int j, int off, Contributions& out) const override {
    if (s.edge(i, j)) edge_change(s, i, j, off, out);
  }
  void edge_change(const ModelState&, int, int j, int off, Contributions& out) const override {
    if (j < n_ - 1) out.add(off + j, 1.0);
  }

 private:
  int n_;
};

/// -(1 - c_ij) z_ij log N: penalty on connections between non-overlapping neighborhoods.
class SparsityPenalty final : public PairTerm {
 public:
  [[nodiscard]] std::vector<std::string> param_names() const override { return {"lambda"}; }
  [[nodiscard]] bool overlap_gated() const override { return false; }
  [[nodiscard]] bool static_change() const override { return true; }
  void value(const ModelState& s, int i, int j, int off, Contributions& out) const override {
    if (s.edge(i, j)) edge_change(s, i, j, off, out);
  }
  void edge_change(const ModelState& s, int i, int j, int off, Contributions& out) const override {
    if (!s.c(i, j)) out.add(off, -s.log_n);
  }
};

/// d_ij(z) z_ij: transitive closure within overlapping neighborhoods.
class TransitiveClosure final : public PairTerm {
 public:
  explicit TransitiveClosure(std::string name) : name_(std::move(name)) {}
  [[nodiscard]] std::vector<std::string> param_names() const override { return {name_}; }
  [[nodiscard]] bool overlap_gated() const override { return true; }
  [[nodiscard]] bool static_change() const override { return false; }
  void value(const ModelState& s, int i, int j, int off, Contributions& out) const override {
    if (s.edge(i, j) && detail::count_witnesses(*s.pop, *s.z, i, j, -1) > 0) out.add(off, 1.0);
  }
  void edge_change(const ModelState& s, int i, int j, int off, Contributions& out) const override {
    out.add(off, static_cast<double>(transitive_change_unchecked(*s.pop, *s.z, i, j)));
  }

 private:
  std::string name_;
};

/// c_ij (x_i y*_j + x_j y*_i) z_ij: treatment spillover, undirected.
class TreatmentSpillover final : public PairTerm {
 public:
  explicit TreatmentSpillover(int column) : column_(column) {}
  [[nodiscard]] std::vector<std::string> param_names() const override { return {"gamma_xyz"}; }
  [[nodiscard]] bool overlap_gated() const override { return true; }
  [[nodiscard]] bool static_change() const override { return false; }
  [[nodiscard]] bool touches_response() const override { return true; }
  void value(const ModelState& s, int i, int j, int off, Contributions& out) const override {
    if (s.edge(i, j)) edge_change(s, i, j, off, out);
  }
  void edge_change(const ModelState& s, int i, int j, int off, Contributions& out) const override {
    if (s.c(i, j)) out.add(off, s.xv(i, column_) * s.y(j) + s.xv(j, column_) * s.y(i));
  }
  void response_coef(const ModelState& s, int unit, int other, int off, Contributions& out) const override {
    if (s.c(unit, other) && s.edge(unit, other)) out.add(off, s.xv(other, column_));
  }

 private:
  int column_;
};

/// c_ij y*_i y*_j z_ij: outcome spillover, undirected.
class OutcomeSpillover final : public PairTerm {
 public:
  [[nodiscard]] std::vector<std::string> param_names() const override { return {"gamma_yyz"}; }
  [[nodiscard]] bool overlap_gated() const override { return true; }
  [[nodiscard]] bool static_change() const override { return false; }
  [[nodiscard]] bool touches_response() const override { return true; }
  void value(const ModelState& s, int i, int j, int off, Contributions& out) const override {
    if (s.edge(i, j)) edge_change(s, i, j, off, out);
  }
  void edge_change(const ModelState& s, int i, int j, int off, Contributions& out) const override {
    if (s.c(i, j)) out.add(off, s.y(i) * s.y(j));
  }
  void response_coef(const ModelState& s, int unit, int other, int off, Contributions& out) const override {
    if (s.c(unit, other) && s.edge(unit, other)) out.add(off, s.y(other));
  }
};

/// z_ij z_ji / 2 summed over ordered pairs: mutual dyads, directed.
class Reciprocity final : public PairTerm {
 public:
  [[nodiscard]] std::vector<std::string> param_names() const override { return {"gamma_zz.1"}; }
  [[nodiscard]] bool overlap_gated() const override { return false; }
  [[nodiscard]] bool static_change() const override { return false; }
  [[nodiscard]] bool dyad_local() const override { return true; }
  void value(const ModelState& s, int i, int j, int off, Contributions& out) const override {
    if (s.edge(i, j) && s.edge(j, i)) out.add(off, 0.5);
  }
  // Flipping z_ij changes both the (i,j) and (j,i) summands by z_ji / 2.
  void edge_change(const ModelState& s, int i, int j, int off, Contributions& out) const override {
    if (s.edge(j, i)) out.add(off, 1.0);
  }
};

/// c_ij x_{i,col} z_ij: sender covariate, directed.
class SenderCovariate final : public PairTerm {
 public:
  SenderCovariate(int column, std::string name) : column_(column), name_(std::move(name)) {}
  [[nodiscard]] std::vector<std::string> param_names() const override { return {name_}; }
  [[nodiscard]] bool overlap_gated() const override { return true; }
  [[nodiscard]] bool static_change() const override { return true; }
  void value(const ModelState& s, int i, int j, int off, Contributions& out) const override {
    if (s.edge(i, j)) edge_change(s, i, j, off, out);
  }
  void edge_change(const ModelState& s, int i, int j, int off, Contributions& out) const override {
    if (s.c(i, j)) out.add(off, s.xv(i, column_));
  }

 private:
  int column_;
  std::string name_;
};

/// c_ij 1{x_{i,col} = x_{j,col}} z_ij: covariate homophily, directed.
class CovariateMatch final : public PairTerm {
 public:
  CovariateMatch(int column, std::string name) : column_(column), name_(std::move(name)) {}
  [[nodiscard]] std::vector<std::string> param_names() const override { return {name_}; }
  [[nodiscard]] bool overlap_gated() const override { return true; }
  [[nodiscard]] bool static_change() const override { return true; }
  void value(const ModelState& s, int i, int j, int off, Contributions& out) const override {
    if (s.edge(i, j)) edge_change(s, i, j, off, out);
  }
  void edge_change(const ModelState& s, int i, int j, int off, Contributions& out) const override {
    if (s.c(i, j) && s.xv(i, column_) == s.xv(j, column_)) out.add(off, 1.0);
  }

 private:
  int column_;
  std::string name_;
};

/// c_ij y*_j z_ij: receiver response, directed.
class ReceiverResponse final : public PairTerm {
 public:
  [[nodiscard]] std::vector<std::string> param_names() const override { return {"gamma_yz"}; }
  [[nodiscard]] bool overlap_gated() const override { return true; }
  [[nodiscard]] bool static_change() const override { return false; }
  [[nodiscard]] bool touches_response() const override { return true; }
  void value(const ModelState& s, int i, int j, int off, Contributions& out) const override {
    if (s.edge(i, j)) edge_change(s, i, j, off, out);
  }
  void edge_change(const ModelState& s, int i, int j, int off, Contributions& out) const override {
    if (s.c(i, j)) out.add(off, s.y(j));
  }
  // y*_unit appears in h(other, unit) as the receiver.
  void response_coef(const ModelState& s, int unit, int other, int off, Contributions& out) const override {
    if (s.c(other, unit) && s.edge(other, unit)) out.add(off, 1.0);
  }
};

/// c_ij x_{i,col} y*_j z_ij: sender treatment spills over to the receiver's response, directed.
class DirectedTreatmentSpillover final : public PairTerm {
 public:
  explicit DirectedTreatmentSpillover(int column) : column_(column) {}
  [[nodiscard]] std::vector<std::string> param_names() const override { return {"gamma_xyz"}; }
  [[nodiscard]] bool overlap_gated() const override { return true; }
  [[nodiscard]] bool static_change() const override { return false; }
  [[nodiscard]] bool touches_response() const override { return true; }
  void value(const ModelState& s, int i, int j, int off, Contributions& out) const override {
    if (s.edge(i, j)) edge_change(s, i, j, off, out);
  }
  void edge_change(const ModelState& s, int i, int j, int off, Contributions& out) const override {
    if (s.c(i, j)) out.add(off, s.xv(i, column_) * s.y(j));
  }
  void response_coef(const ModelState& s, int unit, int other, int off, Contributions& out) const override {
    if (s.c(other, unit) && s.edge(other, unit)) out.add(off, s.xv(other, column_));
  }

 private:
  int column_;
};

}  // namespace terms

// ---------------------------------------------------------------------------
// Model specification
// ---------------------------------------------------------------------------

/// Parameter names with the nuisance block (theta1) first.
struct ParamLayout {
  std::vector<std::string> names;
  int n_nuisance = 0;

  [[nodiscard]] int size() const noexcept { return static_cast<int>(names.size()); }
  [[nodiscard]] int n_interest() const noexcept { return size() - n_nuisance; }
  [[nodiscard]] int index_of(const std::string& name) const {
    for (int k = 0; k < size(); ++k) {
      if (names[static_cast<std::size_t>(k)] == name) return k;
    }
    throw ValidationError("unknown parameter '" + name + "'");
  }
};

enum class MinorizerKind { undirected_propensity, directed_propensity, none };

/**
 * @brief A joint model: response family, directedness and the ordered term list.
 *
 * Terms are appended in parameter order; nuisance terms must be added before
 * any term of interest so that theta = (theta1, theta2).
 */
class ModelSpec {
 public:
  struct UnitSlot {
    std::shared_ptr<const UnitTerm> term;
    int offset;
  };
  struct PairSlot {
    std::shared_ptr<const PairTerm> term;
    int offset;
  };

  ModelSpec(std::string id, ResponseFamily family, bool directed, int n_units)
      : id_(std::move(id)), family_(family), directed_(directed), n_units_(n_units) {
    family_.validate();
    if (n_units < 2) throw ValidationError("model needs at least 2 units");
  }

  ModelSpec& add_nuisance(std::shared_ptr<const PairTerm> t) {
    if (layout_.size() != layout_.n_nuisance) throw ValidationError("nuisance terms must precede terms of interest");
    const int off = layout_.size();
    for (auto& n : t->param_names()) layout_.names.push_back(n);
    layout_.n_nuisance = layout_.size();
    pair_.push_back({std::move(t), off});
    return *this;
  }
  ModelSpec& add(std::shared_ptr<const PairTerm> t) {
    const int off = layout_.size();
    for (auto& n : t->param_names()) layout_.names.push_back(n);
    pair_.push_back({std::move(t), off});
    return *this;
  }
  ModelSpec& add(std::shared_ptr<const UnitTerm> t) {
    const int off = layout_.size();
    layout_.names.push_back(t->name());
    unit_.push_back({std::move(t), off});
    return *this;
  }

  [[nodiscard]] const std::string& id() const noexcept { return id_; }
  [[nodiscard]] const ResponseFamily& family() const noexcept { return family_; }
  [[nodiscard]] bool directed() const noexcept { return directed_; }
  [[nodiscard]] int n_units() const noexcept { return n_units_; }
  [[nodiscard]] const ParamLayout& layout() const noexcept { return layout_; }
  [[nodiscard]] int n_params() const noexcept { return layout_.size(); }
  [[nodiscard]] const std::vector<UnitSlot>& unit_terms() const noexcept { return unit_; }
  [[nodiscard]] const std::vector<PairSlot>& pair_terms() const noexcept { return pair_; }

  [[nodiscard]] MinorizerKind minorizer() const noexcept { return minorizer_; }
  void set_minorizer(MinorizerKind k) noexcept { minorizer_ = k; }
  [[nodiscard]] int required_covariates() const noexcept { return required_covariates_; }
  void set_required_covariates(int d) noexcept { required_covariates_ = d; }

  [[nodiscard]] bool any_response_pair_terms() const {
    for (const auto& s : pair_) {
      if (s.term->touches_response()) return true;
    }
    return false;
  }

 private:
  std::string id_;
  ResponseFamily family_;
  bool directed_;
  int n_units_;
  ParamLayout layout_;
  std::vector<UnitSlot> unit_;
  std::vector<PairSlot> pair_;
  MinorizerKind minorizer_ = MinorizerKind::none;
  int required_covariates_ = 0;
};

inline constexpr const char* kUndirectedExampleId = "undirected-example";
inline constexpr const char* kDirectedApplicationId = "directed-application";

/**
 * Undirected example model. theta1 = alpha_z (N); theta2 = (lambda, alpha_y,
 * beta_xy, gamma_zz, gamma_xyz, gamma_yyz). Uses covariate column 0.
 */
inline ModelSpec make_undirected_example(ResponseFamily family, int n_units) {
  ModelSpec m(kUndirectedExampleId, family, false, n_units);
  m.add_nuisance(std::make_shared<terms::Propensity>(n_units));
  m.add(std::make_shared<terms::SparsityPenalty>());
  m.add(std::make_shared<terms::ResponseIntercept>("alpha_y"));
  m.add(std::make_shared<terms::ResponseSlope>(0, "beta_xy"));
  m.add(std::make_shared<terms::TransitiveClosure>("gamma_zz"));
  m.add(std::make_shared<terms::TreatmentSpillover>(0));
  m.add(std::make_shared<terms::OutcomeSpillover>());
  m.set_minorizer(MinorizerKind::undirected_propensity);
  m.set_required_covariates(1);
  return m;
}

/**
 * Directed application model with Bernoulli responses and four covariates
 * (x1 treatment, x2..x4 categorical). theta1 = (alpha_out (N), alpha_in
 * (N-1)); theta2 = (alpha_y, beta_xy.1-3, lambda, gamma_zz.1, gamma_zz.2,
 * gamma_xz.1-4, gamma_yz, gamma_xyz).
 */
inline ModelSpec make_directed_application(int n_units) {
  ModelSpec m(kDirectedApplicationId, ResponseFamily::bernoulli(), true, n_units);
  m.add_nuisance(std::make_shared<terms::OutPropensity>(n_units));
  m.add_nuisance(std::make_shared<terms::InPropensity>(n_units));
  m.add(std::make_shared<terms::ResponseIntercept>("alpha_y"));
  for (int k = 0; k < 3; ++k) m.add(std::make_shared<terms::ResponseSlope>(k, "beta_xy." + std::to_string(k + 1)));
  m.add(std::make_shared<terms::SparsityPenalty>());
  m.add(std::make_shared<terms::Reciprocity>());
  m.add(std::make_shared<terms::TransitiveClosure>("gamma_zz.2"));
  m.add(std::make_shared<terms::SenderCovariate>(0, "gamma_xz.1"));
  for (int k = 1; k < 4; ++k) m.add(std::make_shared<terms::CovariateMatch>(k, "gamma_xz." + std::to_string(k + 1)));
  m.add(std::make_shared<terms::ReceiverResponse>());
  m.add(std::make_shared<terms::DirectedTreatmentSpillover>(0));
  m.set_minorizer(MinorizerKind::directed_propensity);
  m.set_required_covariates(4);
  return m;
}

inline ModelSpec make_model(const std::string& id, ResponseFamily family, int n_units) {
  if (id == kUndirectedExampleId) return make_undirected_example(family, n_units);
  if (id == kDirectedApplicationId) {
    if (family.kind != FamilyKind::bernoulli) throw ValidationError("directed-application requires Bernoulli responses");
    return make_directed_application(n_units);
  }
  throw ValidationError("unknown model '" + id + "' (expected undirected-example or directed-application)");
}

// ---------------------------------------------------------------------------
// Model-level operations
// ---------------------------------------------------------------------------

/// Throws ValidationError unless (spec, pop, data) are mutually consistent.
inline void validate_dataset(const ModelSpec& spec, const Population& pop, const Dataset& d) {
  const int n = spec.n_units();
  if (pop.size() != n) throw ValidationError("population has " + std::to_string(pop.size()) + " units, model expects " + std::to_string(n));
  if (d.size() != n) throw ValidationError("dataset has " + std::to_string(d.size()) + " responses, model expects " + std::to_string(n));
  if (d.covariates.rows() != n) throw ValidationError("covariate matrix has wrong number of rows");
  if (d.covariates.cols() < spec.required_covariates()) {
    throw ValidationError("model " + spec.id() + " requires " + std::to_string(spec.required_covariates()) +
                          " covariate columns, found " + std::to_string(d.covariates.cols()));
  }
  if (d.network.size() != n) throw ValidationError("network size does not match the population");
  if (d.network.directed() != spec.directed()) {
    throw ValidationError(std::string("model ") + spec.id() + " expects a " + (spec.directed() ? "directed" : "undirected") +
                          " network");
  }
  for (int i = 0; i < n; ++i) {
    if (!spec.family().in_support(d.responses[i])) {
      throw ValidationError("response of unit " + std::to_string(i) + " (" + std::to_string(d.responses[i]) +
                            ") is outside the support of the " + std::string(family_name(spec.family().kind)) + " family");
    }
    if (!d.covariates.row(i).allFinite()) throw ValidationError("non-finite covariate for unit " + std::to_string(i));
  }
}

/// y* = y / psi.
inline Eigen::VectorXd scaled_responses(const ModelSpec& spec, const Eigen::VectorXd& y) { return y / spec.family().psi; }

inline ModelState make_state(const Population& pop, const Dataset& d, const Eigen::VectorXd& ystar) {
  return ModelState{&pop, &d.covariates, ystar.data(), &d.network, std::log(static_cast<double>(pop.size()))};
}

/// u_i with eta_i = theta . u_i: g_{i,1} plus all pair coefficients of y*_i.
inline void response_design(const ModelSpec& spec, const ModelState& s, int i, Contributions& out) {
  for (const auto& slot : spec.unit_terms()) out.add(slot.offset, slot.term->part1(s, i));
  for (const auto& slot : spec.pair_terms()) {
    if (!slot.term->touches_response()) continue;
    if (slot.term->overlap_gated()) {
      for (int j : s.pop->overlap_partners(i)) slot.term->response_coef(s, i, j, slot.offset, out);
    } else {
      for (int j = 0; j < s.pop->size(); ++j) {
        if (j != i) slot.term->response_coef(s, i, j, slot.offset, out);
      }
    }
  }
}

/// u_ij with eta_ij = theta . u_ij: the change statistics of z_ij.
inline void connection_design(const ModelSpec& spec, const ModelState& s, int i, int j, Contributions& out) {
  const bool overlap = s.pop->overlaps(i, j);
  for (const auto& slot : spec.pair_terms()) {
    if (slot.term->overlap_gated() && !overlap) continue;
    slot.term->edge_change(s, i, j, slot.offset, out);
  }
}

inline void check_theta(const ModelSpec& spec, const Eigen::VectorXd& theta) {
  if (theta.size() != spec.n_params()) {
    throw ValidationError("theta has " + std::to_string(theta.size()) + " entries, model has " +
                          std::to_string(spec.n_params()) + " parameters");
  }
}

/// Linear predictor of y_i given everything else.
inline double eta_response(const ModelSpec& spec, const Population& pop, const Dataset& d,
                           const Eigen::VectorXd& theta, int i) {
  check_theta(spec, theta);
  pop.check_unit(i);
  if (d.size() != pop.size()) throw ValidationError("dataset and population sizes differ");
  const Eigen::VectorXd ystar = scaled_responses(spec, d.responses);
  const ModelState s = make_state(pop, d, ystar);
  Contributions c(theta.data());
  response_design(spec, s, i, c);
  return c.dot();
}

/// Log-odds of z_ij = 1 given everything else.
inline double eta_connection(const ModelSpec& spec, const Population& pop, const Dataset& d,
                             const Eigen::VectorXd& theta, int i, int j) {
  check_theta(spec, theta);
  pop.check_pair(i, j);
  if (d.size() != pop.size()) throw ValidationError("dataset and population sizes differ");
  const Eigen::VectorXd ystar = scaled_responses(spec, d.responses);
  const ModelState s = make_state(pop, d, ystar);
  Contributions c(theta.data());
  connection_design(spec, s, i, j, c);
  return c.dot();
}

/// sum_i g_i + sum_pairs h_ij, laid out per the model's parameter vector.
inline Eigen::VectorXd sufficient_statistics(const ModelSpec& spec, const Population& pop, const Dataset& d) {
  validate_dataset(spec, pop, d);
  const Eigen::VectorXd ystar = scaled_responses(spec, d.responses);
  const ModelState s = make_state(pop, d, ystar);
  Eigen::VectorXd stats = Eigen::VectorXd::Zero(spec.n_params());
  Contributions c;
  for (int i = 0; i < pop.size(); ++i) {
    for (const auto& slot : spec.unit_terms()) stats[slot.offset] += slot.term->value(s, i);
  }
  const int n = pop.size();
  for (int i = 0; i < n; ++i) {
    for (int j = spec.directed() ? 0 : i + 1; j < n; ++j) {
      if (i == j || !d.network.has_edge(i, j)) continue;
      c.clear();
      for (const auto& slot : spec.pair_terms()) slot.term->value(s, i, j, slot.offset, c);
      for (const auto& e : c.entries()) stats[e.index] += e.value;
    }
  }
  return stats;
}

}  // namespace netinfer
