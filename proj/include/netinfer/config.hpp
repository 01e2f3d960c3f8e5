#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "netinfer/errors.hpp"
#include "netinfer/io.hpp"
#include "netinfer/model.hpp"
#include "netinfer/rng.hpp"
#include "netinfer/sampler.hpp"
#include "netinfer/study.hpp"

namespace netinfer::io {

namespace detail {

inline void reject_unknown(const Json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, val] : j.items()) {
    if (!known.count(key)) throw ValidationError("config field '" + where + key + "' is not recognized");
  }
}

inline double number(const Json& j, const std::string& key, double fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw ValidationError("config field '" + where + key + "': expected a number");
  return j[key].get<double>();
}

inline int integer(const Json& j, const std::string& key, int fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_integer()) throw ValidationError("config field '" + where + key + "': expected an integer");
  return j[key].get<int>();
}

inline bool boolean(const Json& j, const std::string& key, bool fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_boolean()) throw ValidationError("config field '" + where + key + "': expected true or false");
  return j[key].get<bool>();
}

inline std::string text(const Json& j, const std::string& key, const std::string& fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_string()) throw ValidationError("config field '" + where + key + "': expected a string");
  return j[key].get<std::string>();
}

}  // namespace detail

/// Law of one covariate column.
struct CovariateColumn {
  enum class Kind { uniform, normal, bernoulli, categorical } kind = Kind::uniform;
  double a = 0.0;  // uniform lo, normal mean, bernoulli p
  double b = 1.0;  // uniform hi, normal sd
  int levels = 2;  // categorical: codes 0..levels-1, equally likely

  [[nodiscard]] double draw(CounterRng& rng) const {
    switch (kind) {
      case Kind::uniform: return a + (b - a) * rng.uniform();
      case Kind::normal: return std::normal_distribution<double>(a, b)(rng);
      case Kind::bernoulli: return rng.uniform() < a ? 1.0 : 0.0;
      case Kind::categorical: return std::floor(rng.uniform() * levels);
    }
    return 0.0;
  }
};

inline CovariateColumn covariate_column_from_json(const Json& j, const std::string& where) {
  if (!j.is_object()) throw ValidationError("config field '" + where + "': expected an object");
  CovariateColumn c;
  const std::string type = detail::text(j, "type", "", where + ".");
  if (type == "uniform") {
    detail::reject_unknown(j, {"type", "lo", "hi"}, where + ".");
    c.kind = CovariateColumn::Kind::uniform;
    c.a = detail::number(j, "lo", 0.0, where + ".");
    c.b = detail::number(j, "hi", 1.0, where + ".");
    if (!(c.b >= c.a)) throw ValidationError("config field '" + where + ".hi' must be >= lo");
  } else if (type == "normal") {
    detail::reject_unknown(j, {"type", "mean", "sd"}, where + ".");
    c.kind = CovariateColumn::Kind::normal;
    c.a = detail::number(j, "mean", 0.0, where + ".");
    c.b = detail::number(j, "sd", 1.0, where + ".");
    if (!(c.b >= 0.0)) throw ValidationError("config field '" + where + ".sd' must be >= 0");
  } else if (type == "bernoulli") {
    detail::reject_unknown(j, {"type", "p"}, where + ".");
    c.kind = CovariateColumn::Kind::bernoulli;
    c.a = detail::number(j, "p", 0.5, where + ".");
    if (!(c.a >= 0.0 && c.a <= 1.0)) throw ValidationError("config field '" + where + ".p' must lie in [0, 1]");
  } else if (type == "categorical") {
    detail::reject_unknown(j, {"type", "levels"}, where + ".");
    c.kind = CovariateColumn::Kind::categorical;
    c.levels = detail::integer(j, "levels", 2, where + ".");
    if (c.levels < 1) throw ValidationError("config field '" + where + ".levels' must be >= 1");
  } else {
    throw ValidationError("config field '" + where + ".type': expected uniform, normal, bernoulli or categorical");
  }
  return c;
}

/// One uniform column for the undirected model; a binary treatment and three 3-level codes for the directed one.
inline std::vector<CovariateColumn> default_covariates(const std::string& model) {
  if (model == kDirectedApplicationId) {
    std::vector<CovariateColumn> cols{{CovariateColumn::Kind::bernoulli, 0.5, 0.0, 2}};
    for (int k = 0; k < 3; ++k) cols.push_back({CovariateColumn::Kind::categorical, 0.0, 0.0, 3});
    return cols;
  }
  return {{CovariateColumn::Kind::uniform, 0.0, 1.0, 2}};
}

/**
 * @brief Configuration of the `simulate` command.
 *
 * Nuisance weights are either drawn i.i.d. Normal(mean, sd) or listed; the
 * interaction weights are listed by name or in layout order.
 */
struct SimulateConfig {
  std::string model = kUndirectedExampleId;
  ResponseFamily family = ResponseFamily::bernoulli();
  int n = 250;
  std::vector<std::vector<int>> neighborhoods;  // empty: subpopulation layout
  bool theta1_random = true;
  double theta1_mean = -1.4;
  double theta1_sd = 0.2;
  Eigen::VectorXd theta1;
  Eigen::VectorXd theta2;
  std::vector<CovariateColumn> covariates;
  int burn_in = 1000;
};

inline SimulateConfig simulate_config_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  detail::reject_unknown(j, {"model", "family", "psi", "n", "neighborhoods", "theta1", "theta2", "covariates", "burn_in"}, "");
  SimulateConfig c;
  c.model = detail::text(j, "model", c.model, "");
  const std::string fam = detail::text(j, "family", "bernoulli", "");
  try {
    const FamilyKind k = parse_family(fam);
    c.family = k == FamilyKind::gaussian ? ResponseFamily::gaussian(detail::number(j, "psi", 1.0, ""))
                                         : ResponseFamily{k, 1.0};
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("config field 'family': ") + e.what());
  }
  if (!j.contains("n")) throw ValidationError("config field 'n' is missing");
  c.n = detail::integer(j, "n", 0, "");
  if (c.n < 2) throw ValidationError("config field 'n' must be >= 2");
  ModelSpec spec = [&] {
    try {
      return make_model(c.model, c.family, c.n);
    } catch (const ValidationError& e) {
      throw ValidationError(std::string("config field 'model': ") + e.what());
    }
  }();
  const auto& names = spec.layout().names;
  const int q = spec.layout().n_nuisance;
  const std::vector<std::string> names1(names.begin(), names.begin() + q);
  const std::vector<std::string> names2(names.begin() + q, names.end());

  if (j.contains("neighborhoods")) {
    const Json& nb = j["neighborhoods"];
    if (nb.is_string()) {
      if (nb.get<std::string>() != "subpopulations") {
        throw ValidationError("config field 'neighborhoods': expected \"subpopulations\" or a list of lists");
      }
    } else if (nb.is_array()) {
      if (static_cast<int>(nb.size()) != c.n) throw ValidationError("config field 'neighborhoods': expected n lists");
      for (std::size_t i = 0; i < nb.size(); ++i) {
        std::vector<int> hood;
        if (!nb[i].is_array()) throw ValidationError("config field 'neighborhoods[" + std::to_string(i) + "]': expected a list");
        for (const auto& v : nb[i]) {
          if (!v.is_number_integer()) {
            throw ValidationError("config field 'neighborhoods[" + std::to_string(i) + "]': expected unit ids");
          }
          hood.push_back(v.get<int>() - 1);
        }
        c.neighborhoods.push_back(std::move(hood));
      }
    } else {
      throw ValidationError("config field 'neighborhoods': expected \"subpopulations\" or a list of lists");
    }
  }

  if (j.contains("theta1")) {
    const Json& t1 = j["theta1"];
    if (t1.is_object() && (t1.contains("mean") || t1.contains("sd"))) {
      detail::reject_unknown(t1, {"mean", "sd"}, "theta1.");
      c.theta1_mean = detail::number(t1, "mean", c.theta1_mean, "theta1.");
      c.theta1_sd = detail::number(t1, "sd", c.theta1_sd, "theta1.");
      if (!(c.theta1_sd >= 0.0)) throw ValidationError("config field 'theta1.sd' must be >= 0");
    } else {
      c.theta1_random = false;
      c.theta1 = vector_from_json(t1, names1, "theta1");
    }
  }
  if (!j.contains("theta2")) throw ValidationError("config field 'theta2' is missing");
  c.theta2 = vector_from_json(j["theta2"], names2, "theta2");

  if (j.contains("covariates")) {
    if (!j["covariates"].is_array()) throw ValidationError("config field 'covariates': expected a list of column laws");
    for (std::size_t k = 0; k < j["covariates"].size(); ++k) {
      c.covariates.push_back(covariate_column_from_json(j["covariates"][k], "covariates[" + std::to_string(k) + "]"));
    }
    if (static_cast<int>(c.covariates.size()) < spec.required_covariates()) {
      throw ValidationError("config field 'covariates': model " + c.model + " needs " +
                            std::to_string(spec.required_covariates()) + " columns");
    }
  } else {
    c.covariates = default_covariates(c.model);
  }
  c.burn_in = detail::integer(j, "burn_in", c.burn_in, "");
  if (c.burn_in < 0) throw ValidationError("config field 'burn_in' must be >= 0");
  return c;
}

struct SimulatedData {
  ModelSpec spec;
  Population pop;
  Dataset data;
  Eigen::VectorXd theta;
};

/// Draws theta1 (if random), then covariates, then one Gibbs draw, all from `seed`.
inline SimulatedData run_simulate_config(const SimulateConfig& c, std::uint64_t seed) {
  ModelSpec spec = make_model(c.model, c.family, c.n);
  Population pop = c.neighborhoods.empty() ? make_subpopulation_neighborhoods(c.n) : Population(c.neighborhoods);
  CounterRng rng(seed);
  const int q = spec.layout().n_nuisance;
  Eigen::VectorXd theta(spec.n_params());
  if (c.theta1_random) {
    std::normal_distribution<double> nd(c.theta1_mean, c.theta1_sd);
    for (int k = 0; k < q; ++k) theta[k] = nd(rng);
  } else {
    theta.head(q) = c.theta1;
  }
  theta.tail(spec.n_params() - q) = c.theta2;
  Eigen::MatrixXd x(c.n, static_cast<Eigen::Index>(c.covariates.size()));
  for (int i = 0; i < c.n; ++i) {
    for (std::size_t m = 0; m < c.covariates.size(); ++m) x(i, static_cast<Eigen::Index>(m)) = c.covariates[m].draw(rng);
  }
  GibbsConfig g;
  g.burn_in = c.burn_in;
  g.thin = 1;
  g.seed = rng();
  Dataset d = simulate(spec, pop, x, theta, g, 1).front();
  return {std::move(spec), std::move(pop), std::move(d), std::move(theta)};
}

inline SimStudyConfig study_config_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  detail::reject_unknown(j,
                         {"sizes", "replications", "theta1", "theta2", "covariates", "burn_in", "fit", "init_at_truth",
                          "intervals", "godambe", "level"},
                         "");
  SimStudyConfig c;
  if (!j.contains("sizes")) throw ValidationError("config field 'sizes' is missing");
  if (!j["sizes"].is_array()) throw ValidationError("config field 'sizes': expected a list of unit counts");
  c.sizes.clear();
  for (const auto& v : j["sizes"]) {
    if (!v.is_number_integer()) throw ValidationError("config field 'sizes': expected integers");
    c.sizes.push_back(v.get<int>());
  }
  if (c.sizes.empty()) throw ValidationError("config field 'sizes' is empty");
  c.replications = detail::integer(j, "replications", c.replications, "");
  if (j.contains("theta1")) {
    detail::reject_unknown(j["theta1"], {"mean", "sd"}, "theta1.");
    c.theta1_mean = detail::number(j["theta1"], "mean", c.theta1_mean, "theta1.");
    c.theta1_sd = detail::number(j["theta1"], "sd", c.theta1_sd, "theta1.");
  }
  if (j.contains("theta2")) {
    c.theta2 = vector_from_json(j["theta2"], {"lambda", "alpha_y", "beta_xy", "gamma_zz", "gamma_xyz", "gamma_yyz"}, "theta2");
  }
  if (j.contains("covariates")) {
    detail::reject_unknown(j["covariates"], {"lo", "hi"}, "covariates.");
    c.covariate_lo = detail::number(j["covariates"], "lo", c.covariate_lo, "covariates.");
    c.covariate_hi = detail::number(j["covariates"], "hi", c.covariate_hi, "covariates.");
  }
  c.burn_in = detail::integer(j, "burn_in", c.burn_in, "");
  if (j.contains("fit")) {
    const Json& f = j["fit"];
    detail::reject_unknown(f, {"max_iters", "step_tol", "loglik_tol", "quasi_newton"}, "fit.");
    c.fit.max_iters = detail::integer(f, "max_iters", c.fit.max_iters, "fit.");
    c.fit.step_tol = detail::number(f, "step_tol", c.fit.step_tol, "fit.");
    c.fit.loglik_tol = detail::number(f, "loglik_tol", c.fit.loglik_tol, "fit.");
    c.fit.quasi_newton = detail::boolean(f, "quasi_newton", c.fit.quasi_newton, "fit.");
  }
  c.init_at_truth = detail::boolean(j, "init_at_truth", c.init_at_truth, "");
  c.intervals = detail::boolean(j, "intervals", c.intervals, "");
  if (j.contains("godambe")) {
    const Json& g = j["godambe"];
    detail::reject_unknown(g, {"draws", "burn_in", "thin", "independent_chains"}, "godambe.");
    c.godambe.draws = detail::integer(g, "draws", c.godambe.draws, "godambe.");
    c.godambe.burn_in = detail::integer(g, "burn_in", c.godambe.burn_in, "godambe.");
    c.godambe.thin = detail::integer(g, "thin", c.godambe.thin, "godambe.");
    c.godambe.independent_chains = detail::boolean(g, "independent_chains", c.godambe.independent_chains, "godambe.");
  }
  c.level = detail::number(j, "level", c.level, "");
  try {
    c.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return c;
}

}  // namespace netinfer::io
