#include <algorithm>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "netinfer/netinfer.hpp"

namespace fs = std::filesystem;
using namespace netinfer;
using io::Json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

Json software_json() { return {{"name", io::kSoftwareName}, {"version", io::kSoftwareVersion}}; }

int resolve_threads(int flag) { return flag > 0 ? flag : default_threads(); }

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_simulate(const SimulateArgs& a) {
  const std::string text = io::read_file(a.config);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ValidationError(a.config + ": invalid JSON: " + e.what());
  }
  const io::SimulateConfig cfg = io::simulate_config_from_json(j);
  const io::SimulatedData sim = io::run_simulate_config(cfg, a.seed);
  const fs::path out(a.out);
  io::write_dataset(out, sim.pop, sim.data);
  const double edges = static_cast<double>(sim.data.network.edge_count());
  Json truth;
  truth["software"] = software_json();
  truth["model"] = cfg.model;
  truth["family"] = std::string(family_name(cfg.family.kind));
  truth["psi"] = cfg.family.psi;
  truth["n"] = cfg.n;
  truth["seed"] = a.seed;
  truth["config_hash"] = io::content_hash(j.dump());
  truth["theta"] = io::named_vector(sim.spec.layout().names, sim.theta);
  truth["edges"] = sim.data.network.edge_count();
  truth["mean_degree"] = (sim.spec.directed() ? 1.0 : 2.0) * edges / cfg.n;
  io::write_json_atomic(out / "truth.json", truth);
  std::cout << "wrote " << cfg.n << " units and " << sim.data.network.edge_count() << " edges to " << out.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

struct FitArgs {
  std::string data;
  std::string model;
  std::string family = "bernoulli";
  double psi = 1.0;
  std::string out;
  FitOptions options;
  bool no_quasi_newton = false;
  bool warm_start = false;
};

struct LoadedFit {
  io::FitArtifact artifact;
  ModelSpec spec;
  io::LoadedData data;
};

std::string fit_config_hash(const std::string& data_hash, const ModelSpec& spec, const FitOptions& o) {
  std::ostringstream ss;
  ss << data_hash << '|' << spec.id() << '|' << family_name(spec.family().kind) << '|' << io::format_double(spec.family().psi)
     << '|' << o.max_iters << '|' << io::format_double(o.step_tol) << '|' << io::format_double(o.loglik_tol) << '|'
     << o.quasi_newton << '|' << o.warm_start;
  return io::content_hash(ss.str());
}

int cmd_fit(const FitArgs& a) {
  ResponseFamily family{parse_family(a.family), a.psi};
  family.validate();
  const bool directed = a.model == kDirectedApplicationId;
  io::LoadedData loaded = io::read_dataset(a.data, directed);
  const ModelSpec spec = make_model(a.model, family, loaded.data.size());
  validate_dataset(spec, loaded.pop, loaded.data);
  FitOptions opt = a.options;
  opt.quasi_newton = !a.no_quasi_newton;
  opt.warm_start = a.warm_start;
  const FitResult r = fit(spec, loaded.pop, loaded.data, Eigen::VectorXd(), opt);
  const std::string data_dir = fs::absolute(a.data).lexically_normal().string();
  const io::FitArtifact art =
      io::make_fit_artifact(spec, r, opt, data_dir, fit_config_hash(io::dataset_hash(a.data), spec, opt));
  io::write_json_atomic(a.out, io::to_json(art));
  std::cout << (r.converged ? "converged" : "NOT converged") << " after " << r.iterations
            << " iterations, pseudo-loglikelihood " << r.final_loglik << '\n';
  if (!r.converged) std::cerr << "warning: fit did not converge; the artifact is flagged\n";
  return kExitOk;
}

LoadedFit load_fit(const std::string& path) {
  io::FitArtifact art = io::fit_artifact_from_json(io::read_json(path));
  const bool directed = art.model == kDirectedApplicationId;
  io::LoadedData loaded = io::read_dataset(art.data_dir, directed);
  ModelSpec spec = make_model(art.model, art.family, loaded.data.size());
  validate_dataset(spec, loaded.pop, loaded.data);
  if (spec.n_params() != art.theta_hat.size() || spec.layout().names != art.names) {
    throw ValidationError(path + ": parameters do not match model " + art.model + " on " + art.data_dir);
  }
  return {std::move(art), std::move(spec), std::move(loaded)};
}

// ---------------------------------------------------------------------------
// se
// ---------------------------------------------------------------------------

struct SeArgs {
  std::string fit;
  std::string out;
  std::uint64_t seed = 0;
  GodambeOptions godambe;
  double level = 0.95;
  int threads = 0;
};

int cmd_se(const SeArgs& a) {
  LoadedFit f = load_fit(a.fit);
  GodambeOptions go = a.godambe;
  go.seed = a.seed;
  go.threads = resolve_threads(a.threads);
  const CovEstimate cov = godambe_cov(f.spec, f.data.pop, f.data.data, f.artifact.theta_hat, go);
  io::SeSection s;
  s.draws = go.draws;
  s.seed = go.seed;
  s.burn_in = go.burn_in;
  s.thin = go.thin;
  s.independent_chains = go.independent_chains;
  s.level = a.level;
  s.ridge_used = cov.ridge_used;
  s.se = cov.se;
  s.covariance = cov.sandwich;
  s.intervals = confidence_intervals(cov, f.artifact.theta_hat, a.level);
  f.artifact.se = s;
  io::write_json_atomic(a.out.empty() ? a.fit : a.out, io::to_json(f.artifact));
  const int q = f.spec.layout().n_nuisance;
  for (int k = q; k < f.spec.n_params(); ++k) {
    std::cout << f.artifact.names[static_cast<std::size_t>(k)] << ' ' << f.artifact.theta_hat[k] << " (se " << cov.se[k]
              << ")\n";
  }
  if (cov.ridge_used) std::cerr << "warning: negative Hessian was not positive definite; a ridge was added\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// gof
// ---------------------------------------------------------------------------

struct GofArgs {
  std::string fit;
  std::string out;
  std::uint64_t seed = 0;
  int sims = 100;
  std::vector<std::string> stats{"shared_partners", "spillover_in", "spillover_out"};
  int burn_in = 500;
  int thin = 10;
  int split_size = 0;
};

int cmd_gof(const GofArgs& a) {
  std::vector<GofStatistic> stats;
  for (const auto& s : a.stats) stats.push_back(parse_gof_statistic(s));
  if (a.sims < 0) throw ValidationError("--sims must be >= 0");
  const LoadedFit f = load_fit(a.fit);
  GibbsConfig gc;
  gc.burn_in = a.burn_in;
  gc.thin = a.thin;
  gc.seed = a.seed;
  gc.initial_state = ChainState{f.data.data.responses, f.data.data.network};
  const auto refs = gof_reference(f.spec, f.data.pop, f.data.data, f.artifact.theta_hat, stats, a.sims, gc);
  const fs::path out(a.out);
  std::ostringstream env;
  write_gof_csv(env, refs);
  io::write_file_atomic(out / "gof.csv", env.str());

  Json summary;
  summary["software"] = software_json();
  summary["fit_config_hash"] = f.artifact.config_hash;
  summary["seed"] = a.seed;
  summary["sims"] = a.sims;
  summary["burn_in"] = a.burn_in;
  summary["thin"] = a.thin;
  std::ostringstream cfg;
  cfg << f.artifact.config_hash << '|' << a.sims << '|' << a.burn_in << '|' << a.thin << '|' << a.split_size;
  for (const auto& s : a.stats) cfg << '|' << s;
  summary["config_hash"] = io::content_hash(cfg.str());
  for (const auto& r : refs) summary["inside_envelope"][gof_statistic_name(r.statistic)] = r.all_inside();
  if (f.spec.family().kind == FamilyKind::bernoulli) {
    const auto labels = binary_labels(f.data.data.responses);
    const auto joint_p = to_std(predict_response_probs(f.spec, f.data.pop, f.data.data, f.artifact.theta_hat));
    const auto base_p = to_std(fit_baseline(f.spec, f.data.pop, f.data.data).probabilities());
    const RocCurve joint = roc_auc(joint_p, labels);
    const RocCurve base = roc_auc(base_p, labels);
    std::vector<std::pair<std::string, RocCurve>> curves{{"joint", joint}, {"baseline", base}};
    summary["auc"] = {{"joint", joint.auc}, {"baseline", base.auc}};
    std::cout << "AUC joint " << joint.auc << ", baseline " << base.auc << '\n';
    if (a.split_size > 0) {
      const NeighborhoodSizeSplit split = split_by_neighborhood_size(f.data.pop, a.split_size);
      for (const auto& [group, idx] : {std::pair{std::string("small"), split.small}, std::pair{std::string("large"), split.large}}) {
        const auto sub = take(labels, idx);
        const auto n_pos = std::count(sub.begin(), sub.end(), 1);
        if (n_pos == 0 || n_pos == static_cast<long>(sub.size())) {
          std::cerr << "warning: the " << group << " neighborhood group has a single response class; no ROC\n";
          continue;
        }
        const RocCurve j = roc_auc(take(joint_p, idx), sub);
        const RocCurve b = roc_auc(take(base_p, idx), sub);
        curves.emplace_back("joint_" + group, j);
        curves.emplace_back("baseline_" + group, b);
        summary["auc_by_neighborhood_size"][group] = {{"units", sub.size()}, {"joint", j.auc}, {"baseline", b.auc}};
        std::cout << "AUC (" << group << " neighborhoods) joint " << j.auc << ", baseline " << b.auc << '\n';
      }
      summary["split_size"] = a.split_size;
    }
    std::ostringstream roc;
    write_roc_csv(roc, curves);
    io::write_file_atomic(out / "roc.csv", roc.str());
  }
  io::write_json_atomic(out / "gof.json", summary);
  for (const auto& r : refs) {
    std::cout << gof_statistic_name(r.statistic) << ": observed " << (r.all_inside() ? "inside" : "outside")
              << " the 90% envelope\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// study
// ---------------------------------------------------------------------------

struct StudyArgs {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  int threads = 0;
};

int cmd_study(const StudyArgs& a) {
  const Json j = io::read_json(a.config);
  SimStudyConfig cfg = io::study_config_from_json(j);
  cfg.seed = a.seed;
  cfg.threads = resolve_threads(a.threads);
  const std::string config_hash = io::content_hash(j.dump());
  const fs::path out(a.out);
  const fs::path manifest_path = out / "manifest.json";
  if (fs::exists(manifest_path)) {
    const Json old = io::read_json(manifest_path);
    if (old.value("config_hash", "") != config_hash || old.value("seed", std::uint64_t{0}) != a.seed) {
      throw ValidationError(out.string() + " holds a study with a different configuration or seed");
    }
  }
  Json manifest;
  manifest["software"] = software_json();
  manifest["seed"] = a.seed;
  manifest["config_hash"] = config_hash;
  manifest["config"] = j;
  manifest["status"] = "running";
  io::write_json_atomic(manifest_path, manifest);

  io::prune_study_outputs(out);
  std::set<std::pair<int, int>> done;
  for (const auto& r : io::read_study_records(out)) done.insert({r.n, r.rep});
  const auto fresh = run_simulation_study(
      cfg,
      [&](const ReplicationRecord& r) {
        io::append_study_record(out, r);
        std::cout << "N=" << r.n << " rep=" << r.rep << (r.ok ? "" : " FAILED: " + r.error) << " (" << r.seconds
                  << " s)\n";
      },
      [&](int n, int rep) { return done.count({n, rep}) > 0; });

  const auto all = io::read_study_records(out);
  int failed = 0;
  for (const auto& r : all) failed += r.ok ? 0 : 1;
  manifest["status"] = "complete";
  manifest["replications_completed"] = all.size();
  manifest["replications_failed"] = failed;
  manifest["replications_resumed"] = done.size();
  io::write_json_atomic(manifest_path, manifest);
  std::cout << all.size() << " replications recorded (" << fresh.size() << " new, " << failed << " failed)\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// enumerate (debugging aid)
// ---------------------------------------------------------------------------

int cmd_enumerate(const std::string& config) {
  const io::SimulateConfig cfg = io::simulate_config_from_json(io::read_json(config));
  if (cfg.theta1_random) throw ValidationError("config field 'theta1': enumeration needs explicit values");
  const ModelSpec spec = make_model(cfg.model, cfg.family, cfg.n);
  const Population pop = cfg.neighborhoods.empty() ? complete_population(cfg.n) : Population(cfg.neighborhoods);
  Eigen::MatrixXd x(cfg.n, static_cast<Eigen::Index>(cfg.covariates.size()));
  for (int i = 0; i < cfg.n; ++i) {
    for (std::size_t m = 0; m < cfg.covariates.size(); ++m) {
      if (cfg.covariates[m].kind != io::CovariateColumn::Kind::uniform || cfg.covariates[m].a != cfg.covariates[m].b) {
        throw ValidationError("config field 'covariates': enumeration needs constant columns (uniform with lo = hi)");
      }
      x(i, static_cast<Eigen::Index>(m)) = cfg.covariates[m].a;
    }
  }
  Eigen::VectorXd theta(spec.n_params());
  theta << cfg.theta1, cfg.theta2;
  const auto e = oracle::enumerate_joint(spec, pop, x, theta);
  std::vector<double> py(static_cast<std::size_t>(cfg.n), 0.0);
  std::vector<double> pz(e.slots.size(), 0.0);
  for (std::uint32_t s = 0; s < e.states(); ++s) {
    const double p = e.probability(s);
    for (int i = 0; i < cfg.n; ++i) py[static_cast<std::size_t>(i)] += ((s >> i) & 1U) ? p : 0.0;
    for (std::size_t k = 0; k < e.slots.size(); ++k) pz[k] += ((s >> (cfg.n + static_cast<int>(k))) & 1U) ? p : 0.0;
  }
  Json out;
  out["states"] = e.states();
  out["log_partition"] = e.log_phi;
  out["p_response"] = py;
  Json edges = Json::array();
  for (std::size_t k = 0; k < e.slots.size(); ++k) {
    edges.push_back({{"src", e.slots[k].first + 1}, {"dst", e.slots[k].second + 1}, {"p", pz[k]}});
  }
  out["p_edge"] = edges;
  std::cout << out.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint network and response regression: simulate, fit, standard errors, goodness of fit, studies"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(io::kSoftwareName) + " " + io::kSoftwareVersion);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Draw one dataset from the joint model");
  s->add_option("config", sim.config, "Simulation config (JSON)")->required()->check(CLI::ExistingFile);
  s->add_option("--seed", sim.seed, "Random seed")->required();
  s->add_option("--out", sim.out, "Output directory")->required();

  FitArgs fa;
  auto* f = app.add_subcommand("fit", "Maximum pseudo-likelihood fit");
  f->add_option("--data", fa.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  f->add_option("--model", fa.model, "Model id")
      ->required()
      ->check(CLI::IsMember({std::string(kUndirectedExampleId), std::string(kDirectedApplicationId)}));
  f->add_option("--family", fa.family, "Response family")
      ->capture_default_str()
      ->check(CLI::IsMember({"bernoulli", "poisson", "gaussian"}));
  f->add_option("--psi", fa.psi, "Gaussian variance")->capture_default_str();
  f->add_option("--out", fa.out, "Output fit artifact (JSON)")->required();
  f->add_option("--max-iters", fa.options.max_iters, "Iteration cap")->capture_default_str()->check(CLI::PositiveNumber);
  f->add_option("--step-tol", fa.options.step_tol, "Parameter step tolerance")->capture_default_str();
  f->add_option("--loglik-tol", fa.options.loglik_tol, "Relative pseudo-loglikelihood tolerance")->capture_default_str();
  f->add_flag("--no-quasi-newton", fa.no_quasi_newton, "Use plain MM steps for the nuisance block");
  f->add_flag("--warm-start", fa.warm_start, "Start from density and independence-GLM estimates");

  SeArgs se;
  auto* e = app.add_subcommand("se", "Add Godambe standard errors and intervals to a fit artifact");
  e->add_option("--fit", se.fit, "Fit artifact (JSON)")->required()->check(CLI::ExistingFile);
  e->add_option("--out", se.out, "Output artifact (default: overwrite --fit)");
  e->add_option("--seed", se.seed, "Random seed")->required();
  e->add_option("--draws", se.godambe.draws, "Monte Carlo datasets")->capture_default_str();
  e->add_option("--burn-in", se.godambe.burn_in, "Gibbs burn-in sweeps")->capture_default_str();
  e->add_option("--thin", se.godambe.thin, "Sweeps between retained datasets")->capture_default_str();
  e->add_flag("--independent-chains", se.godambe.independent_chains, "One chain per Monte Carlo dataset");
  e->add_option("--level", se.level, "Confidence level")->capture_default_str();
  e->add_option("--threads", se.threads, "Worker threads (default: NETINFER_THREADS or all cores)");

  GofArgs ga;
  auto* g = app.add_subcommand("gof", "Simulation envelopes and ROC curves for a fitted model");
  g->add_option("--fit", ga.fit, "Fit artifact (JSON)")->required()->check(CLI::ExistingFile);
  g->add_option("--out", ga.out, "Output directory")->required();
  g->add_option("--seed", ga.seed, "Random seed")->required();
  g->add_option("--sims", ga.sims, "Simulated datasets")->capture_default_str();
  g->add_option("--stats", ga.stats, "edges, shared_partners, spillover_in, spillover_out")->delimiter(',')->capture_default_str();
  g->add_option("--burn-in", ga.burn_in, "Gibbs burn-in sweeps")->capture_default_str();
  g->add_option("--thin", ga.thin, "Sweeps between simulated datasets")->capture_default_str();
  g->add_option("--split-size", ga.split_size, "Also report ROC for units with neighborhood size <= and > this value (0: off)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();

  StudyArgs sa;
  auto* st = app.add_subcommand("study", "Replicated simulate-fit-infer study (resumable)");
  st->add_option("--config", sa.config, "Study config (JSON)")->required()->check(CLI::ExistingFile);
  st->add_option("--out", sa.out, "Output directory")->required();
  st->add_option("--seed", sa.seed, "Random seed")->required();
  st->add_option("--threads", sa.threads, "Worker threads (default: NETINFER_THREADS or all cores)");

  std::string enum_config;
  auto* en = app.add_subcommand("enumerate", "Exact marginals of a tiny model by enumeration");
  en->group("");
  en->add_option("config", enum_config, "Config with explicit theta1 and constant covariates")
      ->required()
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*s) return cmd_simulate(sim);
    if (*f) return cmd_fit(fa);
    if (*e) return cmd_se(se);
    if (*g) return cmd_gof(ga);
    if (*st) return cmd_study(sa);
    if (*en) return cmd_enumerate(enum_config);
  } catch (const ValidationError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitValidation;
  } catch (const NumericalError& err) {
    std::cerr << "numerical failure: " << err.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitOther;
  }
  return kExitOther;
}
