#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "netinfer/io.hpp"

namespace fs = std::filesystem;
using netinfer::io::Json;

namespace {

struct RunResult {
  int code = -1;
  std::string output;
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(NETINFER_CLI_PATH) + " " + args + " 2>&1";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  char buf[4096];
  while (std::fgets(buf, sizeof(buf), pipe) != nullptr) r.output += buf;
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("netinfer_cli_" + std::string(::testing::UnitTest::GetInstance()
                                                                          ->current_test_info()
                                                                          ->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  [[nodiscard]] std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(dir_ / name) << text;
    return path(name);
  }

  fs::path dir_;
};

const char* kDesignConfig = R"({
  "model": "undirected-example", "n": 250,
  "theta1": {"mean": -1.4, "sd": 0.2},
  "theta2": {"lambda": 0.3, "alpha_y": -2, "beta_xy": 2, "gamma_zz": 0.2, "gamma_xyz": 0.1, "gamma_yyz": 0.1},
  "covariates": [{"type": "uniform", "lo": 0, "hi": 1}],
  "burn_in": 1000})";

const char* kSmallConfig = R"({
  "model": "undirected-example", "n": 100,
  "theta1": {"mean": -0.8, "sd": 0.2},
  "theta2": [0.3, -1, 1, 0.2, 0.1, 0.1],
  "burn_in": 300})";

std::string slurp(const std::string& p) { return netinfer::io::read_file(p); }

}  // namespace

TEST_F(CliTest, SimulateIsByteIdenticalForAFixedSeed) {
  const std::string cfg = write("sim.json", kSmallConfig);
  ASSERT_EQ(run("simulate " + cfg + " --seed 42 --out " + path("a")).code, 0);
  ASSERT_EQ(run("simulate " + cfg + " --seed 42 --out " + path("b")).code, 0);
  ASSERT_EQ(run("simulate " + cfg + " --seed 43 --out " + path("c")).code, 0);
  for (const char* f : {"nodes.csv", "edges.csv", "neighborhoods.json", "truth.json"}) {
    EXPECT_EQ(slurp(path("a/") + f), slurp(path("b/") + f)) << f;
  }
  EXPECT_NE(slurp(path("a/edges.csv")), slurp(path("c/edges.csv")));
  const Json truth = netinfer::io::read_json(path("a/truth.json"));
  EXPECT_EQ(truth["seed"], 42);
  EXPECT_TRUE(truth.contains("config_hash"));
  EXPECT_EQ(truth["theta"]["gamma_zz"], 0.2);
}

TEST_F(CliTest, SimulateDesignConfigHasAboutThirtyConnectionsPerUnit) {
  const std::string cfg = write("sim.json", kDesignConfig);
  ASSERT_EQ(run("simulate " + cfg + " --seed 1 --out " + path("d")).code, 0);
  const auto nodes = netinfer::io::read_csv(path("d/nodes.csv"));
  EXPECT_EQ(nodes.rows.size(), 250U);
  const auto edges = netinfer::io::read_csv(path("d/edges.csv"));
  const double target = 250.0 * 30.0 / 2.0;
  EXPECT_NEAR(static_cast<double>(edges.rows.size()), target, 0.2 * target);
}

TEST_F(CliTest, MalformedConfigNamesTheField) {
  const std::string cfg = write("bad.json", R"({"n": 100, "theta2": [0, 0, 0, 0, 0, 0], "burn_in": "long"})");
  const RunResult r = run("simulate " + cfg + " --seed 1 --out " + path("o"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("'burn_in'"), std::string::npos) << r.output;
  const RunResult syntax = run("simulate " + write("worse.json", "{\"n\": ") + " --seed 1 --out " + path("o"));
  EXPECT_EQ(syntax.code, 2);
  EXPECT_NE(syntax.output.find("invalid JSON"), std::string::npos);
  EXPECT_EQ(run("simulate " + cfg + " --out " + path("o")).code, 2);
}

TEST_F(CliTest, FitRecoversInteractionWeightsWithinThreeStandardErrors) {
  const std::string cfg = write("sim.json", kDesignConfig);
  ASSERT_EQ(run("simulate " + cfg + " --seed 5 --out " + path("d")).code, 0);
  const RunResult fit = run("fit --data " + path("d") + " --model undirected-example --out " + path("fit.json"));
  ASSERT_EQ(fit.code, 0) << fit.output;
  ASSERT_EQ(run("fit --data " + path("d") + " --model undirected-example --out " + path("fit2.json")).code, 0);
  EXPECT_EQ(slurp(path("fit.json")), slurp(path("fit2.json")));
  const RunResult se = run("se --fit " + path("fit.json") + " --seed 9 --draws 500 --threads 1");
  ASSERT_EQ(se.code, 0) << se.output;
  const Json art = netinfer::io::read_json(path("fit.json"));
  const Json truth = netinfer::io::read_json(path("d/truth.json"));
  EXPECT_TRUE(art["convergence"]["converged"].get<bool>());
  int checked = 0;
  for (const auto& p : art["parameters"]) {
    const std::string name = p["name"];
    if (name.rfind("alpha_z.", 0) == 0) continue;
    const double err = std::abs(p["estimate"].get<double>() - truth["theta"][name].get<double>());
    EXPECT_LE(err, 3.0 * p["se"].get<double>()) << name;
    ++checked;
  }
  EXPECT_EQ(checked, 6);
}

TEST_F(CliTest, FitRejectsDirectedModelOnUndirectedData) {
  const std::string cfg = write("sim.json", kSmallConfig);
  ASSERT_EQ(run("simulate " + cfg + " --seed 1 --out " + path("d")).code, 0);
  const RunResult r = run("fit --data " + path("d") + " --model directed-application --out " + path("f.json"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("covariate columns"), std::string::npos) << r.output;
  std::ofstream(path("d/edges.csv"), std::ios::app) << "7,3\n";
  const RunResult bad = run("fit --data " + path("d") + " --model undirected-example --out " + path("f.json"));
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.output.find("edges.csv line"), std::string::npos) << bad.output;
  EXPECT_EQ(run("fit --data " + path("d") + " --model star --out " + path("f.json")).code, 2);
}

TEST_F(CliTest, StandardErrorsAreDeterministicAndValidated) {
  ASSERT_EQ(run("simulate " + write("sim.json", kSmallConfig) + " --seed 2 --out " + path("d")).code, 0);
  ASSERT_EQ(run("fit --data " + path("d") + " --model undirected-example --out " + path("f.json")).code, 0);
  ASSERT_EQ(run("se --fit " + path("f.json") + " --seed 4 --draws 50 --thin 2 --out " + path("a.json")).code, 0);
  ASSERT_EQ(run("se --fit " + path("f.json") + " --seed 4 --draws 50 --thin 2 --threads 2 --out " + path("b.json")).code, 0);
  EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
  const Json a = netinfer::io::read_json(path("a.json"));
  EXPECT_EQ(a["standard_errors"]["seed"], 4);
  EXPECT_EQ(a["standard_errors"]["draws"], 50);
  EXPECT_TRUE(a["parameters"][0].contains("ci_lo"));
  EXPECT_EQ(run("se --fit " + path("f.json") + " --draws 50").code, 2);
  EXPECT_EQ(run("se --fit " + path("f.json") + " --seed 1 --draws 1").code, 2);
  EXPECT_EQ(run("se --fit " + path("missing.json") + " --seed 1").code, 2);
}

TEST_F(CliTest, GofWritesEnvelopesAndRoc) {
  ASSERT_EQ(run("simulate " + write("sim.json", kSmallConfig) + " --seed 3 --out " + path("d")).code, 0);
  ASSERT_EQ(run("fit --data " + path("d") + " --model undirected-example --out " + path("f.json")).code, 0);
  const RunResult g = run("gof --fit " + path("f.json") + " --seed 5 --sims 40 --burn-in 100 --thin 5 --stats edges,shared_partners --out " +
                          path("g"));
  ASSERT_EQ(g.code, 0) << g.output;
  const auto env = netinfer::io::read_csv(path("g/gof.csv"));
  EXPECT_EQ(env.header, (std::vector<std::string>{"statistic", "k", "observed", "q05", "median", "q95"}));
  ASSERT_FALSE(env.rows.empty());
  EXPECT_EQ(env.rows[0][0], "edges");
  const double observed = std::stod(env.rows[0][2]);
  EXPECT_EQ(observed, static_cast<double>(netinfer::io::read_csv(path("d/edges.csv")).rows.size()));
  // a model fitted to the data brackets its own edge count
  EXPECT_LE(std::stod(env.rows[0][3]), observed);
  EXPECT_GE(std::stod(env.rows[0][5]), observed);
  const auto roc = netinfer::io::read_csv(path("g/roc.csv"));
  EXPECT_EQ(roc.header, (std::vector<std::string>{"model", "threshold", "fpr", "tpr"}));
  const Json summary = netinfer::io::read_json(path("g/gof.json"));
  EXPECT_EQ(summary["seed"], 5);
  EXPECT_GT(summary["auc"]["joint"].get<double>(), 0.5);

  const RunResult split = run("gof --fit " + path("f.json") + " --seed 5 --sims 0 --stats edges --split-size 60 --out " + path("g3"));
  ASSERT_EQ(split.code, 0) << split.output;
  const Json by_size = netinfer::io::read_json(path("g3/gof.json"))["auc_by_neighborhood_size"];
  std::size_t units = 0;
  for (const auto& [group, v] : by_size.items()) units += v["units"].get<std::size_t>();
  EXPECT_EQ(units, 100U);
  std::set<std::string> models;
  for (const auto& row : netinfer::io::read_csv(path("g3/roc.csv")).rows) models.insert(row[0]);
  for (const auto& [group, v] : by_size.items()) EXPECT_TRUE(models.count("joint_" + group)) << group;

  const RunResult bad = run("gof --fit " + path("f.json") + " --seed 5 --stats degree --out " + path("g2"));
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.output.find("unknown GOF statistic"), std::string::npos);
}

TEST_F(CliTest, StudySmokeRunAndResume) {
  const std::string cfg = write(
      "study.json", R"({"sizes": [50], "replications": 3, "burn_in": 100, "godambe": {"draws": 30, "burn_in": 20, "thin": 2}})");
  const RunResult r = run("study --config " + cfg + " --seed 8 --threads 2 --out " + path("s"));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto results = netinfer::io::read_csv(path("s/results.csv"));
  EXPECT_EQ(results.rows.size(), 3U * (50 + 6));
  EXPECT_EQ(results.header.size(), 9U);
  EXPECT_EQ(netinfer::io::read_csv(path("s/replications.csv")).rows.size(), 3U);
  const Json manifest = netinfer::io::read_json(path("s/manifest.json"));
  EXPECT_EQ(manifest["status"], "complete");
  EXPECT_EQ(manifest["seed"], 8);
  const std::string full = slurp(path("s/results.csv"));

  // drop the record of one replication and resume
  const std::string reps = slurp(path("s/replications.csv"));
  std::string kept;
  std::istringstream in(reps);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("50,1,", 0) != 0) kept += line + "\n";
  }
  std::ofstream(path("s/replications.csv"), std::ios::trunc) << kept;
  const RunResult again = run("study --config " + cfg + " --seed 8 --threads 1 --out " + path("s"));
  ASSERT_EQ(again.code, 0) << again.output;
  EXPECT_NE(again.output.find("1 new"), std::string::npos) << again.output;
  const auto resumed = netinfer::io::read_study_records(path("s"));
  const auto original = [&] {
    const fs::path copy = path("orig");
    fs::create_directories(copy);
    std::ofstream(copy / "results.csv") << full;
    std::ofstream(copy / "replications.csv") << reps;
    return netinfer::io::read_study_records(copy);
  }();
  ASSERT_EQ(resumed.size(), 3U);
  for (const auto& o : original) {
    bool found = false;
    for (const auto& n : resumed) {
      if (n.n == o.n && n.rep == o.rep) {
        found = true;
        EXPECT_EQ(n.theta_hat, o.theta_hat) << o.rep;
      }
    }
    EXPECT_TRUE(found);
  }
  EXPECT_EQ(run("study --config " + cfg + " --seed 9 --out " + path("s")).code, 2);
}

TEST_F(CliTest, StudyRejectsEmptySizes) {
  const RunResult r = run("study --config " + write("study.json", R"({"sizes": []})") + " --seed 1 --out " + path("s"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("'sizes'"), std::string::npos);
}

TEST_F(CliTest, HiddenEnumerationAgreesWithItsInputs) {
  const std::string cfg = write("enum.json", R"({
    "n": 3, "neighborhoods": [[1, 2], [1, 2, 3], [2, 3]],
    "theta1": [-0.5, 0.2, 0.1], "theta2": [0.3, -0.4, 0.8, 0.5, 0.2, -0.3],
    "covariates": [{"type": "uniform", "lo": 1, "hi": 1}]})");
  const RunResult r = run("enumerate " + cfg);
  ASSERT_EQ(r.code, 0) << r.output;
  const Json j = Json::parse(r.output);
  EXPECT_EQ(j["states"], 64);
  EXPECT_EQ(j["p_edge"].size(), 3U);
  EXPECT_EQ(run("--help").output.find("enumerate"), std::string::npos);
}
