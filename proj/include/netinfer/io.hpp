#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "netinfer/errors.hpp"
#include "netinfer/inference.hpp"
#include "netinfer/model.hpp"
#include "netinfer/optimizer.hpp"
#include "netinfer/study.hpp"

namespace netinfer::io {

using Json = nlohmann::json;

inline constexpr const char* kSoftwareName = "netinfer";
inline constexpr const char* kSoftwareVersion = "0.1.0";

/// Failure to read or write a file.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes `content` to a sibling temporary file and renames it over `p`.
inline void write_file_atomic(const std::filesystem::path& p, const std::string& content) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::filesystem::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, p);
}

inline Json read_json(const std::filesystem::path& p) {
  const std::string text = read_file(p);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ValidationError(p.string() + ": invalid JSON: " + e.what());
  }
}

inline void write_json_atomic(const std::filesystem::path& p, const Json& j) { write_file_atomic(p, j.dump(2) + "\n"); }

/// 64-bit FNV-1a digest as 16 hex digits.
inline std::string content_hash(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << h;
  return ss.str();
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Splits one CSV line; fields may be double-quoted with "" as an escaped quote.
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        cur += '"';
        ++k;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_numbers;  // 1-based source line of each row
};

inline CsvTable read_csv(const std::filesystem::path& p) {
  std::istringstream in(read_file(p));
  CsvTable t;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw ValidationError(p.filename().string() + " line " + std::to_string(line_no) + ": expected " +
                            std::to_string(t.header.size()) + " fields, found " + std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(line_no);
  }
  if (t.header.empty()) throw ValidationError(p.filename().string() + ": missing header");
  return t;
}

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

inline double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const char* last = s.data() + s.size();
  const auto res = std::from_chars(s.data(), last, v);
  if (s.empty() || res.ec == std::errc::invalid_argument || res.ptr != last) {
    throw ValidationError(where + ": '" + s + "' is not a number");
  }
  if (res.ec == std::errc::result_out_of_range) throw ValidationError(where + ": '" + s + "' is out of range");
  return v;
}

inline int parse_int(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const long v = std::stol(s, &used);
    if (used != s.size() || v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
      throw std::invalid_argument(s);
    }
    return static_cast<int>(v);
  } catch (const std::exception&) {
    throw ValidationError(where + ": '" + s + "' is not an integer");
  }
}

// ---------------------------------------------------------------------------
// Dataset directory: nodes.csv, edges.csv, neighborhoods.json
// ---------------------------------------------------------------------------

/// nodes.csv: unit_id,x1..xd,y with 1-based ids, one row per unit in id order.
inline std::string nodes_csv(const Dataset& d) {
  std::ostringstream os;
  os << "unit_id";
  for (Eigen::Index m = 0; m < d.covariates.cols(); ++m) os << ",x" << (m + 1);
  os << ",y\n";
  for (int i = 0; i < d.size(); ++i) {
    os << (i + 1);
    for (Eigen::Index m = 0; m < d.covariates.cols(); ++m) os << ',' << format_double(d.covariates(i, m));
    os << ',' << format_double(d.responses[i]) << '\n';
  }
  return os.str();
}

/// edges.csv: src,dst with 1-based ids; undirected edges once with src < dst.
inline std::string edges_csv(const Network& z) {
  std::ostringstream os;
  os << "src,dst\n";
  for (const auto& [i, j] : z.edges()) os << (i + 1) << ',' << (j + 1) << '\n';
  return os.str();
}

/// {"1": [1, 2], "2": [1, 2, 3], ...}: unit id to its sorted neighborhood.
inline Json neighborhoods_json(const Population& pop) {
  Json j = Json::object();
  for (int i = 0; i < pop.size(); ++i) {
    std::vector<int> ids;
    for (int k : pop.neighborhood(i)) ids.push_back(k + 1);
    j[std::to_string(i + 1)] = ids;
  }
  return j;
}

inline void write_dataset(const std::filesystem::path& dir, const Population& pop, const Dataset& d) {
  write_file_atomic(dir / "nodes.csv", nodes_csv(d));
  write_file_atomic(dir / "edges.csv", edges_csv(d.network));
  write_json_atomic(dir / "neighborhoods.json", neighborhoods_json(pop));
}

struct LoadedData {
  Population pop;
  Dataset data;
};

/**
 * @brief Reads a dataset directory for a network of the given orientation.
 *
 * Every schema violation names the file and, for CSV input, the line.
 */
inline LoadedData read_dataset(const std::filesystem::path& dir, bool directed) {
  const CsvTable nodes = read_csv(dir / "nodes.csv");
  const auto& h = nodes.header;
  if (h.size() < 2 || h.front() != "unit_id" || h.back() != "y") {
    throw ValidationError("nodes.csv: header must be unit_id,x1,...,xd,y");
  }
  const int d = static_cast<int>(h.size()) - 2;
  for (int m = 0; m < d; ++m) {
    if (h[static_cast<std::size_t>(m + 1)] != "x" + std::to_string(m + 1)) {
      throw ValidationError("nodes.csv: covariate column " + std::to_string(m + 1) + " must be named x" +
                            std::to_string(m + 1));
    }
  }
  const int n = static_cast<int>(nodes.rows.size());
  if (n < 2) throw ValidationError("nodes.csv: need at least 2 units");
  LoadedData out;
  out.data.covariates.resize(n, d);
  out.data.responses.resize(n);
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (int r = 0; r < n; ++r) {
    const auto& row = nodes.rows[static_cast<std::size_t>(r)];
    const std::string where = "nodes.csv line " + std::to_string(nodes.line_numbers[static_cast<std::size_t>(r)]);
    const int id = parse_int(row[0], where + " unit_id");
    if (id < 1 || id > n) throw ValidationError(where + ": unit_id " + std::to_string(id) + " outside 1.." + std::to_string(n));
    if (seen[static_cast<std::size_t>(id - 1)]) throw ValidationError(where + ": duplicate unit_id " + std::to_string(id));
    seen[static_cast<std::size_t>(id - 1)] = true;
    for (int m = 0; m < d; ++m) {
      out.data.covariates(id - 1, m) = parse_double(row[static_cast<std::size_t>(m + 1)], where + " x" + std::to_string(m + 1));
    }
    out.data.responses[id - 1] = parse_double(row.back(), where + " y");
  }

  out.data.network = Network(n, directed);
  const CsvTable edges = read_csv(dir / "edges.csv");
  if (edges.header != std::vector<std::string>{"src", "dst"}) throw ValidationError("edges.csv: header must be src,dst");
  for (std::size_t r = 0; r < edges.rows.size(); ++r) {
    const std::string where = "edges.csv line " + std::to_string(edges.line_numbers[r]);
    const int s = parse_int(edges.rows[r][0], where + " src");
    const int t = parse_int(edges.rows[r][1], where + " dst");
    if (s < 1 || s > n || t < 1 || t > n) throw ValidationError(where + ": unit id outside 1.." + std::to_string(n));
    if (s == t) throw ValidationError(where + ": self-connection " + std::to_string(s));
    if (!directed && s > t) {
      throw ValidationError(where + ": undirected edges must be stored once with src < dst (found " + std::to_string(s) +
                            "," + std::to_string(t) + ")");
    }
    if (out.data.network.has_edge(s - 1, t - 1)) throw ValidationError(where + ": duplicate edge");
    out.data.network.set_edge(s - 1, t - 1, true);
  }

  const Json nb = read_json(dir / "neighborhoods.json");
  if (!nb.is_object()) throw ValidationError("neighborhoods.json: expected an object mapping unit_id to a list");
  std::vector<std::vector<int>> hoods(static_cast<std::size_t>(n));
  std::vector<bool> have(static_cast<std::size_t>(n), false);
  for (const auto& [key, val] : nb.items()) {
    const int id = parse_int(key, "neighborhoods.json key");
    if (id < 1 || id > n) throw ValidationError("neighborhoods.json: unit_id " + key + " outside 1.." + std::to_string(n));
    if (!val.is_array()) throw ValidationError("neighborhoods.json: entry " + key + " is not a list");
    for (const auto& v : val) {
      if (!v.is_number_integer()) throw ValidationError("neighborhoods.json: entry " + key + " holds a non-integer");
      const int k = v.get<int>();
      if (k < 1 || k > n) throw ValidationError("neighborhoods.json: entry " + key + " references unit " + std::to_string(k));
      hoods[static_cast<std::size_t>(id - 1)].push_back(k - 1);
    }
    have[static_cast<std::size_t>(id - 1)] = true;
  }
  for (int i = 0; i < n; ++i) {
    if (!have[static_cast<std::size_t>(i)]) throw ValidationError("neighborhoods.json: no entry for unit " + std::to_string(i + 1));
  }
  try {
    out.pop = Population(std::move(hoods));
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("neighborhoods.json: ") + e.what());
  }
  return out;
}

/// Digest of the three dataset files, in a fixed order.
inline std::string dataset_hash(const std::filesystem::path& dir) {
  return content_hash(read_file(dir / "nodes.csv") + '\x1f' + read_file(dir / "edges.csv") + '\x1f' +
                      read_file(dir / "neighborhoods.json"));
}

// ---------------------------------------------------------------------------
// Named parameter vectors
// ---------------------------------------------------------------------------

inline Json named_vector(const std::vector<std::string>& names, const Eigen::VectorXd& v) {
  Json j = Json::object();
  for (std::size_t k = 0; k < names.size(); ++k) j[names[k]] = v[static_cast<Eigen::Index>(k)];
  return j;
}

/// Reads a name -> value object (all names required) or a plain array in layout order.
inline Eigen::VectorXd vector_from_json(const Json& j, const std::vector<std::string>& names, const std::string& field) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(names.size()));
  if (j.is_array()) {
    if (j.size() != names.size()) {
      throw ValidationError("field '" + field + "': expected " + std::to_string(names.size()) + " values, found " +
                            std::to_string(j.size()));
    }
    for (std::size_t k = 0; k < names.size(); ++k) {
      if (!j[k].is_number()) throw ValidationError("field '" + field + "[" + std::to_string(k) + "]': expected a number");
      v[static_cast<Eigen::Index>(k)] = j[k].get<double>();
    }
    return v;
  }
  if (!j.is_object()) throw ValidationError("field '" + field + "': expected an object or array");
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (!j.contains(names[k])) throw ValidationError("field '" + field + "." + names[k] + "' is missing");
    if (!j[names[k]].is_number()) throw ValidationError("field '" + field + "." + names[k] + "': expected a number");
    v[static_cast<Eigen::Index>(k)] = j[names[k]].get<double>();
  }
  for (const auto& [key, val] : j.items()) {
    if (std::find(names.begin(), names.end(), key) == names.end()) {
      throw ValidationError("field '" + field + "." + key + "' is not a parameter of the model");
    }
  }
  return v;
}

// ---------------------------------------------------------------------------
// Fit artifact
// ---------------------------------------------------------------------------

struct SeSection {
  int draws = 0;
  std::uint64_t seed = 0;
  int burn_in = 0;
  int thin = 0;
  bool independent_chains = false;
  double level = 0.95;
  bool ridge_used = false;
  Eigen::VectorXd se;
  std::vector<Interval> intervals;
  Eigen::MatrixXd covariance;

  friend bool operator==(const SeSection& a, const SeSection& b) {
    if (a.intervals.size() != b.intervals.size()) return false;
    for (std::size_t k = 0; k < a.intervals.size(); ++k) {
      if (a.intervals[k].lo != b.intervals[k].lo || a.intervals[k].hi != b.intervals[k].hi) return false;
    }
    return a.draws == b.draws && a.seed == b.seed && a.burn_in == b.burn_in && a.thin == b.thin &&
           a.independent_chains == b.independent_chains && a.level == b.level && a.ridge_used == b.ridge_used &&
           a.se == b.se && a.covariance == b.covariance;
  }
};

/**
 * @brief Persisted result of a fit, optionally with Godambe standard errors.
 */
struct FitArtifact {
  std::string model;
  ResponseFamily family;
  int n_units = 0;
  std::string data_dir;
  std::string config_hash;
  std::vector<std::string> names;
  Eigen::VectorXd theta_hat;
  bool converged = false;
  int iterations = 0;
  double initial_loglik = 0.0;
  double final_loglik = 0.0;
  double final_grad_inf_norm = 0.0;
  bool ridge_used = false;
  std::vector<double> loglik_trace;
  std::vector<bool> quasi_newton_steps;
  FitOptions options;
  std::optional<SeSection> se;
  std::string software_version = kSoftwareVersion;

  friend bool operator==(const FitArtifact& a, const FitArtifact& b) {
    return a.model == b.model && a.family == b.family && a.n_units == b.n_units && a.data_dir == b.data_dir &&
           a.config_hash == b.config_hash && a.names == b.names && a.theta_hat == b.theta_hat &&
           a.converged == b.converged && a.iterations == b.iterations && a.initial_loglik == b.initial_loglik &&
           a.final_loglik == b.final_loglik && a.final_grad_inf_norm == b.final_grad_inf_norm &&
           a.ridge_used == b.ridge_used && a.loglik_trace == b.loglik_trace &&
           a.quasi_newton_steps == b.quasi_newton_steps && a.options.max_iters == b.options.max_iters &&
           a.options.step_tol == b.options.step_tol && a.options.loglik_tol == b.options.loglik_tol &&
           a.options.quasi_newton == b.options.quasi_newton && a.options.warm_start == b.options.warm_start &&
           a.se == b.se && a.software_version == b.software_version;
  }
};

/// Non-finite doubles are stored as strings so that they survive JSON.
inline Json json_double(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

inline double double_from_json(const Json& j, const std::string& field) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw ValidationError("field '" + field + "': expected a number");
}

inline Json to_json(const FitArtifact& a) {
  Json j;
  j["software"] = {{"name", kSoftwareName}, {"version", a.software_version}};
  j["model"] = a.model;
  j["family"] = std::string(family_name(a.family.kind));
  j["psi"] = a.family.psi;
  j["n_units"] = a.n_units;
  j["data_dir"] = a.data_dir;
  j["config_hash"] = a.config_hash;
  Json params = Json::array();
  for (std::size_t k = 0; k < a.names.size(); ++k) {
    Json p{{"name", a.names[k]}, {"estimate", json_double(a.theta_hat[static_cast<Eigen::Index>(k)])}};
    if (a.se) {
      p["se"] = json_double(a.se->se[static_cast<Eigen::Index>(k)]);
      p["ci_lo"] = json_double(a.se->intervals[k].lo);
      p["ci_hi"] = json_double(a.se->intervals[k].hi);
    }
    params.push_back(p);
  }
  j["parameters"] = params;
  Json trace = Json::array();
  for (std::size_t k = 0; k < a.loglik_trace.size(); ++k) {
    trace.push_back({{"loglik", json_double(a.loglik_trace[k])}, {"quasi_newton", static_cast<bool>(a.quasi_newton_steps[k])}});
  }
  j["convergence"] = {{"converged", a.converged},
                      {"iterations", a.iterations},
                      {"initial_loglik", json_double(a.initial_loglik)},
                      {"final_loglik", json_double(a.final_loglik)},
                      {"final_grad_inf_norm", json_double(a.final_grad_inf_norm)},
                      {"ridge_used", a.ridge_used},
                      {"trace", trace}};
  j["options"] = {{"max_iters", a.options.max_iters},
                  {"step_tol", a.options.step_tol},
                  {"loglik_tol", a.options.loglik_tol},
                  {"quasi_newton", a.options.quasi_newton},
                  {"warm_start", a.options.warm_start}};
  if (a.se) {
    const SeSection& s = *a.se;
    Json cov = Json::array();
    for (Eigen::Index r = 0; r < s.covariance.rows(); ++r) {
      Json row = Json::array();
      for (Eigen::Index c = 0; c < s.covariance.cols(); ++c) row.push_back(json_double(s.covariance(r, c)));
      cov.push_back(row);
    }
    j["standard_errors"] = {{"method", "godambe"},
                            {"draws", s.draws},
                            {"seed", s.seed},
                            {"burn_in", s.burn_in},
                            {"thin", s.thin},
                            {"independent_chains", s.independent_chains},
                            {"level", s.level},
                            {"ridge_used", s.ridge_used},
                            {"covariance", cov}};
  }
  return j;
}

template <class T>
T required(const Json& j, const std::string& key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(where + ": field '" + key + "' is missing");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ValidationError(where + ": field '" + key + "' has the wrong type");
  }
}

inline FitArtifact fit_artifact_from_json(const Json& j) {
  const std::string w = "fit artifact";
  FitArtifact a;
  a.software_version = required<std::string>(required<Json>(j, "software", w), "version", w + " software");
  a.model = required<std::string>(j, "model", w);
  const double psi = required<double>(j, "psi", w);
  a.family = ResponseFamily{parse_family(required<std::string>(j, "family", w)), psi};
  a.family.validate();
  a.n_units = required<int>(j, "n_units", w);
  a.data_dir = required<std::string>(j, "data_dir", w);
  a.config_hash = required<std::string>(j, "config_hash", w);
  const Json params = required<Json>(j, "parameters", w);
  if (!params.is_array()) throw ValidationError(w + ": 'parameters' must be a list");
  a.theta_hat.resize(static_cast<Eigen::Index>(params.size()));
  const Json se_j = j.contains("standard_errors") ? j["standard_errors"] : Json();
  if (!se_j.is_null()) {
    SeSection s;
    s.draws = required<int>(se_j, "draws", w + " standard_errors");
    s.seed = required<std::uint64_t>(se_j, "seed", w + " standard_errors");
    s.burn_in = required<int>(se_j, "burn_in", w + " standard_errors");
    s.thin = required<int>(se_j, "thin", w + " standard_errors");
    s.independent_chains = required<bool>(se_j, "independent_chains", w + " standard_errors");
    s.level = required<double>(se_j, "level", w + " standard_errors");
    s.ridge_used = required<bool>(se_j, "ridge_used", w + " standard_errors");
    const Json cov = required<Json>(se_j, "covariance", w + " standard_errors");
    const auto p = static_cast<Eigen::Index>(params.size());
    if (!cov.is_array() || static_cast<Eigen::Index>(cov.size()) != p) throw ValidationError(w + ": covariance has wrong shape");
    s.covariance.resize(p, p);
    for (Eigen::Index r = 0; r < p; ++r) {
      if (!cov[static_cast<std::size_t>(r)].is_array() || static_cast<Eigen::Index>(cov[static_cast<std::size_t>(r)].size()) != p) {
        throw ValidationError(w + ": covariance has wrong shape");
      }
      for (Eigen::Index c = 0; c < p; ++c) {
        s.covariance(r, c) = double_from_json(cov[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)], "covariance");
      }
    }
    s.se.resize(p);
    s.intervals.resize(static_cast<std::size_t>(p));
    a.se = s;
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Json& p = params[k];
    const std::string pw = w + " parameters[" + std::to_string(k) + "]";
    a.names.push_back(required<std::string>(p, "name", pw));
    a.theta_hat[static_cast<Eigen::Index>(k)] = double_from_json(required<Json>(p, "estimate", pw), pw + ".estimate");
    if (a.se) {
      a.se->se[static_cast<Eigen::Index>(k)] = double_from_json(required<Json>(p, "se", pw), pw + ".se");
      a.se->intervals[k].lo = double_from_json(required<Json>(p, "ci_lo", pw), pw + ".ci_lo");
      a.se->intervals[k].hi = double_from_json(required<Json>(p, "ci_hi", pw), pw + ".ci_hi");
    }
  }
  const Json conv = required<Json>(j, "convergence", w);
  a.converged = required<bool>(conv, "converged", w + " convergence");
  a.iterations = required<int>(conv, "iterations", w + " convergence");
  a.initial_loglik = double_from_json(required<Json>(conv, "initial_loglik", w), "initial_loglik");
  a.final_loglik = double_from_json(required<Json>(conv, "final_loglik", w), "final_loglik");
  a.final_grad_inf_norm = double_from_json(required<Json>(conv, "final_grad_inf_norm", w), "final_grad_inf_norm");
  a.ridge_used = required<bool>(conv, "ridge_used", w + " convergence");
  for (const auto& t : required<Json>(conv, "trace", w + " convergence")) {
    a.loglik_trace.push_back(double_from_json(required<Json>(t, "loglik", w + " trace"), "trace.loglik"));
    a.quasi_newton_steps.push_back(required<bool>(t, "quasi_newton", w + " trace"));
  }
  const Json opt = required<Json>(j, "options", w);
  a.options.max_iters = required<int>(opt, "max_iters", w + " options");
  a.options.step_tol = required<double>(opt, "step_tol", w + " options");
  a.options.loglik_tol = required<double>(opt, "loglik_tol", w + " options");
  a.options.quasi_newton = required<bool>(opt, "quasi_newton", w + " options");
  a.options.warm_start = required<bool>(opt, "warm_start", w + " options");
  return a;
}

inline FitArtifact make_fit_artifact(const ModelSpec& spec, const FitResult& r, const FitOptions& opt,
                                     const std::string& data_dir, const std::string& config_hash) {
  FitArtifact a;
  a.model = spec.id();
  a.family = spec.family();
  a.n_units = spec.n_units();
  a.data_dir = data_dir;
  a.config_hash = config_hash;
  a.names = spec.layout().names;
  a.theta_hat = r.theta_hat;
  a.converged = r.converged;
  a.iterations = r.iterations;
  a.initial_loglik = r.initial_loglik;
  a.final_loglik = r.final_loglik;
  a.final_grad_inf_norm = r.final_grad_inf_norm;
  a.ridge_used = r.ridge_used;
  for (const auto& rec : r.trace) {
    a.loglik_trace.push_back(rec.loglik);
    a.quasi_newton_steps.push_back(rec.quasi_newton_chosen);
  }
  a.options = opt;
  return a;
}

// ---------------------------------------------------------------------------
// Simulation study output
// ---------------------------------------------------------------------------

inline constexpr const char* kStudyResultsHeader = "N,rep,component,theta_star,theta_hat,abs_err,ci_lo,ci_hi,covered";
inline constexpr const char* kStudyReplicationsHeader =
    "N,rep,ok,converged,iterations,mean_degree,max_abs_err,theta2_max_abs_err,seconds,error";

/// Rows of results.csv for one replication; a failed replication has none.
inline std::string study_result_rows(const ReplicationRecord& r) {
  std::ostringstream os;
  if (!r.ok) return {};
  for (std::size_t k = 0; k < r.names.size(); ++k) {
    const auto idx = static_cast<Eigen::Index>(k);
    os << r.n << ',' << r.rep << ',' << r.names[k] << ',' << format_double(r.theta_star[idx]) << ','
       << format_double(r.theta_hat[idx]) << ',' << format_double(std::abs(r.theta_hat[idx] - r.theta_star[idx])) << ',';
    if (!r.intervals.empty()) {
      const Interval& iv = r.intervals[k];
      os << format_double(iv.lo) << ',' << format_double(iv.hi) << ',' << (iv.contains(r.theta_star[idx]) ? 1 : 0);
    } else {
      os << ",,";
    }
    os << '\n';
  }
  return os.str();
}

inline std::string study_replication_row(const ReplicationRecord& r) {
  std::ostringstream os;
  os << r.n << ',' << r.rep << ',' << (r.ok ? 1 : 0) << ',' << (r.converged ? 1 : 0) << ',' << r.iterations << ','
     << format_double(r.mean_degree) << ',' << format_double(r.max_abs_err) << ','
     << format_double(r.ok ? r.theta2_max_abs_err() : std::numeric_limits<double>::quiet_NaN()) << ','
     << format_double(r.seconds) << ',' << csv_quote(r.error) << '\n';
  return os.str();
}

/// Appends one finished replication to both study CSVs, writing headers to new files.
inline void append_study_record(const std::filesystem::path& dir, const ReplicationRecord& r) {
  std::filesystem::create_directories(dir);
  auto append = [](const std::filesystem::path& p, const char* header, const std::string& rows) {
    const bool fresh = !std::filesystem::exists(p) || std::filesystem::file_size(p) == 0;
    std::ofstream out(p, std::ios::app);
    if (!out) throw IoError("cannot append to " + p.string());
    if (fresh) out << header << '\n';
    out << rows;
    out.flush();
  };
  append(dir / "results.csv", kStudyResultsHeader, study_result_rows(r));
  append(dir / "replications.csv", kStudyReplicationsHeader, study_replication_row(r));
}

namespace detail {

/**
 * Row indices of results.csv per (N, rep). A component name that repeats
 * within a replication marks a rerun, and only the rows after it are kept.
 */
inline std::map<std::pair<int, int>, std::vector<std::size_t>> latest_result_rows(const CsvTable& res) {
  std::map<std::pair<int, int>, std::vector<std::size_t>> rows_of;
  std::map<std::pair<int, int>, std::set<std::string>> seen;
  for (std::size_t k = 0; k < res.rows.size(); ++k) {
    const std::string where = "results.csv line " + std::to_string(res.line_numbers[k]);
    const std::pair<int, int> key{parse_int(res.rows[k][0], where), parse_int(res.rows[k][1], where)};
    if (!seen[key].insert(res.rows[k][2]).second) {
      rows_of[key].clear();
      seen[key] = {res.rows[k][2]};
    }
    rows_of[key].push_back(k);
  }
  return rows_of;
}

}  // namespace detail

/**
 * @brief Rewrites results.csv keeping only the latest rows of replications
 * that are listed in replications.csv, so that an interrupted run can resume.
 */
inline void prune_study_outputs(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "results.csv")) return;
  std::set<std::pair<int, int>> complete;
  if (std::filesystem::exists(dir / "replications.csv")) {
    const CsvTable reps = read_csv(dir / "replications.csv");
    for (std::size_t k = 0; k < reps.rows.size(); ++k) {
      const std::string where = "replications.csv line " + std::to_string(reps.line_numbers[k]);
      complete.insert({parse_int(reps.rows[k][0], where), parse_int(reps.rows[k][1], where)});
    }
  }
  const CsvTable res = read_csv(dir / "results.csv");
  std::string text = std::string(kStudyResultsHeader) + "\n";
  for (const auto& [key, rows] : detail::latest_result_rows(res)) {
    if (!complete.count(key)) continue;
    for (std::size_t k : rows) {
      const auto& row = res.rows[k];
      for (std::size_t c = 0; c < row.size(); ++c) text += (c ? "," : "") + csv_quote(row[c]);
      text += '\n';
    }
  }
  write_file_atomic(dir / "results.csv", text);
}

/**
 * @brief Reconstructs study records from results.csv and replications.csv.
 *
 * Replications listed in replications.csv are complete; their parameter rows
 * come from results.csv.
 */
inline std::vector<ReplicationRecord> read_study_records(const std::filesystem::path& dir) {
  std::vector<ReplicationRecord> out;
  if (!std::filesystem::exists(dir / "replications.csv")) return out;
  const CsvTable reps = read_csv(dir / "replications.csv");
  std::map<std::pair<int, int>, std::size_t> index;
  for (std::size_t k = 0; k < reps.rows.size(); ++k) {
    const auto& row = reps.rows[k];
    const std::string where = "replications.csv line " + std::to_string(reps.line_numbers[k]);
    ReplicationRecord r;
    r.n = parse_int(row[0], where);
    r.rep = parse_int(row[1], where);
    r.ok = row[2] == "1";
    r.converged = row[3] == "1";
    r.iterations = parse_int(row[4], where);
    r.mean_degree = parse_double(row[5], where);
    r.max_abs_err = row[6] == "nan" ? std::numeric_limits<double>::quiet_NaN() : parse_double(row[6], where);
    r.seconds = parse_double(row[8], where);
    r.error = row[9];
    index[{r.n, r.rep}] = out.size();
    out.push_back(std::move(r));
  }
  if (!std::filesystem::exists(dir / "results.csv")) return out;
  const CsvTable res = read_csv(dir / "results.csv");
  const auto rows_of = detail::latest_result_rows(res);
  for (auto& r : out) {
    const auto it = rows_of.find({r.n, r.rep});
    if (it == rows_of.end()) continue;
    const auto p = static_cast<Eigen::Index>(it->second.size());
    r.theta_star.resize(p);
    r.theta_hat.resize(p);
    for (Eigen::Index c = 0; c < p; ++c) {
      const auto& row = res.rows[it->second[static_cast<std::size_t>(c)]];
      const std::string where = "results.csv line " + std::to_string(res.line_numbers[it->second[static_cast<std::size_t>(c)]]);
      r.names.push_back(row[2]);
      r.theta_star[c] = parse_double(row[3], where);
      r.theta_hat[c] = parse_double(row[4], where);
      if (!row[6].empty()) r.intervals.push_back({parse_double(row[6], where), parse_double(row[7], where)});
    }
  }
  return out;
}

}  // namespace netinfer::io
