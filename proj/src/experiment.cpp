#include "adm/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <utility>

#include "adm/control.hpp"
#include "adm/equilibrium.hpp"
#include "adm/micro.hpp"
#include "fmt_util.hpp"

namespace adm {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::micro_validate:
      return "micro-validate";
    case ExperimentKind::mf_trajectory:
      return "mf-trajectory";
    case ExperimentKind::error_decay:
      return "error-decay";
    case ExperimentKind::equilibrium_scan:
      return "equilibrium-scan";
    case ExperimentKind::frontier:
      return "frontier";
    case ExperimentKind::optimal_u:
      return "optimal-u";
  }
  return "?";
}

std::optional<ExperimentKind> experiment_from_string(const std::string& name) {
  if (name == "micro-validate") return ExperimentKind::micro_validate;
  if (name == "mf-trajectory") return ExperimentKind::mf_trajectory;
  if (name == "error-decay") return ExperimentKind::error_decay;
  if (name == "equilibrium-scan") return ExperimentKind::equilibrium_scan;
  if (name == "frontier") return ExperimentKind::frontier;
  if (name == "optimal-u") return ExperimentKind::optimal_u;
  return std::nullopt;
}

namespace {

// ---------------------------------------------------------------------------
// raw config: key -> json value (strings when the source was key = value text)

struct RawConfig {
  json obj = json::object();
  std::set<std::string> used;

  bool has(const std::string& key) const { return obj.contains(key); }

  const json& get(const std::string& key) {
    used.insert(key);
    return obj.at(key);
  }
};

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "experiment", "k_agents",  "p",         "lambda",     "u",
      "u_values",   "u_min",     "u_max",     "u_step",     "x0",
      "n0",         "horizon",   "runs",      "seed",       "epsilon",
      "delta_u",    "delta_x",   "x_floor",   "grid_size",  "transient_check",
      "init",       "alpha0",    "beta0",     "alpha_min",  "alpha_max",
      "beta_min",   "beta_max",  "p_min",     "p_max",      "format",
      "output_path"};
  return keys;
}

void reject_leftovers(const RawConfig& raw) {
  for (const auto& item : raw.obj.items()) {
    if (raw.used.count(item.key())) continue;
    if (known_keys().count(item.key()))
      throw ConfigError(item.key(), "key is not used by this experiment");
    throw ConfigError(item.key(), "unknown key");
  }
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

RawConfig parse_kv(const std::string& text) {
  RawConfig raw;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config", "malformed line (expected key = value): " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config", "malformed line (empty key): " + line);
    if (raw.obj.contains(key)) throw ConfigError(key, "duplicate key");
    raw.obj[key] = value;
  }
  return raw;
}

RawConfig parse_json_config(const std::string& text) {
  RawConfig raw;
  json parsed;
  try {
    parsed = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  if (!parsed.is_object()) throw ConfigError("config", "top level must be a JSON object");
  raw.obj = std::move(parsed);
  return raw;
}

// ---------------------------------------------------------------------------
// typed accessors

double as_double(const std::string& key, const json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const std::string& s = v.get_ref<const std::string&>();
    double out = 0.0;
    const char* end = s.data() + s.size();
    auto res = std::from_chars(s.data(), end, out);
    if (res.ec == std::errc() && res.ptr == end) return out;
  }
  throw ConfigError(key, "expected a number");
}

std::int64_t as_int(const std::string& key, const json& v) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_string()) {
    const std::string& s = v.get_ref<const std::string&>();
    std::int64_t out = 0;
    const char* end = s.data() + s.size();
    auto res = std::from_chars(s.data(), end, out);
    if (res.ec == std::errc() && res.ptr == end) return out;
  }
  throw ConfigError(key, "expected an integer");
}

std::uint64_t as_uint(const std::string& key, const json& v) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    const std::int64_t i = v.get<std::int64_t>();
    if (i >= 0) return static_cast<std::uint64_t>(i);
  }
  if (v.is_string()) {
    const std::string& s = v.get_ref<const std::string&>();
    std::uint64_t out = 0;
    const char* end = s.data() + s.size();
    auto res = std::from_chars(s.data(), end, out);
    if (res.ec == std::errc() && res.ptr == end) return out;
  }
  throw ConfigError(key, "expected a nonnegative integer");
}

bool as_bool(const std::string& key, const json& v) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) {
    const std::string& s = v.get_ref<const std::string&>();
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
  }
  throw ConfigError(key, "expected true or false");
}

std::string as_string(const std::string& key, const json& v) {
  if (v.is_string()) return v.get<std::string>();
  throw ConfigError(key, "expected a string");
}

std::vector<double> as_double_list(const std::string& key, const json& v) {
  std::vector<double> out;
  if (v.is_array()) {
    for (const json& item : v) out.push_back(as_double(key, item));
  } else if (v.is_string()) {
    std::istringstream in(v.get_ref<const std::string&>());
    std::string piece;
    while (std::getline(in, piece, ',')) {
      piece = trim(piece);
      if (piece.empty()) throw ConfigError(key, "expected a comma-separated list of numbers");
      out.push_back(as_double(key, json(piece)));
    }
  } else {
    throw ConfigError(key, "expected a list of numbers");
  }
  if (out.empty()) throw ConfigError(key, "expected a nonempty list of numbers");
  return out;
}

void require(bool cond, const std::string& key, const std::string& msg) {
  if (!cond) throw ConfigError(key, msg);
}

double req_double(RawConfig& raw, const std::string& key) {
  if (!raw.has(key)) throw ConfigError(key, "is required");
  return as_double(key, raw.get(key));
}

double opt_double(RawConfig& raw, const std::string& key, double dflt) {
  return raw.has(key) ? as_double(key, raw.get(key)) : dflt;
}

std::int64_t req_int(RawConfig& raw, const std::string& key) {
  if (!raw.has(key)) throw ConfigError(key, "is required");
  return as_int(key, raw.get(key));
}

std::int64_t opt_int(RawConfig& raw, const std::string& key, std::int64_t dflt) {
  return raw.has(key) ? as_int(key, raw.get(key)) : dflt;
}

double unit_interval(RawConfig& raw, const std::string& key) {
  const double v = req_double(raw, key);
  require(v >= 0.0 && v <= 1.0, key, "must be in [0, 1]");
  return v;
}

// Accepts `u`, `u_values`, or (when allow_range) `u_min`/`u_max`/`u_step`;
// exactly one form. Returns the expanded, validated list.
std::vector<double> sweep_u(RawConfig& raw, bool allow_range) {
  const bool has_u = raw.has("u");
  const bool has_list = raw.has("u_values");
  const bool has_range = raw.has("u_min") || raw.has("u_max") || raw.has("u_step");
  if (has_u && has_list) throw ConfigError("u", "give either u or u_values, not both");
  if (allow_range && has_range && (has_u || has_list))
    throw ConfigError("u_values", "give either explicit values or u_min/u_max/u_step, not both");

  std::vector<double> us;
  if (allow_range && has_range) {
    const double u_min = req_double(raw, "u_min");
    const double u_max = req_double(raw, "u_max");
    const double u_step = req_double(raw, "u_step");
    require(u_min >= 0.0 && u_min <= 1.0, "u_min", "must be in [0, 1]");
    require(u_max >= u_min && u_max <= 1.0, "u_max", "must be in [u_min, 1]");
    require(u_step > 0.0, "u_step", "must be positive");
    const long count = std::lround(std::floor((u_max - u_min) / u_step + 1e-9));
    for (long i = 0; i <= count; ++i) us.push_back(std::min(u_min + i * u_step, u_max));
    if (us.size() >= 2 && us.back() == us[us.size() - 2]) us.pop_back();
    return us;
  }
  if (has_u) {
    us.push_back(unit_interval(raw, "u"));
    return us;
  }
  if (has_list) {
    us = as_double_list("u_values", raw.get("u_values"));
    for (double u : us) require(u >= 0.0 && u <= 1.0, "u_values", "entries must be in [0, 1]");
    return us;
  }
  throw ConfigError(allow_range ? "u_values" : "u", "is required");
}

ExperimentConfig build_config(RawConfig& raw, std::optional<ExperimentKind> expected) {
  ExperimentConfig cfg;

  std::optional<ExperimentKind> stated;
  if (raw.has("experiment")) {
    const std::string name = as_string("experiment", raw.get("experiment"));
    stated = experiment_from_string(name);
    if (!stated) throw ConfigError("experiment", "unknown experiment '" + name + "'");
  }
  if (stated && expected && *stated != *expected)
    throw ConfigError("experiment", std::string("'") + to_string(*stated) +
                                        "' does not match the requested subcommand '" +
                                        to_string(*expected) + "'");
  if (stated)
    cfg.experiment = *stated;
  else if (expected)
    cfg.experiment = *expected;
  else
    throw ConfigError("experiment", "is required");

  const std::int64_t k = req_int(raw, "k_agents");
  require(k >= 1 && k <= 1'000'000, "k_agents", "must be an integer in [1, 1000000]");
  cfg.params.k_agents = static_cast<int>(k);

  cfg.params.lambda = req_double(raw, "lambda");
  require(cfg.params.lambda > 0.0 && std::isfinite(cfg.params.lambda), "lambda",
          "must be positive and finite");

  if (raw.has("seed")) cfg.seed = as_uint("seed", raw.get("seed"));
  if (raw.has("format")) {
    const std::string f = as_string("format", raw.get("format"));
    if (f == "csv")
      cfg.format = OutputFormat::csv;
    else if (f == "json")
      cfg.format = OutputFormat::json;
    else
      throw ConfigError("format", "must be csv or json");
  }
  if (raw.has("output_path")) {
    cfg.output_path = as_string("output_path", raw.get("output_path"));
    require(!cfg.output_path.empty(), "output_path", "must not be empty");
  }

  auto read_p = [&] { cfg.params.p_base = unit_interval(raw, "p"); };
  auto read_horizon = [&] {
    cfg.horizon = req_int(raw, "horizon");
    require(cfg.horizon >= 0 && cfg.horizon <= 100'000'000, "horizon",
            "must be an integer in [0, 1e8]");
  };

  switch (cfg.experiment) {
    case ExperimentKind::micro_validate: {
      const double u = unit_interval(raw, "u");
      cfg.u_values = {u};
      cfg.params.u = u;
      read_horizon();
      const std::int64_t runs = req_int(raw, "runs");
      require(runs >= 1 && runs <= 1'000'000, "runs", "must be an integer in [1, 1000000]");
      cfg.runs = static_cast<int>(runs);
      const std::string mode =
          raw.has("init") ? as_string("init", raw.get("init")) : std::string("fixed");
      if (mode == "fixed") {
        cfg.init.mode = InitSpec::Mode::fixed;
        read_p();
        cfg.init.alpha0 = opt_double(raw, "alpha0", 1.0);
        require(cfg.init.alpha0 > 0.0, "alpha0", "must be positive");
        cfg.init.beta0 = opt_double(raw, "beta0", 1.0);
        require(cfg.init.beta0 > 0.0, "beta0", "must be positive");
      } else if (mode == "uniform") {
        cfg.init.mode = InitSpec::Mode::uniform;
        cfg.init.alpha_min = req_double(raw, "alpha_min");
        cfg.init.alpha_max = req_double(raw, "alpha_max");
        require(cfg.init.alpha_min > 0.0, "alpha_min", "must be positive");
        require(cfg.init.alpha_max >= cfg.init.alpha_min, "alpha_max", "must be >= alpha_min");
        cfg.init.beta_min = req_double(raw, "beta_min");
        cfg.init.beta_max = req_double(raw, "beta_max");
        require(cfg.init.beta_min > 0.0, "beta_min", "must be positive");
        require(cfg.init.beta_max >= cfg.init.beta_min, "beta_max", "must be >= beta_min");
        cfg.init.p_min = req_double(raw, "p_min");
        cfg.init.p_max = req_double(raw, "p_max");
        require(cfg.init.p_min >= 0.0 && cfg.init.p_min <= 1.0, "p_min", "must be in [0, 1]");
        require(cfg.init.p_max >= cfg.init.p_min && cfg.init.p_max <= 1.0, "p_max",
                "must be in [p_min, 1]");
        cfg.params.p_base = 0.5 * (cfg.init.p_min + cfg.init.p_max);
      } else {
        throw ConfigError("init", "must be fixed or uniform");
      }
      break;
    }
    case ExperimentKind::mf_trajectory:
    case ExperimentKind::error_decay: {
      read_p();
      cfg.u_values = sweep_u(raw, true);
      if (cfg.experiment == ExperimentKind::error_decay)
        for (double u : cfg.u_values)
          require(u >= cfg.params.p_base, "u_values",
                  "entries must be >= p (a steady state is needed)");
      cfg.params.u = cfg.u_values.front();
      cfg.x0 = req_double(raw, "x0");
      require(cfg.x0 >= 0.0 && cfg.x0 <= 1.0, "x0", "must be in [0, 1]");
      cfg.n0 = req_double(raw, "n0");
      require(cfg.n0 > 0.0 && std::isfinite(cfg.n0), "n0", "must be positive and finite");
      read_horizon();
      if (raw.has("epsilon")) {
        const double eps = as_double("epsilon", raw.get("epsilon"));
        require(eps > 0.0, "epsilon", "must be positive");
        cfg.epsilon = eps;
      }
      break;
    }
    case ExperimentKind::equilibrium_scan: {
      read_p();
      const double u = unit_interval(raw, "u");
      cfg.u_values = {u};
      cfg.params.u = u;
      const std::int64_t gs = opt_int(raw, "grid_size", 1000);
      require(gs >= 100 && gs <= 10'000'000, "grid_size",
              "must be an integer in [100, 1e7]");
      cfg.grid_size = static_cast<int>(gs);
      break;
    }
    case ExperimentKind::frontier: {
      read_p();
      cfg.u_values = sweep_u(raw, true);
      for (double u : cfg.u_values)
        require(u >= cfg.params.p_base, "u_values", "all control values must be >= p");
      cfg.params.u = cfg.u_values.front();
      if (raw.has("transient_check"))
        cfg.transient_check = as_bool("transient_check", raw.get("transient_check"));
      cfg.x0 = opt_double(raw, "x0", 0.25);
      require(cfg.x0 >= 0.0 && cfg.x0 <= 1.0, "x0", "must be in [0, 1]");
      cfg.n0 = opt_double(raw, "n0", 4.0);
      require(cfg.n0 > 0.0 && std::isfinite(cfg.n0), "n0", "must be positive and finite");
      cfg.delta_x = opt_double(raw, "delta_x", 1e-10);
      require(cfg.delta_x > 0.0 && cfg.delta_x < 1.0, "delta_x", "must be in (0, 1)");
      break;
    }
    case ExperimentKind::optimal_u: {
      read_p();
      cfg.params.u = cfg.params.p_base;
      cfg.x_floor = req_double(raw, "x_floor");
      require(cfg.x_floor > 0.0 && cfg.x_floor < 1.0, "x_floor", "must be in (0, 1)");
      cfg.delta_u = opt_double(raw, "delta_u", 1e-6);
      require(cfg.delta_u > 0.0 && cfg.delta_u < 1.0, "delta_u", "must be in (0, 1)");
      cfg.delta_x = opt_double(raw, "delta_x", 1e-10);
      require(cfg.delta_x > 0.0 && cfg.delta_x < 1.0, "delta_x", "must be in (0, 1)");
      break;
    }
  }

  reject_leftovers(raw);
  return cfg;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text,
                                   std::optional<ExperimentKind> expected) {
  const std::size_t first = text.find_first_not_of(" \t\r\n");
  RawConfig raw = (first != std::string::npos && text[first] == '{') ? parse_json_config(text)
                                                                     : parse_kv(text);
  return build_config(raw, expected);
}

ExperimentConfig load_config_file(const std::string& path,
                                  std::optional<ExperimentKind> expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config", "cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), expected);
}

json config_to_json(const ExperimentConfig& config) {
  json j;
  j["experiment"] = to_string(config.experiment);
  j["k_agents"] = config.params.k_agents;
  j["lambda"] = config.params.lambda;
  j["seed"] = config.seed;
  j["format"] = config.format == OutputFormat::csv ? "csv" : "json";
  j["output_path"] = config.output_path;
  switch (config.experiment) {
    case ExperimentKind::micro_validate:
      j["u"] = config.params.u;
      j["horizon"] = config.horizon;
      j["runs"] = config.runs;
      if (config.init.mode == InitSpec::Mode::fixed) {
        j["init"] = "fixed";
        j["p"] = config.params.p_base;
        j["alpha0"] = config.init.alpha0;
        j["beta0"] = config.init.beta0;
      } else {
        j["init"] = "uniform";
        j["alpha_min"] = config.init.alpha_min;
        j["alpha_max"] = config.init.alpha_max;
        j["beta_min"] = config.init.beta_min;
        j["beta_max"] = config.init.beta_max;
        j["p_min"] = config.init.p_min;
        j["p_max"] = config.init.p_max;
      }
      break;
    case ExperimentKind::mf_trajectory:
    case ExperimentKind::error_decay:
      j["p"] = config.params.p_base;
      j["u_values"] = config.u_values;
      j["x0"] = config.x0;
      j["n0"] = config.n0;
      j["horizon"] = config.horizon;
      if (config.epsilon) j["epsilon"] = *config.epsilon;
      break;
    case ExperimentKind::equilibrium_scan:
      j["p"] = config.params.p_base;
      j["u"] = config.params.u;
      j["grid_size"] = config.grid_size;
      break;
    case ExperimentKind::frontier:
      j["p"] = config.params.p_base;
      j["u_values"] = config.u_values;
      j["transient_check"] = config.transient_check;
      j["x0"] = config.x0;
      j["n0"] = config.n0;
      j["delta_x"] = config.delta_x;
      break;
    case ExperimentKind::optimal_u:
      j["p"] = config.params.p_base;
      j["x_floor"] = config.x_floor;
      j["delta_u"] = config.delta_u;
      j["delta_x"] = config.delta_x;
      break;
  }
  return j;
}

namespace {

using Emit = std::function<void(const std::string&, const std::string&)>;

std::string dump_report(const json& j) { return j.dump(2) + "\n"; }

json table_json(std::vector<std::string> columns, json rows) {
  json j;
  j["columns"] = std::move(columns);
  j["rows"] = std::move(rows);
  return j;
}

json mf_rows_json(const MfTrajectory& traj) {
  json rows = json::array();
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    const MeanFieldState& st = traj.states[i];
    const MfDiagnostics& d = traj.diag[i];
    rows.push_back({st.epoch, st.x_bar, st.n_bar, d.q_bar, d.s, d.gamma, d.throughput()});
  }
  return table_json({"t", "x_bar", "n_bar", "q_bar", "s", "gamma", "throughput"},
                    std::move(rows));
}

std::string data_ext(const ExperimentConfig& cfg) {
  return cfg.format == OutputFormat::csv ? ".csv" : ".json";
}

int run_micro_validate(const ExperimentConfig& cfg, const PoissonTable& table, Emit emit) {
  const int k = cfg.params.k_agents;
  std::vector<AgentState> pop(static_cast<std::size_t>(k));
  if (cfg.init.mode == InitSpec::Mode::fixed) {
    for (AgentState& a : pop) {
      a.alpha = cfg.init.alpha0;
      a.beta = cfg.init.beta0;
      a.p_base = cfg.params.p_base;
    }
  } else {
    RngStream init_rng = RngStream::substream(cfg.seed, 0);
    for (AgentState& a : pop) {
      a.alpha = cfg.init.alpha_min + (cfg.init.alpha_max - cfg.init.alpha_min) * init_rng.next_double();
      a.beta = cfg.init.beta_min + (cfg.init.beta_max - cfg.init.beta_min) * init_rng.next_double();
      a.p_base = cfg.init.p_min + (cfg.init.p_max - cfg.init.p_min) * init_rng.next_double();
    }
  }

  double p_sum = 0.0, alpha_sum = 0.0, n_sum = 0.0;
  for (const AgentState& a : pop) {
    p_sum += a.p_base;
    alpha_sum += a.alpha;
    n_sum += a.pseudo_count();
  }
  ModelParams mp = cfg.params;
  mp.p_base = p_sum / k;  // realized population mean drives the comparison
  const double x0 = alpha_sum / n_sum;
  const double n0 = n_sum / k;

  McTrajectory mc = run_monte_carlo(mp, pop, table, cfg.horizon, cfg.runs, cfg.seed);
  MfTrajectory mf = mf_trajectory(mp, x0, n0, cfg.horizon, table);

  double gap_direct = 0.0, gap_pooled = 0.0;
  std::vector<double> mf_x(mf.states.size());
  for (std::size_t t = 0; t < mf.states.size(); ++t) {
    mf_x[t] = mf.states[t].x_bar;
    gap_direct = std::max(gap_direct, std::fabs(mc.mc_direct_mean[t] - mf_x[t]));
    gap_pooled = std::max(gap_pooled, std::fabs(mc.mc_pooled_mean[t] - mf_x[t]));
  }

  if (cfg.format == OutputFormat::csv) {
    std::ostringstream os;
    write_mc_trajectory_csv(mc, os);
    emit("runs.csv", os.str());
  } else {
    json rows = json::array();
    for (int m = 0; m < mc.runs; ++m)
      for (std::int64_t t = 0; t <= mc.horizon; ++t)
        rows.push_back({m, t, mc.direct[static_cast<std::size_t>(m)][static_cast<std::size_t>(t)],
                        mc.pooled[static_cast<std::size_t>(m)][static_cast<std::size_t>(t)]});
    emit("runs.json",
         dump_report(table_json({"run", "t", "direct_mean", "pooled_mean"}, std::move(rows))));
  }

  json summary = mc_trajectory_summary_json(mc);
  summary["p_bar"] = mp.p_base;
  summary["x0_pooled"] = x0;
  summary["n0_mean"] = n0;
  summary["mf_x_bar"] = mf_x;
  summary["max_gap_direct"] = gap_direct;
  summary["max_gap_pooled"] = gap_pooled;
  emit("summary.json", dump_report(summary));
  return 0;
}

int run_mf_trajectory(const ExperimentConfig& cfg, const PoissonTable& table, Emit emit) {
  json points = json::array();
  for (double u : cfg.u_values) {
    ModelParams mp = cfg.params;
    mp.u = u;
    MfTrajectory traj = mf_trajectory(mp, cfg.x0, cfg.n0, cfg.horizon, table);
    const std::string stem = "trajectory_u" + detail::fmt_double(u);
    if (cfg.format == OutputFormat::csv) {
      std::ostringstream os;
      write_mf_trajectory_csv(traj, os);
      emit(stem + ".csv", os.str());
    } else {
      emit(stem + ".json", dump_report(mf_rows_json(traj)));
    }
    json pt;
    pt["u"] = u;
    pt["x_final"] = traj.states.back().x_bar;
    pt["n_final"] = traj.states.back().n_bar;
    if (u >= mp.p_base) {
      EquilibriumResult eq = solve_x_star(u, mp, table);
      pt["x_star"] = eq.x_star;
      pt["abs_error_final"] = std::fabs(traj.states.back().x_bar - eq.x_star);
      if (cfg.epsilon) {
        std::optional<std::int64_t> tc = convergence_time(traj, eq.x_star, *cfg.epsilon);
        pt["t_epsilon"] = tc ? json(*tc) : json(nullptr);
      }
    }
    points.push_back(std::move(pt));
  }
  json summary;
  summary["points"] = std::move(points);
  emit("summary.json", dump_report(summary));
  return 0;
}

int run_error_decay(const ExperimentConfig& cfg, const PoissonTable& table, Emit emit) {
  std::ostringstream csv;
  json rows = json::array();
  if (cfg.format == OutputFormat::csv) csv << "u,t,abs_error\n";
  json points = json::array();

  for (double u : cfg.u_values) {
    ModelParams mp = cfg.params;
    mp.u = u;
    const double x_star = solve_x_star(u, mp, table).x_star;
    MfTrajectory traj = mf_trajectory(mp, cfg.x0, cfg.n0, cfg.horizon, table);

    double sum_lt = 0.0, sum_le = 0.0, sum_ltlt = 0.0, sum_ltle = 0.0;
    std::int64_t count = 0;
    const std::int64_t t_hi = std::min<std::int64_t>(cfg.horizon, 10'000);
    for (std::int64_t t = 0; t <= cfg.horizon; ++t) {
      const double err = std::fabs(traj.states[static_cast<std::size_t>(t)].x_bar - x_star);
      if (cfg.format == OutputFormat::csv)
        csv << detail::fmt_double(u) << ',' << t << ',' << detail::fmt_double(err) << '\n';
      else
        rows.push_back({u, t, err});
      if (t >= 100 && t <= t_hi && err > 0.0) {
        const double lt = std::log(static_cast<double>(t));
        const double le = std::log(err);
        sum_lt += lt;
        sum_le += le;
        sum_ltlt += lt * lt;
        sum_ltle += lt * le;
        ++count;
      }
    }
    json pt;
    pt["u"] = u;
    pt["x_star"] = x_star;
    const double denom = count * sum_ltlt - sum_lt * sum_lt;
    if (count >= 2 && denom != 0.0)
      pt["slope_loglog"] = (count * sum_ltle - sum_lt * sum_le) / denom;
    else
      pt["slope_loglog"] = nullptr;
    points.push_back(std::move(pt));
  }

  if (cfg.format == OutputFormat::csv)
    emit("error_decay.csv", csv.str());
  else
    emit("error_decay.json",
         dump_report(table_json({"u", "t", "abs_error"}, std::move(rows))));
  json summary;
  summary["points"] = std::move(points);
  emit("summary.json", dump_report(summary));
  return 0;
}

int run_equilibrium_scan(const ExperimentConfig& cfg, const PoissonTable& table, Emit emit) {
  const double u = cfg.params.u;
  if (cfg.format == OutputFormat::csv) {
    std::ostringstream os;
    write_phi_scan_csv(u, cfg.params, table, cfg.grid_size, os);
    emit("phi_scan.csv", os.str());
  } else {
    json rows = json::array();
    for (int i = 0; i <= cfg.grid_size; ++i) {
      const double x = static_cast<double>(i) / cfg.grid_size;
      rows.push_back({x, phi(x, u, cfg.params, table)});
    }
    emit("phi_scan.json", dump_report(table_json({"x_grid", "phi"}, std::move(rows))));
  }

  FixedPointScan scan = scan_fixed_points(u, cfg.params, table, cfg.grid_size);
  UniquenessCertificate cert = uniqueness_certificate(u, cfg.params, table);
  json report;
  report["u"] = u;
  report["roots"] = scan.roots;
  report["near_roots"] = scan.near_roots;
  report["certificate"] = {{"regime", to_string(cert.regime)},
                           {"lipschitz_constant", cert.lipschitz_constant},
                           {"breakpoints", cert.breakpoint_set}};
  emit("scan.json", dump_report(report));
  return 0;
}

int run_frontier(const ExperimentConfig& cfg, const PoissonTable& table, Emit emit) {
  std::vector<SteadyStateMetrics> rows = frontier(cfg.params, cfg.u_values, table, cfg.delta_x);
  if (cfg.format == OutputFormat::csv) {
    std::ostringstream os;
    write_frontier_csv(rows, os);
    emit("frontier.csv", os.str());
  } else {
    json jrows = json::array();
    for (const SteadyStateMetrics& m : rows)
      jrows.push_back({m.u, m.x_inf, m.q_star, m.throughput});
    emit("frontier.json",
         dump_report(table_json({"u", "x_inf", "q_star", "throughput"}, std::move(jrows))));
  }

  bool nonincreasing = true;
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].x_inf > rows[i - 1].x_inf) nonincreasing = false;

  MonotonicityCertificate cert = throughput_monotonicity_certificate(cfg.params, table, 1000);
  json summary;
  summary["x_inf_nonincreasing"] = nonincreasing;
  summary["certificate"] = {{"holds", cert.holds},
                            {"lhs", cert.lhs},
                            {"rhs", cert.rhs},
                            {"sup_gprime_abs", cert.sup_gprime_abs},
                            {"sup_drift", cert.sup_drift},
                            {"inf_x_inf", cert.inf_x_inf},
                            {"integer_crossings", cert.integer_crossings}};

  if (cfg.transient_check) {
    // Long transient per control, averaging the final 200 samples.
    const std::int64_t t_end = 1000, window = 200;
    json tpoints = json::array();
    std::ostringstream tcsv;
    json trows = json::array();
    if (cfg.format == OutputFormat::csv) tcsv << "u,x_transient,throughput_transient\n";
    double max_gap_x = 0.0, max_gap_thr = 0.0;
    for (std::size_t i = 0; i < cfg.u_values.size(); ++i) {
      const double u = cfg.u_values[i];
      ModelParams mp = cfg.params;
      mp.u = u;
      MfTrajectory traj = mf_trajectory(mp, cfg.x0, cfg.n0, t_end, table);
      double sx = 0.0, sthr = 0.0;
      for (std::int64_t t = t_end - window + 1; t <= t_end; ++t) {
        sx += traj.states[static_cast<std::size_t>(t)].x_bar;
        sthr += traj.diag[static_cast<std::size_t>(t)].throughput();
      }
      const double x_hat = sx / window;
      const double thr_hat = sthr / window;
      if (cfg.format == OutputFormat::csv)
        tcsv << detail::fmt_double(u) << ',' << detail::fmt_double(x_hat) << ','
             << detail::fmt_double(thr_hat) << '\n';
      else
        trows.push_back({u, x_hat, thr_hat});
      const double gap_x = std::fabs(x_hat - rows[i].x_inf);
      const double gap_thr = std::fabs(thr_hat - rows[i].throughput);
      max_gap_x = std::max(max_gap_x, gap_x);
      max_gap_thr = std::max(max_gap_thr, gap_thr);
      tpoints.push_back({{"u", u},
                         {"x_transient", x_hat},
                         {"throughput_transient", thr_hat},
                         {"gap_x", gap_x},
                         {"gap_throughput", gap_thr}});
    }
    if (cfg.format == OutputFormat::csv)
      emit("frontier_transient.csv", tcsv.str());
    else
      emit("frontier_transient.json",
           dump_report(table_json({"u", "x_transient", "throughput_transient"},
                                  std::move(trows))));
    summary["transient"] = {{"horizon", t_end},
                            {"window", window},
                            {"max_gap_x", max_gap_x},
                            {"max_gap_throughput", max_gap_thr},
                            {"points", std::move(tpoints)}};
  }

  emit("summary.json", dump_report(summary));
  return 0;
}

int run_optimal_u(const ExperimentConfig& cfg, const PoissonTable& table, Emit emit) {
  OptimalControlResult result =
      optimal_u(cfg.params, cfg.x_floor, cfg.delta_u, cfg.delta_x, table);
  emit("optimal_u.json",
       dump_report(optimal_u_report(result, cfg.delta_u, cfg.delta_x)));
  return result.status == OptimalStatus::infeasible ? 3 : 0;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.params.validate();

  const fs::path dir(config.output_path);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw std::runtime_error("cannot create output directory '" + dir.string() +
                             "': " + ec.message());

  ExperimentResult result;
  Emit emit = [&](const std::string& name, const std::string& content) {
    const fs::path path = dir / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open output file '" + path.string() + "'");
    out << content;
    out.close();
    if (!out) throw std::runtime_error("failed writing output file '" + path.string() + "'");
    result.files.push_back(path.string());
  };

  const PoissonTable table = build_poisson_table(config.params.lambda, config.params.k_agents);

  switch (config.experiment) {
    case ExperimentKind::micro_validate:
      result.exit_code = run_micro_validate(config, table, emit);
      break;
    case ExperimentKind::mf_trajectory:
      result.exit_code = run_mf_trajectory(config, table, emit);
      break;
    case ExperimentKind::error_decay:
      result.exit_code = run_error_decay(config, table, emit);
      break;
    case ExperimentKind::equilibrium_scan:
      result.exit_code = run_equilibrium_scan(config, table, emit);
      break;
    case ExperimentKind::frontier:
      result.exit_code = run_frontier(config, table, emit);
      break;
    case ExperimentKind::optimal_u:
      result.exit_code = run_optimal_u(config, table, emit);
      break;
  }

  emit("manifest.json", dump_report(config_to_json(config)));
  return result;
}

}  // namespace adm
