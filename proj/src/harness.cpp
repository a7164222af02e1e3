#include "lkmdp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace lkmdp {

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kUclk: return "uclk";
    case Algorithm::kRandom: return "random";
    case Algorithm::kOracleGreedy: return "oracle-greedy";
  }
  return "unknown";
}

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "uclk") return Algorithm::kUclk;
  if (name == "random") return Algorithm::kRandom;
  if (name == "oracle-greedy") return Algorithm::kOracleGreedy;
  throw ConfigError("unknown algorithm '" + name + "' (expected uclk, random or oracle-greedy)");
}

namespace {

// ---------------------------------------------------------------- JSON helpers

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(what + ": malformed JSON: " + e.what());
  }
}

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed, const std::string& what) {
  if (!obj.is_object()) throw ConfigError(what + ": expected a JSON object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError(what + ": unknown key '" + key + "'");
  }
}

const json& require(const json& obj, const std::string& key, const std::string& what) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(what + ": missing key '" + key + "'");
  return *it;
}

double get_number(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("key '" + key + "': expected a number");
  return v.get<double>();
}

long get_integer(const json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ConfigError("key '" + key + "': expected an integer");
  return v.get<long>();
}

bool get_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError("key '" + key + "': expected true or false");
  return v.get<bool>();
}

std::string get_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("key '" + key + "': expected a string");
  return v.get<std::string>();
}

Vec get_vector(const json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError("key '" + key + "': expected an array of numbers");
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = get_number(v[i], key);
  return out;
}

Mat get_matrix(const json& v, const std::string& key) {
  if (!v.is_array() || v.empty() || !v[0].is_array()) throw ConfigError("key '" + key + "': expected a matrix");
  const auto rows = static_cast<Eigen::Index>(v.size());
  const auto cols = static_cast<Eigen::Index>(v[0].size());
  Mat out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Vec row = get_vector(v[static_cast<std::size_t>(r)], key);
    if (row.size() != cols) throw ConfigError("key '" + key + "': ragged matrix");
    out.row(r) = row.transpose();
  }
  return out;
}

// [s][a] → Vec
std::vector<std::vector<Vec>> get_table_of_vectors(const json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError("key '" + key + "': expected a nested array");
  std::vector<std::vector<Vec>> out;
  for (const auto& row : v) {
    if (!row.is_array()) throw ConfigError("key '" + key + "': expected a nested array");
    std::vector<Vec> r;
    for (const auto& cell : row) r.push_back(get_vector(cell, key));
    out.push_back(std::move(r));
  }
  return out;
}

// ------------------------------------------------------------- env specs

LinearKernelMdp env_from_object(const json& spec) {
  const std::string what = "environment spec";
  if (!spec.is_object()) throw ConfigError(what + ": expected a JSON object");
  const Family family = [&] {
    try {
      return family_from_string(get_string(require(spec, "family", what), "family"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(what + ": " + e.what());
    }
  }();
  const double gamma = get_number(require(spec, "gamma", what), "gamma");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError(what + ": gamma must lie in [0, 1)");

  std::optional<long> n_states, n_actions;
  if (spec.contains("states")) n_states = get_integer(spec["states"], "states");
  if (spec.contains("actions")) n_actions = get_integer(spec["actions"], "actions");

  auto build = [&]() -> LinearKernelMdp {
    switch (family) {
      case Family::kTabular: {
        reject_unknown_keys(spec, {"family", "gamma", "states", "actions", "rewards", "P"}, what);
        const auto rows = get_table_of_vectors(require(spec, "P", what), "P");
        return make_tabular_env(rows, get_matrix(require(spec, "rewards", what), "rewards"), gamma);
      }
      case Family::kMixture: {
        reject_unknown_keys(spec, {"family", "gamma", "states", "actions", "rewards", "base_kernels", "psi", "W"},
                            what);
        const json& bk = require(spec, "base_kernels", what);
        if (!bk.is_array()) throw ConfigError(what + ": base_kernels must be an array");
        std::vector<Kernel> kernels;
        for (const auto& k : bk) kernels.push_back(get_table_of_vectors(k, "base_kernels"));
        return make_mixture_env(kernels, get_table_of_vectors(require(spec, "psi", what), "psi"),
                                get_matrix(require(spec, "W", what), "W"), gamma,
                                get_matrix(require(spec, "rewards", what), "rewards"));
      }
      case Family::kProduct: {
        reject_unknown_keys(spec, {"family", "gamma", "states", "actions", "rewards", "psi", "mu", "theta", "D"},
                            what);
        std::optional<double> D;
        if (spec.contains("D")) D = get_number(spec["D"], "D");
        return make_product_env(get_matrix(require(spec, "psi", what), "psi"),
                                get_table_of_vectors(require(spec, "mu", what), "mu"),
                                get_vector(require(spec, "theta", what), "theta"), gamma,
                                get_matrix(require(spec, "rewards", what), "rewards"), D);
      }
      case Family::kHard: {
        reject_unknown_keys(spec, {"family", "gamma", "states", "actions", "d", "delta", "Delta", "theta_signs"},
                            what);
        HardMdpParams p;
        p.dim = static_cast<int>(get_integer(require(spec, "d", what), "d"));
        p.delta = get_number(require(spec, "delta", what), "delta");
        p.Delta = get_number(require(spec, "Delta", what), "Delta");
        p.gamma = gamma;
        const json& sj = require(spec, "theta_signs", what);
        if (!sj.is_array()) throw ConfigError(what + ": theta_signs must be an array");
        std::vector<int> signs;
        for (const auto& x : sj) signs.push_back(static_cast<int>(get_integer(x, "theta_signs")));
        return make_hard_env(p, signs);
      }
    }
    throw ConfigError(what + ": unsupported family");
  };

  try {
    LinearKernelMdp env = build();
    if (n_states && *n_states != env.n_states()) throw ConfigError(what + ": 'states' does not match the payload");
    if (n_actions && *n_actions != env.n_actions()) throw ConfigError(what + ": 'actions' does not match the payload");
    return env;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

// ------------------------------------------------------------------ presets

struct Preset {
  std::string name;
  std::string description;
  std::function<json(long)> spec;
};

json tabular_spec(double gamma, const std::vector<std::vector<std::vector<double>>>& P,
                  const std::vector<std::vector<double>>& r) {
  return json{{"family", "tabular"}, {"gamma", gamma}, {"P", P}, {"rewards", r}};
}

json product_20_spec() {
  const int S = 20, A = 2, d = 3;
  const double scale[d] = {1.0, 1.5, 2.0};
  CounterRng rng = CounterRng::from_seed(20, Stream::kInstance);
  auto random_simplex = [&](int n) {
    std::vector<double> w(static_cast<std::size_t>(n));
    double sum = 0.0;
    for (auto& x : w) {
      x = 0.05 + rng.uniform();
      sum += x;
    }
    for (auto& x : w) x /= sum;
    return w;
  };
  std::vector<std::vector<double>> psi(S, std::vector<double>(d));
  for (int j = 0; j < d; ++j) {
    const auto q = random_simplex(S);
    for (int s = 0; s < S; ++s) psi[s][j] = scale[j] * q[static_cast<std::size_t>(s)];
  }
  std::vector<std::vector<std::vector<double>>> mu(S, std::vector<std::vector<double>>(A));
  std::vector<std::vector<double>> rewards(S, std::vector<double>(A));
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      mu[s][a] = random_simplex(d);
      rewards[s][a] = rng.uniform();
    }
  }
  std::vector<double> theta(d);
  for (int j = 0; j < d; ++j) theta[j] = 1.0 / scale[j];
  return json{{"family", "product"}, {"gamma", 0.9}, {"psi", psi}, {"mu", mu},
              {"theta", theta},     {"rewards", rewards}, {"D", 2.0}};
}

const std::vector<Preset>& presets() {
  static const std::vector<Preset> all = {
      {"chain-1s", "one state, one action, reward 1, gamma 0.9",
       [](long) { return tabular_spec(0.9, {{{1.0}}}, {{1.0}}); }},
      {"tabular-2s", "2 states, 2 actions, action 1 worse by at least 0.5 in reward, gamma 0.5",
       [](long) {
         return tabular_spec(0.5, {{{0.9, 0.1}, {0.2, 0.8}}, {{0.6, 0.4}, {0.3, 0.7}}}, {{1.0, 0.3}, {0.8, 0.1}});
       }},
      {"tabular-3s2a", "3 states, 2 actions, fixed kernel, gamma 0.5",
       [](long) {
         return tabular_spec(0.5,
                             {{{0.7, 0.2, 0.1}, {0.1, 0.6, 0.3}},
                              {{0.3, 0.4, 0.3}, {0.05, 0.15, 0.8}},
                              {{0.5, 0.25, 0.25}, {0.2, 0.2, 0.6}}},
                             {{0.1, 0.0}, {0.3, 0.2}, {0.9, 1.0}});
       }},
      {"hard-d4", "two-state hard MDP, d=4, gamma 0.9, delta 0.1, Delta 0.02",
       [](long) {
         return json{{"family", "hard"}, {"gamma", 0.9}, {"d", 4}, {"delta", 0.1}, {"Delta", 0.02},
                     {"theta_signs", {1, -1, 1}}};
       }},
      {"hard-lower-bound", "hard MDP, d=4, gamma 0.9, delta = 1-gamma, Delta = d*sqrt(1-gamma)/(90*sqrt(2T))",
       [](long T) {
         const HardMdpParams p = lower_bound_hard_params(4, 0.9, static_cast<double>(T));
         return json{{"family", "hard"}, {"gamma", p.gamma}, {"d", p.dim}, {"delta", p.delta},
                     {"Delta", p.Delta}, {"theta_signs", {1, -1, 1}}};
       }},
      {"mixture-2x3", "mixture of 2 base kernels on 3 states, 2 actions, d'=2 (d=4), gamma 0.7",
       [](long) {
         const std::vector<std::vector<std::vector<double>>> k0 = {
             {{0.8, 0.1, 0.1}, {0.1, 0.8, 0.1}}, {{0.2, 0.7, 0.1}, {0.1, 0.1, 0.8}}, {{0.3, 0.3, 0.4}, {0.6, 0.2, 0.2}}};
         const std::vector<std::vector<std::vector<double>>> k1 = {
             {{0.1, 0.1, 0.8}, {0.4, 0.3, 0.3}}, {{0.5, 0.0, 0.5}, {0.3, 0.6, 0.1}}, {{0.1, 0.8, 0.1}, {0.0, 0.5, 0.5}}};
         const std::vector<std::vector<std::vector<double>>> psi = {
             {{1.0, 0.0}, {0.5, 0.5}}, {{1.0, 0.0}, {0.25, 0.75}}, {{0.0, 1.0}, {0.5, 0.5}}};
         return json{{"family", "mixture"},
                     {"gamma", 0.7},
                     {"base_kernels", {k0, k1}},
                     {"psi", psi},
                     {"W", {{0.7, 0.2}, {0.3, 0.8}}},
                     {"rewards", {{0.0, 0.2}, {0.5, 0.4}, {1.0, 0.6}}}};
       }},
      {"product-20", "20-state product-form features, 2 actions, d=3, gamma 0.9",
       [](long) { return product_20_spec(); }},
  };
  return all;
}

const Preset& find_preset(const std::string& name) {
  for (const auto& p : presets()) {
    if (p.name == name) return p;
  }
  throw ConfigError("unknown preset '" + name + "'");
}

// ----------------------------------------------------------------- formatting

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string header(const ExperimentConfig& config, bool reproducible) {
  std::string h = "# lkmdp experiment output\n# config: " + serialize_config(config, false) + "\n";
  if (!reproducible) h += "# generated: " + utc_timestamp() + "\n";
  return h;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << content;
  out.flush();
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

std::string steps_csv(const ExperimentConfig& config, const SeedResult& r, bool reproducible) {
  std::ostringstream os;
  os << header(config, reproducible) << "# seed: " << r.seed << "\n";
  os << "t,epoch,state,action,reward,next_state,delta_t,cum_regret,logdet_ratio,optimism_ok\n";
  for (std::size_t i = 0; i < r.trace.steps.size(); ++i) {
    const StepRecord& st = r.trace.steps[i];
    os << st.t << ',' << st.epoch << ',' << st.state << ',' << st.action << ',' << fmt(st.reward) << ','
       << st.next_state << ',' << fmt(r.regret.delta[i]) << ',' << fmt(r.regret.cumulative[i]) << ','
       << fmt(st.logdet_ratio) << ',';
    if (!r.epoch_ok.empty() && r.epoch_ok[static_cast<std::size_t>(st.epoch)] >= 0) {
      os << r.epoch_ok[static_cast<std::size_t>(st.epoch)];
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace

// --------------------------------------------------------------------- config

ExperimentConfig parse_config(const std::string& text) {
  const json root = parse_json(text, "config");
  reject_unknown_keys(root,
                      {"env", "env_file", "algorithm", "lambda", "delta_conf", "T", "beta", "U", "per_epoch_radius",
                       "clip", "solver", "mc_R", "doubling_trick", "seeds", "out", "checkpoints", "method",
                       "rollout_horizon", "clamp_regret", "oracle_checks"},
                      "config");
  ExperimentConfig c;
  if (root.contains("env")) {
    const json& e = root["env"];
    if (e.is_string()) {
      c.env_preset = e.get<std::string>();
      find_preset(c.env_preset);
    } else if (e.is_object()) {
      c.env_inline = e.dump();
    } else {
      throw ConfigError("key 'env': expected a preset name or an environment spec object");
    }
  }
  if (root.contains("env_file")) c.env_file = get_string(root["env_file"], "env_file");
  const int sources = !c.env_preset.empty() + !c.env_inline.empty() + !c.env_file.empty();
  if (sources != 1) throw ConfigError("config: give exactly one of 'env' or 'env_file'");

  if (root.contains("algorithm")) c.algorithm = algorithm_from_string(get_string(root["algorithm"], "algorithm"));
  if (root.contains("lambda")) c.lambda = get_number(root["lambda"], "lambda");
  if (!(c.lambda > 0.0)) throw ConfigError("key 'lambda': must be positive");
  if (root.contains("delta_conf")) c.delta_conf = get_number(root["delta_conf"], "delta_conf");
  if (!(c.delta_conf > 0.0 && c.delta_conf < 1.0)) throw ConfigError("key 'delta_conf': must lie in (0, 1)");
  c.horizon = get_integer(require(root, "T", "config"), "T");
  if (c.horizon < 1) throw ConfigError("key 'T': must be at least 1");
  if (root.contains("beta") && !root["beta"].is_null()) {
    c.beta = get_number(root["beta"], "beta");
    if (!(*c.beta >= 0.0)) throw ConfigError("key 'beta': must be nonnegative");
  }
  if (root.contains("U") && !root["U"].is_null()) {
    c.rounds = static_cast<int>(get_integer(root["U"], "U"));
    if (*c.rounds < 1) throw ConfigError("key 'U': must be at least 1");
  }
  if (root.contains("per_epoch_radius")) c.per_epoch_radius = get_bool(root["per_epoch_radius"], "per_epoch_radius");
  if (root.contains("clip")) c.clip = get_bool(root["clip"], "clip");
  if (root.contains("solver")) {
    const json& s = root["solver"];
    reject_unknown_keys(s, {"iters", "tol"}, "config.solver");
    if (s.contains("iters")) c.solver.iters = static_cast<int>(get_integer(s["iters"], "solver.iters"));
    if (s.contains("tol")) c.solver.tol = get_number(s["tol"], "solver.tol");
    if (c.solver.iters < 1) throw ConfigError("key 'solver.iters': must be at least 1");
    if (!(c.solver.tol > 0.0)) throw ConfigError("key 'solver.tol': must be positive");
  }
  if (root.contains("mc_R")) c.mc_samples = static_cast<int>(get_integer(root["mc_R"], "mc_R"));
  if (c.mc_samples < 0) throw ConfigError("key 'mc_R': must be nonnegative");
  if (root.contains("doubling_trick")) c.doubling_trick = get_bool(root["doubling_trick"], "doubling_trick");
  if (root.contains("seeds")) {
    const json& s = root["seeds"];
    if (!s.is_array() || s.empty()) throw ConfigError("key 'seeds': expected a non-empty array of integers");
    c.seeds.clear();
    for (const auto& x : s) {
      if (!x.is_number_unsigned()) throw ConfigError("key 'seeds': entries must be nonnegative integers");
      c.seeds.push_back(x.get<std::uint64_t>());
    }
  }
  if (root.contains("out")) c.out_dir = get_string(root["out"], "out");
  if (root.contains("checkpoints")) {
    const json& s = root["checkpoints"];
    if (!s.is_array()) throw ConfigError("key 'checkpoints': expected an array of integers");
    for (const auto& x : s) {
      const long v = get_integer(x, "checkpoints");
      if (v < 1 || v > c.horizon) throw ConfigError("key 'checkpoints': values must lie in [1, T]");
      if (!c.checkpoints.empty() && v <= c.checkpoints.back()) {
        throw ConfigError("key 'checkpoints': values must be strictly increasing");
      }
      c.checkpoints.push_back(v);
    }
  }
  if (root.contains("method")) {
    try {
      c.method = regret_method_from_string(get_string(root["method"], "method"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("key 'method': ") + e.what());
    }
  }
  if (root.contains("rollout_horizon")) {
    c.rollout_horizon = static_cast<int>(get_integer(root["rollout_horizon"], "rollout_horizon"));
  }
  if (c.rollout_horizon < 1) throw ConfigError("key 'rollout_horizon': must be at least 1");
  if (root.contains("clamp_regret")) c.clamp_regret = get_bool(root["clamp_regret"], "clamp_regret");
  if (root.contains("oracle_checks")) c.oracle_checks = get_bool(root["oracle_checks"], "oracle_checks");

  if (!c.env_inline.empty()) build_env(c);  // validate the inline spec eagerly
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& c, bool with_out_dir) {
  json root;
  if (!c.env_preset.empty()) root["env"] = c.env_preset;
  if (!c.env_inline.empty()) root["env"] = json::parse(c.env_inline);
  if (!c.env_file.empty()) root["env_file"] = c.env_file;
  root["algorithm"] = to_string(c.algorithm);
  root["lambda"] = c.lambda;
  root["delta_conf"] = c.delta_conf;
  root["T"] = c.horizon;
  root["beta"] = c.beta ? json(*c.beta) : json(nullptr);
  root["U"] = c.rounds ? json(*c.rounds) : json(nullptr);
  root["per_epoch_radius"] = c.per_epoch_radius;
  root["clip"] = c.clip;
  root["solver"] = json{{"iters", c.solver.iters}, {"tol", c.solver.tol}};
  root["mc_R"] = c.mc_samples;
  root["doubling_trick"] = c.doubling_trick;
  root["seeds"] = c.seeds;
  if (with_out_dir) root["out"] = c.out_dir;
  root["checkpoints"] = c.checkpoints;
  root["method"] = to_string(c.method);
  root["rollout_horizon"] = c.rollout_horizon;
  root["clamp_regret"] = c.clamp_regret;
  root["oracle_checks"] = c.oracle_checks;
  return root.dump();
}

std::vector<long> effective_checkpoints(const ExperimentConfig& config) {
  if (!config.checkpoints.empty()) return config.checkpoints;
  std::vector<long> out;
  for (long base = 10; base < config.horizon; base *= 10) {
    out.push_back(base);
    if (3 * base < config.horizon) out.push_back(3 * base);
  }
  out.push_back(config.horizon);
  return out;
}

// ------------------------------------------------------------------ envs

LinearKernelMdp env_from_json(const std::string& text) { return env_from_object(parse_json(text, "environment spec")); }

LinearKernelMdp load_env(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read environment spec '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return env_from_json(ss.str());
}

std::string env_spec_for_preset(const std::string& name, long horizon) {
  return find_preset(name).spec(horizon).dump();
}

LinearKernelMdp make_preset(const std::string& name, long horizon) {
  return env_from_object(find_preset(name).spec(horizon));
}

std::vector<PresetInfo> list_presets() {
  std::vector<PresetInfo> out;
  for (const auto& p : presets()) out.push_back({p.name, p.description});
  return out;
}

LinearKernelMdp build_env(const ExperimentConfig& config) {
  if (!config.env_preset.empty()) return make_preset(config.env_preset, config.horizon);
  if (!config.env_file.empty()) return load_env(config.env_file);
  return env_from_json(config.env_inline);
}

UclkConfig uclk_config(const ExperimentConfig& config, std::uint64_t seed) {
  UclkConfig u;
  u.lambda = config.lambda;
  u.delta_conf = config.delta_conf;
  u.horizon = config.horizon;
  u.seed = seed;
  u.beta = config.beta;
  u.rounds = config.rounds;
  u.per_epoch_radius = config.per_epoch_radius;
  u.clip = config.clip;
  u.solver = config.solver;
  u.mc_samples = config.mc_samples;
  return u;
}

// -------------------------------------------------------------- baselines

namespace {

RunTrace single_epoch_trace(const LinearKernelMdp& env, long horizon, std::uint64_t seed, Mat policy, Mat q,
                            const std::function<ActionId(StateId)>& act) {
  if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
  RunTrace trace;
  trace.horizon = horizon;
  trace.gamma = env.gamma();
  trace.seed = seed;
  EpochRecord epoch;
  epoch.t_start = 1;
  epoch.policy = std::move(policy);
  epoch.q = std::move(q);
  trace.epochs.push_back(std::move(epoch));
  CounterRng env_rng = CounterRng::from_seed(seed, Stream::kEnv);
  StateId s = 0;
  trace.steps.reserve(static_cast<std::size_t>(horizon));
  for (long t = 1; t <= horizon; ++t) {
    const ActionId a = act(s);
    const StepResult out = step(env, s, a, env_rng);
    trace.steps.push_back({t, 0, s, a, out.reward, out.next, 0.0});
    s = out.next;
  }
  return trace;
}

}  // namespace

RunTrace baseline_random(const LinearKernelMdp& env, long horizon, std::uint64_t seed) {
  CounterRng policy_rng = CounterRng::from_seed(seed, Stream::kPolicy);
  const int A = env.n_actions();
  Mat uniform = Mat::Constant(env.n_states(), A, 1.0 / A);
  return single_epoch_trace(env, horizon, seed, std::move(uniform), Mat(), [&](StateId) {
    return static_cast<ActionId>(policy_rng.uniform_index(static_cast<std::uint64_t>(A)));
  });
}

RunTrace baseline_oracle_greedy(const LinearKernelMdp& env, long horizon, std::uint64_t seed) {
  const OptimalValues opt = optimal_values(env);
  QTable q{opt.q, 0};
  const std::vector<ActionId> actions = greedy_policy(q);
  Mat pi = Mat::Zero(env.n_states(), env.n_actions());
  for (StateId s = 0; s < env.n_states(); ++s) pi(s, actions[static_cast<std::size_t>(s)]) = 1.0;
  return single_epoch_trace(env, horizon, seed, std::move(pi), opt.q,
                            [&](StateId s) { return actions[static_cast<std::size_t>(s)]; });
}

RunTrace run_uclk_doubling(const LinearKernelMdp& env, const UclkConfig& config) {
  if (config.horizon < 1) throw std::invalid_argument("run_uclk_doubling: horizon must be at least 1");
  RunTrace out;
  out.lambda = config.lambda;
  out.horizon = config.horizon;
  out.gamma = env.gamma();
  out.seed = config.seed;
  StateId s = config.initial_state;
  long done = 0;
  for (int phase = 0; done < config.horizon; ++phase) {
    UclkConfig c = config;
    const long length = std::min<long>(1L << std::min(phase, 62), config.horizon - done);
    c.horizon = length;
    c.initial_state = s;
    c.seed = CounterRng::from_seed(config.seed, Stream::kEnv, static_cast<std::uint64_t>(phase) + 1).key();
    RunTrace part = run_uclk(env, c);
    if (phase == 0) {
      out.beta = part.beta;
      out.rounds = part.rounds;
    }
    const int epoch_offset = static_cast<int>(out.epochs.size());
    for (auto& e : part.epochs) {
      e.t_start += done;
      out.epochs.push_back(std::move(e));
    }
    for (auto& st : part.steps) {
      st.t += done;
      st.epoch += epoch_offset;
      out.steps.push_back(st);
    }
    s = out.steps.back().next_state;
    done += length;
  }
  return out;
}

// ------------------------------------------------------------- experiments

SeedResult run_seed(const ExperimentConfig& config, const LinearKernelMdp& env, std::uint64_t seed) {
  SeedResult r;
  r.seed = seed;
  try {
    switch (config.algorithm) {
      case Algorithm::kUclk: {
        const UclkConfig u = uclk_config(config, seed);
        r.trace = config.doubling_trick ? run_uclk_doubling(env, u) : run_uclk(env, u);
        break;
      }
      case Algorithm::kRandom: r.trace = baseline_random(env, config.horizon, seed); break;
      case Algorithm::kOracleGreedy: r.trace = baseline_oracle_greedy(env, config.horizon, seed); break;
    }
    RegretOptions ro;
    ro.method = config.method;
    ro.rollout_horizon = config.rollout_horizon;
    ro.clamp_at_zero = config.clamp_regret;
    r.regret = regret_trace(r.trace, env, ro);
    r.k_bound = epoch_bound(env.dim(), config.lambda, static_cast<double>(config.horizon), env.gamma());
    r.max_evi_residual = 0.0;
    for (const auto& e : r.trace.epochs) {
      if (std::isnan(e.evi_residual) || std::isnan(r.max_evi_residual)) {
        r.max_evi_residual = std::numeric_limits<double>::quiet_NaN();
      } else {
        r.max_evi_residual = std::max(r.max_evi_residual, e.evi_residual);
      }
    }
    if (config.oracle_checks && config.algorithm == Algorithm::kUclk) {
      const Mat q_star = optimal_values(env).q;
      const bool in_b = b_contains(env, env.theta_star());
      r.coverage_checked = true;
      r.coverage_all = true;
      for (const auto& e : r.trace.epochs) {
        const bool covered = in_b && epoch_covers(e, env.theta_star());
        r.coverage_all = r.coverage_all && covered;
        r.epoch_ok.push_back(covered && epoch_optimistic(e, q_star) ? 1 : 0);
      }
    }
    r.ok = true;
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
  }
  return r;
}

std::vector<AggregateRow> aggregate(const std::vector<SeedResult>& results, const std::vector<long>& checkpoints) {
  std::vector<AggregateRow> rows;
  std::vector<std::pair<double, double>> curve;
  for (long c : checkpoints) {
    AggregateRow row;
    row.checkpoint = c;
    std::vector<double> vals;
    for (const auto& r : results) {
      if (r.ok && static_cast<long>(r.regret.cumulative.size()) >= c) {
        vals.push_back(r.regret.cumulative[static_cast<std::size_t>(c - 1)]);
      }
    }
    row.n_seeds = static_cast<int>(vals.size());
    if (vals.empty()) {
      row.mean = row.std = row.min = row.max = std::numeric_limits<double>::quiet_NaN();
    } else {
      double sum = 0.0;
      for (double v : vals) sum += v;
      row.mean = sum / static_cast<double>(vals.size());
      double ss = 0.0;
      for (double v : vals) ss += (v - row.mean) * (v - row.mean);
      row.std = vals.size() > 1 ? std::sqrt(ss / static_cast<double>(vals.size() - 1)) : 0.0;
      row.min = *std::min_element(vals.begin(), vals.end());
      row.max = *std::max_element(vals.begin(), vals.end());
    }
    if (row.n_seeds > 0 && row.mean > 0.0) curve.emplace_back(static_cast<double>(c), row.mean);
    row.slope_so_far = curve.size() >= 3 ? loglog_slope(curve) : std::numeric_limits<double>::quiet_NaN();
    rows.push_back(row);
  }
  return rows;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const ExperimentOptions& options) {
  const LinearKernelMdp env = build_env(config);
  const fs::path out_dir(config.out_dir);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + out_dir.string() + "': " + ec.message());

  ExperimentResult result;
  result.seeds.resize(config.seeds.size());
  std::atomic<std::size_t> next{0};
  std::mutex io_error_mutex;
  std::string io_error;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= config.seeds.size()) return;
      SeedResult r = run_seed(config, env, config.seeds[i]);
      try {
        const fs::path dir = out_dir / ("seed_" + std::to_string(r.seed));
        fs::create_directories(dir);
        fs::remove(dir / "FAILED");
        if (r.ok) {
          write_file(dir / "steps.csv", steps_csv(config, r, options.reproducible));
        } else {
          fs::remove(dir / "steps.csv");
          write_file(dir / "FAILED", r.error + "\n");
        }
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(io_error_mutex);
        if (io_error.empty()) io_error = e.what();
      }
      if (options.on_seed_done) options.on_seed_done(r);
      result.seeds[i] = std::move(r);
    }
  };
  const int jobs = std::max(1, std::min<int>(options.jobs, static_cast<int>(config.seeds.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (!io_error.empty()) throw std::runtime_error(io_error);

  const std::vector<long> checkpoints = effective_checkpoints(config);
  result.rows = aggregate(result.seeds, checkpoints);

  std::ostringstream summary;
  summary << header(config, options.reproducible);
  summary << "seed,T,K_epochs,K_bound,final_regret,coverage_all_epochs,max_evi_residual\n";
  std::string failed_list;
  for (const auto& r : result.seeds) {
    if (!r.ok) {
      ++result.failed;
      failed_list += (failed_list.empty() ? "" : ",") + std::to_string(r.seed);
      continue;
    }
    summary << r.seed << ',' << r.trace.steps.size() << ',' << r.trace.epochs.size() << ',' << fmt(r.k_bound) << ','
            << fmt(r.regret.cumulative.empty() ? 0.0 : r.regret.cumulative.back()) << ','
            << (r.coverage_checked ? (r.coverage_all ? "1" : "0") : "NA") << ',' << fmt(r.max_evi_residual) << '\n';
  }
  write_file(out_dir / "summary.csv", summary.str());

  std::ostringstream agg;
  agg << header(config, options.reproducible);
  agg << "# failed_seeds: " << (failed_list.empty() ? "none" : failed_list) << "\n";
  agg << "checkpoint_T,mean_regret,std_regret,min,max,n_seeds,slope_so_far\n";
  for (const auto& row : result.rows) {
    agg << row.checkpoint << ',' << fmt(row.mean) << ',' << fmt(row.std) << ',' << fmt(row.min) << ','
        << fmt(row.max) << ',' << row.n_seeds << ',' << fmt(row.slope_so_far) << '\n';
  }
  write_file(out_dir / "aggregate.csv", agg.str());
  return result;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  auto to_u64 = [&](const std::string& s) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
      throw ConfigError("bad seed list '" + text + "'");
    }
    return static_cast<std::uint64_t>(std::stoull(s));
  };
  while (std::getline(ss, item, ',')) {
    const auto dash = item.find('-');
    if (dash == std::string::npos) {
      out.push_back(to_u64(item));
    } else {
      const std::uint64_t lo = to_u64(item.substr(0, dash));
      const std::uint64_t hi = to_u64(item.substr(dash + 1));
      if (hi < lo) throw ConfigError("bad seed range '" + item + "'");
      for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
    }
  }
  if (out.empty()) throw ConfigError("empty seed list");
  return out;
}

}  // namespace lkmdp
