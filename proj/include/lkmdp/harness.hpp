#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lkmdp/envs.hpp"
#include "lkmdp/eval.hpp"
#include "lkmdp/uclk.hpp"

namespace lkmdp {

// Malformed or out-of-range configuration / environment spec text.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Algorithm { kUclk, kRandom, kOracleGreedy };
std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& name);

struct ExperimentConfig {
  // Exactly one environment source: a preset name, a spec file, or inline spec JSON.
  std::string env_preset;
  std::string env_file;
  std::string env_inline;

  Algorithm algorithm = Algorithm::kUclk;
  double lambda = 1.0;
  double delta_conf = 0.05;
  long horizon = 1000;
  std::optional<double> beta;
  std::optional<int> rounds;
  bool per_epoch_radius = false;
  bool clip = true;
  SolverOptions solver;
  int mc_samples = 0;           // > 0: sampled planning (product family)
  bool doubling_trick = false;  // restart with horizons 2^i, as if T were unknown
  std::vector<std::uint64_t> seeds{0};
  std::string out_dir = "out";
  std::vector<long> checkpoints;  // empty: default ladder up to T
  RegretMethod method = RegretMethod::kExactStationary;
  int rollout_horizon = 200;
  bool clamp_regret = false;
  bool oracle_checks = true;    // coverage / optimism columns
};

// Strict JSON parsing; unknown keys, bad types and out-of-range values raise ConfigError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
// Canonical JSON text with every field present (keys sorted). The output
// directory is included only when `with_out_dir` is true.
std::string serialize_config(const ExperimentConfig& config, bool with_out_dir = true);

// Checkpoints actually used for aggregation.
std::vector<long> effective_checkpoints(const ExperimentConfig& config);

// Environment spec JSON <-> environment.
LinearKernelMdp env_from_json(const std::string& text);
LinearKernelMdp load_env(const std::string& path);
std::string env_spec_for_preset(const std::string& name, long horizon);
LinearKernelMdp make_preset(const std::string& name, long horizon);

struct PresetInfo {
  std::string name;
  std::string description;
};
std::vector<PresetInfo> list_presets();

LinearKernelMdp build_env(const ExperimentConfig& config);
UclkConfig uclk_config(const ExperimentConfig& config, std::uint64_t seed);

RunTrace baseline_random(const LinearKernelMdp& env, long horizon, std::uint64_t seed);
RunTrace baseline_oracle_greedy(const LinearKernelMdp& env, long horizon, std::uint64_t seed);
// UCLK restarted on horizons 1, 2, 4, ... until `config.horizon` steps are
// played; phase i uses seed-derived streams and continues from the last state.
RunTrace run_uclk_doubling(const LinearKernelMdp& env, const UclkConfig& config);

struct SeedResult {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  RunTrace trace;
  RegretTrace regret;
  std::vector<int> epoch_ok;  // per epoch: θ* ∈ C_k ∩ B and Q_k ≥ Q* − 1e-6 (−1: not checked)
  bool coverage_all = false;  // θ* ∈ C_k for every epoch
  bool coverage_checked = false;
  double k_bound = 0.0;
  double max_evi_residual = 0.0;
};

// Runs one seed end to end (environment, algorithm, regret, oracle checks).
SeedResult run_seed(const ExperimentConfig& config, const LinearKernelMdp& env, std::uint64_t seed);

struct AggregateRow {
  long checkpoint = 0;
  double mean = 0.0;
  double std = 0.0;
  double min = 0.0;
  double max = 0.0;
  int n_seeds = 0;
  double slope_so_far = 0.0;  // NaN with fewer than three usable checkpoints
};
std::vector<AggregateRow> aggregate(const std::vector<SeedResult>& results, const std::vector<long>& checkpoints);

struct ExperimentOptions {
  int jobs = 1;
  bool reproducible = false;
  // Called from worker threads after each seed finishes.
  std::function<void(const SeedResult&)> on_seed_done;
};

struct ExperimentResult {
  std::vector<SeedResult> seeds;  // in config order
  std::vector<AggregateRow> rows;
  int failed = 0;
};

// Writes <out>/seed_<s>/steps.csv, <out>/summary.csv and <out>/aggregate.csv.
// Failed seeds get <out>/seed_<s>/FAILED with the error text and are listed in
// the aggregate header. Throws std::runtime_error on I/O failure.
ExperimentResult run_experiment(const ExperimentConfig& config, const ExperimentOptions& options = {});

// Parses "0,3,5-9" into seed values.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

}  // namespace lkmdp
