#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lkmdp/confset.hpp"
#include "lkmdp/envs.hpp"
#include "lkmdp/evi.hpp"

namespace lkmdp {

struct UclkConfig {
  double lambda = 1.0;
  double delta_conf = 0.05;
  long horizon = 1000;
  std::uint64_t seed = 0;
  std::optional<double> beta;   // replaces beta_radius(...)
  std::optional<int> rounds;    // replaces u_rounds(...)
  // Recompute β and U from the epoch start t_k instead of the full horizon.
  bool per_epoch_radius = false;
  bool clip = true;
  SolverOptions solver;
  StateId initial_state = 0;
  // > 0: plan with Monte-Carlo sampled EVI using this many samples per
  // coordinate (product-family environments only).
  int mc_samples = 0;
};

struct StepRecord {
  long t = 0;
  int epoch = 0;
  StateId state = 0;
  ActionId action = 0;
  double reward = 0.0;
  StateId next_state = 0;
  double logdet_ratio = 0.0;  // log det Σ_{t+1} − log det Σ_{t_k}
};

struct EpochRecord {
  long t_start = 1;
  Vec theta_hat;
  double beta = 0.0;
  int rounds = 0;
  double log_det = 0.0;     // log det Σ_{t_k}
  Mat shape;                // Σ_{t_k}
  Mat q;                    // Q_k
  Mat policy;               // |S| × |A| action probabilities (one-hot for greedy play)
  bool feasible = true;     // C_k ∩ B was non-empty
  double evi_residual = 0.0;  // max |Q^{(U)} − Q^{(U−1)}|; NaN for sampled planning
  long solver_calls = 0;
  long nonconverged = 0;
};

struct RunTrace {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  double lambda = 1.0;
  double beta = 0.0;  // value used for the first epoch
  int rounds = 0;
  long horizon = 0;
  double gamma = 0.0;
  std::uint64_t seed = 0;
};

// Upper bound 2d·ln((λ + T·d)/(λ(1−γ)²)) on the number of epochs.
double epoch_bound(int d, double lambda, double horizon, double gamma);

// Confidence set of the epoch starting now; the shape is a copy of Σ, so later
// updates to `design` do not move it.
ConfidenceSet epoch_refit(const RidgeDesign& design, double beta, std::shared_ptr<const ValiditySet> validity);
ConfidenceSet epoch_refit(const RidgeDesign& design, double delta_conf, double gamma, double horizon,
                          std::shared_ptr<const ValiditySet> validity);

// UCLK: epochs of greedy play on the optimistic Q, refit when det Σ doubles,
// stop after `horizon` steps. Deterministic given the seed.
RunTrace run_uclk(const LinearKernelMdp& env, const UclkConfig& config);

// Rebuild (Σ, b) of the regression that produced each epoch's θ̂ from the
// trace, returning the θ̂ values; used to audit regression targets.
std::vector<Vec> replay_theta_hats(const LinearKernelMdp& env, const RunTrace& trace);

}  // namespace lkmdp
