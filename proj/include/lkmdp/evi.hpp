#pragma once

#include <vector>

#include "lkmdp/confset.hpp"
#include "lkmdp/envs.hpp"

namespace lkmdp {

struct QTable {
  Mat values;      // |S| × |A|
  int u_done = 0;  // sweeps actually performed
};

struct EviOptions {
  SolverOptions solver;
  // Clip ⟨θ, φ_V⟩ to [0, 1/(1−γ)] inside every backup.
  bool clip = true;
};

struct EviResult {
  QTable q;
  bool feasible = true;       // false: C ∩ B was empty and Q^{(0)} was returned
  std::vector<double> gaps;   // gaps[u-1] = max |Q^{(u)} − Q^{(u−1)}|
  long solver_calls = 0;
  long nonconverged = 0;      // inner maximizations that hit the iteration cap
};

// Per-(s,a) warm starts and counters shared by consecutive sweeps.
struct BackupWorkspace {
  std::vector<Vec> warm;
  long solver_calls = 0;
  long nonconverged = 0;
};

// Q(s,a) = r(s,a) + γ·max_{θ ∈ C∩B} ⟨θ, φ_{V_prev}(s,a)⟩ with V_prev(s) = max_a Q_prev(s,a).
// Only the feature map, rewards and γ of `model` are read.
QTable optimistic_backup(const QTable& prev, const ConfidenceSet& cs, const LinearKernelMdp& model,
                         const EviOptions& options = {}, BackupWorkspace* workspace = nullptr);

// U optimistic sweeps from Q^{(0)} ≡ 1/(1−γ); returns Q^{(0)} when C ∩ B is empty.
EviResult evi(const ConfidenceSet& cs, int rounds, const LinearKernelMdp& model, const EviOptions& options = {});

// Lowest-index action attaining the row maximum.
ActionId greedy_action(const QTable& q, StateId s);
std::vector<ActionId> greedy_policy(const QTable& q);
Vec greedy_values(const QTable& q);

}  // namespace lkmdp
