#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lkmdp/envs.hpp"
#include "lkmdp/uclk.hpp"

namespace lkmdp {

struct OptimalValues {
  Vec v;
  Mat q;
  int iterations = 0;
};

// Value iteration until the sup-norm update drops below tol·(1−γ)/γ.
OptimalValues optimal_values(const LinearKernelMdp& env, double tol = 1e-10);

// (V*(x₀), V*(x₁)) of the two-state hard MDP.
std::pair<double, double> hard_mdp_closed_form(double gamma, double delta, double Delta);

// Value of a stationary policy, by solving (I − γP_π)V = r_π directly.
Vec policy_value(const LinearKernelMdp& env, const Mat& policy);
Vec policy_value(const LinearKernelMdp& env, const std::vector<ActionId>& policy);

enum class RegretMethod { kExactStationary, kRollout };
std::string to_string(RegretMethod m);
RegretMethod regret_method_from_string(const std::string& name);

struct RegretOptions {
  RegretMethod method = RegretMethod::kExactStationary;
  int rollout_horizon = 200;   // H for the rollout method
  bool clamp_at_zero = false;  // presentation only; raw Δ_t is kept otherwise
  double tol = 1e-10;
};

struct RegretTrace {
  std::vector<double> delta;       // Δ_t, t = 1..T
  std::vector<double> cumulative;  // prefix sums of delta
  std::vector<double> bias_bound;  // per-step bound on |V̂_t − V_t^π|
  RegretMethod method = RegretMethod::kExactStationary;
  int truncation_horizon = 0;      // rollout only
};

// Δ_t = V*(s_t) − V̂_t(s_t). exact-stationary evaluates the epoch's policy
// exactly (bias ≤ γ^L/(1−γ), L = steps left in the epoch); rollout uses the
// realized discounted reward over the next min(H, T−t+1) steps.
RegretTrace regret_trace(const RunTrace& trace, const LinearKernelMdp& env, const RegretOptions& options = {});

struct VisitCounts {
  std::vector<long> state;               // N_s
  std::vector<std::vector<long>> pair;   // N_{s,a}
  long n0() const { return state.empty() ? 0 : state[0]; }
  long n1() const { return state.size() < 2 ? 0 : state[1]; }
};

// Tallies of visited states s_t (and (s_t, a_t)) over the trace steps.
VisitCounts visit_counts(const RunTrace& trace, int n_states, int n_actions);

// C^{1/(a+1)}·(1−γ)^{−1/(a+1)}·T^{a/(a+1)}.
double sc_to_regret(double C, double a, double gamma, double horizon);

// Least-squares slope of log(regret) against log(T).
double loglog_slope(const std::vector<std::pair<double, double>>& points);

double default_lower_bound_constant();  // 4·sqrt(ln 2)
// γ·d·√T/(1600·c·(1−γ)^{1.5}) − γ/(1−γ)².
double regret_lower_bound(double gamma, int d, double horizon, double c = default_lower_bound_constant());

// θ* ∈ C_k (ellipsoid) for the given epoch, with relative tolerance.
bool epoch_covers(const EpochRecord& epoch, const Vec& theta_star, double tol = 1e-8);
// Q_k ≥ Q* − tol entrywise.
bool epoch_optimistic(const EpochRecord& epoch, const Mat& q_star, double tol = 1e-6);

}  // namespace lkmdp
