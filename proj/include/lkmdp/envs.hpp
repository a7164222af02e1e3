#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "lkmdp/rng.hpp"
#include "lkmdp/types.hpp"
#include "lkmdp/validity.hpp"

namespace lkmdp {

enum class Family { kTabular, kMixture, kProduct, kHard };

std::string to_string(Family f);
Family family_from_string(const std::string& name);

// Transition tensor indexed [s][a](s').
using Kernel = std::vector<std::vector<Vec>>;

struct HardMdpParams {
  int dim = 2;           // d ≥ 2; the action set is {−1, +1}^{d−1}
  double delta = 0.1;    // δ ∈ (0, 1/3]
  double Delta = 0.05;   // Δ ∈ [0, δ]
  double gamma = 0.9;
};

// δ = 1 − γ and Δ = d·sqrt(1 − γ)/(90·sqrt(2T)), the lower-bound regime.
HardMdpParams lower_bound_hard_params(int dim, double gamma, double horizon);

// Element-wise product features φ_j(s'|s,a) = ψ_j(s')·μ_j(s,a).
struct ProductData {
  Mat psi;                // |S| × d, row s' is ψ(s')
  Mat mu;                 // (|S|·|A|) × d, row s·|A| + a is μ(s,a)
  Vec integrals;          // I_j = Σ_{s'} ψ_j(s')
};

/// Everything that defines a linear kernel MDP. No stochasticity checks are
/// made here; the make_*_env constructors validate before building one.
struct EnvParts {
  Family family = Family::kTabular;
  int n_states = 0;
  int n_actions = 0;
  double gamma = 0.0;
  Mat rewards;                          // |S| × |A|
  std::vector<Mat> features;            // per (s,a) at s·|A| + a: d × |S|, column s' = φ(s'|s,a)
  Vec theta_star;
  std::shared_ptr<const ValiditySet> validity;
  std::optional<ProductData> product;
  std::optional<HardMdpParams> hard;
  std::vector<int> hard_signs;          // θ sign pattern for the hard family
};

/// Finite linear kernel MDP: P(s'|s,a) = ⟨φ(s'|s,a), θ*⟩.
/// Immutable after construction; safe to share across threads.
class LinearKernelMdp {
 public:
  explicit LinearKernelMdp(EnvParts parts);

  Family family() const { return parts_.family; }
  int n_states() const { return parts_.n_states; }
  int n_actions() const { return parts_.n_actions; }
  int dim() const { return static_cast<int>(parts_.theta_star.size()); }
  double gamma() const { return parts_.gamma; }
  const Mat& rewards() const { return parts_.rewards; }
  double reward(StateId s, ActionId a) const { return parts_.rewards(s, a); }
  const Vec& theta_star() const { return parts_.theta_star; }

  // d × |S| matrix whose column s' is φ(s'|s,a).
  const Mat& features(StateId s, ActionId a) const { return parts_.features[index(s, a)]; }
  Vec phi(StateId next, StateId s, ActionId a) const { return features(s, a).col(next); }
  // φ_V(s,a) = Σ_{s'} φ(s'|s,a)·V(s').
  Vec phi_v(const Vec& value, StateId s, ActionId a) const;
  // ⟨φ(·|s,a), θ⟩ as an |S|-vector.
  Vec induced(const Vec& theta, StateId s, ActionId a) const;
  // True transition vector P(·|s,a).
  const Vec& transition(StateId s, ActionId a) const { return transitions_[index(s, a)]; }

  const std::shared_ptr<const ValiditySet>& validity() const { return parts_.validity; }
  const ProductData* product() const { return parts_.product ? &*parts_.product : nullptr; }
  const HardMdpParams* hard() const { return parts_.hard ? &*parts_.hard : nullptr; }
  const std::vector<int>& hard_signs() const { return parts_.hard_signs; }
  const EnvParts& parts() const { return parts_; }

  std::size_t index(StateId s, ActionId a) const {
    return static_cast<std::size_t>(s) * parts_.n_actions + a;
  }

 private:
  EnvParts parts_;
  std::vector<Vec> transitions_;
};

LinearKernelMdp make_tabular_env(const Kernel& P, const Mat& rewards, double gamma);

// θ* = vec(W) (column-major, index k + m·j). The validity set keeps every
// weight column that some ψ(s,a) uses on the m-simplex.
LinearKernelMdp make_mixture_env(const std::vector<Kernel>& base_kernels,
                                 const std::vector<std::vector<Vec>>& psi,  // [s][a] ∈ Δ^{d'}
                                 const Mat& W, double gamma, const Mat& rewards);

// psi: |S| × d with nonnegative entries; mu: [s][a] d-vectors with |entries| ≤ 1.
// When D is given, |I_j| ≤ D is enforced.
LinearKernelMdp make_product_env(const Mat& psi, const std::vector<std::vector<Vec>>& mu,
                                 const Vec& theta, double gamma, const Mat& rewards,
                                 std::optional<double> D = std::nullopt);

// States x₀ = 0, x₁ = 1; actions are sign vectors in lexicographic order
// (−1 before +1, first coordinate most significant).
LinearKernelMdp make_hard_env(const HardMdpParams& params, const std::vector<int>& theta_signs);

// Sign vector for a hard-family action index, and the inverse map.
std::vector<int> hard_action_signs(int dim, ActionId action);
ActionId hard_action_index(const std::vector<int>& signs);

struct StepResult {
  StateId next;
  double reward;
};

// Samples s' ~ P(·|s,a) by inverse CDF over the enumerated states.
StepResult step(const LinearKernelMdp& env, StateId s, ActionId a, CounterRng& rng);

Vec phi_v(const LinearKernelMdp& env, const Vec& value, StateId s, ActionId a);

enum class BMode { kMembership, kProject };

// Exact membership: every ⟨φ(·|s,a), θ⟩ has entries ≥ −1e-10 and sums to 1 ± 1e-8.
bool b_contains(const LinearKernelMdp& env, const Vec& theta);
// Projection onto the family's representation of B; UnsupportedOperation if unavailable.
Vec b_project(const LinearKernelMdp& env, const Vec& theta);
std::variant<bool, Vec> b_oracle(const LinearKernelMdp& env, const Vec& theta, BMode mode);

struct KernelReport {
  double max_simplex_violation = 0.0;
  std::vector<std::pair<StateId, ActionId>> flagged;  // (s,a) whose induced vector is not a distribution
  double theta_norm_slack = 0.0;   // ‖θ*‖₂ − √d (≤ 0 when valid)
  double phi_v_slack = 0.0;        // max over random V ∈ [0,1]^S of ‖φ_V‖₂ − √d
  double max_reward_violation = 0.0;

  bool ok(double tol = 1e-8) const {
    return flagged.empty() && max_simplex_violation <= tol && theta_norm_slack <= tol &&
           phi_v_slack <= tol && max_reward_violation <= tol;
  }
};

KernelReport validate_kernel(const LinearKernelMdp& env, std::uint64_t seed = 0, int n_random_values = 100);

}  // namespace lkmdp
