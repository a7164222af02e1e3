#pragma once

#include <functional>
#include <vector>

#include "lkmdp/confset.hpp"
#include "lkmdp/envs.hpp"
#include "lkmdp/rng.hpp"

namespace lkmdp {

using ValueFn = std::function<double(StateId)>;

/// Draws s ~ ψ_j(·)/I_j for each coordinate j of a product-family environment.
class McSampler {
 public:
  // Throws UnsupportedOperation for non-product environments.
  explicit McSampler(const LinearKernelMdp& env);

  const LinearKernelMdp& env() const { return *env_; }
  int dim() const { return env_->dim(); }
  const Vec& integrals() const { return env_->product()->integrals; }
  // Coordinates with I_j = 0 have no sampler; their estimates are exactly 0.
  bool active(int j) const { return !cdf_[static_cast<std::size_t>(j)].empty(); }

  StateId sample(int j, CounterRng& rng) const;

 private:
  const LinearKernelMdp* env_;
  std::vector<std::vector<double>> cdf_;
};

// g_j = I_j·(1/R)·Σ_i V(s^{i,j}) for every coordinate; coordinate j uses rng.split(j).
Vec mc_integrals(const McSampler& sampler, const ValueFn& value, int R, const CounterRng& rng);

// [φ̂_V(s,a)]_j = I_j·μ_j(s,a)·(1/R)·Σ_i V(s^{i,j}).
Vec mc_phi_v(const McSampler& sampler, const ValueFn& value, StateId s, ActionId a, int R,
             const CounterRng& rng);

struct SampledEviOptions {
  SolverOptions solver;
  bool clip = true;
};

/// Result of the sampled optimistic value iteration: V^{(U−1)} is kept only
/// at the last lattice level, and Q^{(U)}(s,a) is evaluated on demand.
class SampledQ {
 public:
  SampledQ(const McSampler& sampler, ConfidenceSet cs, Vec final_integrals, std::vector<double> final_values,
           bool feasible, const SampledEviOptions& options);

  double q(StateId s, ActionId a) const;
  ActionId greedy_action(StateId s) const;

  bool feasible() const { return feasible_; }
  // I_j·mean of V^{(U−1)} over the last level's samples of coordinate j.
  const Vec& final_integrals() const { return final_integrals_; }
  // V^{(U−1)} at the last level, laid out as [j·R + i]; empty when U = 1.
  const std::vector<double>& final_values() const { return final_values_; }

  std::size_t peak_stored_values = 0;
  long solver_calls = 0;

 private:
  const McSampler* sampler_;
  ConfidenceSet cs_;
  Vec final_integrals_;
  std::vector<double> final_values_;
  bool feasible_;
  SampledEviOptions options_;
};

// Draws the U×R×d state lattice s^{u,i,j} (u = 1..U), evaluates V^{(u)} only at
// lattice states and returns the Q^{(U)} evaluator. If C ∩ B is empty the
// evaluator returns 1/(1−γ) everywhere.
SampledQ sampled_evi(const McSampler& sampler, const ConfidenceSet& cs, int rounds, int R, const CounterRng& rng,
                     const SampledEviOptions& options = {});

}  // namespace lkmdp
