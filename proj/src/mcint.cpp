#include "lkmdp/mcint.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <stdexcept>

namespace lkmdp {

McSampler::McSampler(const LinearKernelMdp& env) : env_(&env) {
  const ProductData* data = env.product();
  if (!data) throw UnsupportedOperation("Monte-Carlo integration needs a product-family environment");
  if (data->psi.minCoeff() < 0.0) throw std::invalid_argument("psi must be nonnegative for sampling");
  const int d = env.dim();
  const int S = env.n_states();
  cdf_.resize(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) {
    const double total = data->integrals[j];
    if (total <= 0.0) continue;
    auto& cdf = cdf_[static_cast<std::size_t>(j)];
    cdf.resize(static_cast<std::size_t>(S));
    double acc = 0.0;
    for (int s = 0; s < S; ++s) {
      acc += data->psi(s, j);
      cdf[static_cast<std::size_t>(s)] = acc / total;
    }
    cdf.back() = 1.0;
  }
}

StateId McSampler::sample(int j, CounterRng& rng) const {
  const auto& cdf = cdf_.at(static_cast<std::size_t>(j));
  if (cdf.empty()) throw std::invalid_argument("McSampler: coordinate has zero integration constant");
  const double u = rng.uniform();
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  // Skip zero-mass states that share the CDF value of their predecessor.
  return static_cast<StateId>(std::min<std::ptrdiff_t>(it - cdf.begin(), static_cast<std::ptrdiff_t>(cdf.size()) - 1));
}

Vec mc_integrals(const McSampler& sampler, const ValueFn& value, int R, const CounterRng& rng) {
  if (R < 1) throw std::invalid_argument("mc_integrals: R must be positive");
  const int d = sampler.dim();
  Vec g = Vec::Zero(d);
  for (int j = 0; j < d; ++j) {
    if (!sampler.active(j)) continue;
    CounterRng sub = rng.split(static_cast<std::uint64_t>(j));
    double sum = 0.0;
    for (int i = 0; i < R; ++i) sum += value(sampler.sample(j, sub));
    g[j] = sampler.integrals()[j] * sum / R;
  }
  return g;
}

Vec mc_phi_v(const McSampler& sampler, const ValueFn& value, StateId s, ActionId a, int R, const CounterRng& rng) {
  const ProductData& data = *sampler.env().product();
  const Vec mu = data.mu.row(static_cast<Eigen::Index>(sampler.env().index(s, a))).transpose();
  return mu.cwiseProduct(mc_integrals(sampler, value, R, rng));
}

namespace {

// r(s,a) + γ·[max_{θ∈C∩B} ⟨θ, μ(s,a) ∘ g⟩]_clip, with g the integral estimates.
double backup(const McSampler& sampler, const ConfidenceSet& cs, const Vec& g, StateId s, ActionId a,
              const SampledEviOptions& options, long* calls) {
  const LinearKernelMdp& env = sampler.env();
  const Vec mu = env.product()->mu.row(static_cast<Eigen::Index>(env.index(s, a))).transpose();
  const Vec x = mu.cwiseProduct(g);
  double inner = constrained_linear_max(cs, x, options.solver).value;
  if (calls) ++*calls;
  if (options.clip) inner = std::clamp(inner, 0.0, 1.0 / (1.0 - env.gamma()));
  return env.reward(s, a) + env.gamma() * inner;
}

}  // namespace

SampledQ::SampledQ(const McSampler& sampler, ConfidenceSet cs, Vec final_integrals, std::vector<double> final_values,
                   bool feasible, const SampledEviOptions& options)
    : sampler_(&sampler),
      cs_(std::move(cs)),
      final_integrals_(std::move(final_integrals)),
      final_values_(std::move(final_values)),
      feasible_(feasible),
      options_(options) {}

double SampledQ::q(StateId s, ActionId a) const {
  const LinearKernelMdp& env = sampler_->env();
  if (!feasible_) return 1.0 / (1.0 - env.gamma());
  return backup(*sampler_, cs_, final_integrals_, s, a, options_, nullptr);
}

ActionId SampledQ::greedy_action(StateId s) const {
  ActionId best = 0;
  double best_q = q(s, 0);
  for (ActionId a = 1; a < sampler_->env().n_actions(); ++a) {
    const double v = q(s, a);
    if (v > best_q) {
      best = a;
      best_q = v;
    }
  }
  return best;
}

SampledQ sampled_evi(const McSampler& sampler, const ConfidenceSet& cs, int rounds, int R, const CounterRng& rng,
                     const SampledEviOptions& options) {
  if (rounds < 1) throw std::invalid_argument("sampled_evi: need at least one round");
  if (R < 1) throw std::invalid_argument("sampled_evi: R must be positive");
  const LinearKernelMdp& env = sampler.env();
  const int d = env.dim();
  const int A = env.n_actions();
  const double vmax = 1.0 / (1.0 - env.gamma());
  const Vec I = sampler.integrals();

  if (!cs.feasible_point(options.solver.tol)) {
    return SampledQ(sampler, cs, I * vmax, {}, false, options);
  }

  // Lattice of states, level u = 1..U, laid out as [(u−1)·d·R + j·R + i].
  const std::size_t level_size = static_cast<std::size_t>(d) * R;
  std::vector<StateId> lattice(static_cast<std::size_t>(rounds) * level_size, -1);
  for (int j = 0; j < d; ++j) {
    if (!sampler.active(j)) continue;
    CounterRng sub = rng.split(static_cast<std::uint64_t>(j));
    for (int u = 1; u <= rounds; ++u) {
      for (int i = 0; i < R; ++i) {
        lattice[(u - 1) * level_size + static_cast<std::size_t>(j) * R + i] = sampler.sample(j, sub);
      }
    }
  }

  long calls = 0;
  std::size_t peak = 0;
  // g^{(0)}: V^{(0)} ≡ 1/(1−γ) integrates exactly.
  Vec g = I * vmax;
  std::vector<double> values;
  for (int u = 1; u <= rounds - 1; ++u) {
    std::vector<double> next(level_size, 0.0);
    std::map<StateId, double> memo;  // V^{(u)} at distinct lattice states of this level
    for (int j = 0; j < d; ++j) {
      if (!sampler.active(j)) continue;
      for (int i = 0; i < R; ++i) {
        const StateId s = lattice[(u - 1) * level_size + static_cast<std::size_t>(j) * R + i];
        auto it = memo.find(s);
        if (it == memo.end()) {
          double best = -std::numeric_limits<double>::infinity();
          for (ActionId a = 0; a < A; ++a) best = std::max(best, backup(sampler, cs, g, s, a, options, &calls));
          it = memo.emplace(s, best).first;
        }
        next[static_cast<std::size_t>(j) * R + i] = it->second;
      }
    }
    peak = std::max(peak, values.size() + next.size() + memo.size());
    values = std::move(next);
    Vec g_next = Vec::Zero(d);
    for (int j = 0; j < d; ++j) {
      if (!sampler.active(j)) continue;
      double sum = 0.0;
      for (int i = 0; i < R; ++i) sum += values[static_cast<std::size_t>(j) * R + i];
      g_next[j] = I[j] * sum / R;
    }
    g = std::move(g_next);
  }

  SampledQ out(sampler, cs, g, std::move(values), true, options);
  out.peak_stored_values = peak;
  out.solver_calls = calls;
  return out;
}

}  // namespace lkmdp
