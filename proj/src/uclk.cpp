#include "lkmdp/uclk.hpp"

#include "lkmdp/mcint.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace lkmdp {

double epoch_bound(int d, double lambda, double horizon, double gamma) {
  const double g = 1.0 - gamma;
  return 2.0 * d * std::log((lambda + horizon * d) / (lambda * g * g));
}

ConfidenceSet epoch_refit(const RidgeDesign& design, double beta, std::shared_ptr<const ValiditySet> validity) {
  return ConfidenceSet(design.theta_hat(), beta, design.sigma(), std::move(validity));
}

ConfidenceSet epoch_refit(const RidgeDesign& design, double delta_conf, double gamma, double horizon,
                          std::shared_ptr<const ValiditySet> validity) {
  const double beta = beta_radius(design.lambda(), design.dim(), gamma, horizon, delta_conf);
  return epoch_refit(design, beta, std::move(validity));
}

namespace {

Mat one_hot_policy(const std::vector<ActionId>& actions, int n_actions) {
  Mat pi = Mat::Zero(static_cast<Eigen::Index>(actions.size()), n_actions);
  for (std::size_t s = 0; s < actions.size(); ++s) pi(static_cast<Eigen::Index>(s), actions[s]) = 1.0;
  return pi;
}

}  // namespace

RunTrace run_uclk(const LinearKernelMdp& env, const UclkConfig& config) {
  if (config.horizon < 1) throw std::invalid_argument("run_uclk: horizon must be at least 1");
  if (config.initial_state < 0 || config.initial_state >= env.n_states()) {
    throw std::invalid_argument("run_uclk: initial state out of range");
  }
  if (config.beta && !(*config.beta >= 0.0)) throw std::invalid_argument("run_uclk: beta override must be ≥ 0");
  if (config.rounds && *config.rounds < 1) throw std::invalid_argument("run_uclk: rounds override must be ≥ 1");

  const double gamma = env.gamma();
  const double T = static_cast<double>(config.horizon);
  auto beta_at = [&](double t_k) {
    if (config.beta) return *config.beta;
    return beta_radius(config.lambda, env.dim(), gamma, config.per_epoch_radius ? t_k : T, config.delta_conf);
  };
  auto rounds_at = [&](double t_k) {
    if (config.rounds) return *config.rounds;
    return u_rounds(gamma, config.per_epoch_radius ? t_k : T);
  };

  RunTrace trace;
  trace.lambda = config.lambda;
  trace.beta = beta_at(1.0);
  trace.rounds = rounds_at(1.0);
  trace.horizon = config.horizon;
  trace.gamma = gamma;
  trace.seed = config.seed;
  trace.steps.reserve(static_cast<std::size_t>(config.horizon));

  EviOptions evi_options;
  evi_options.solver = config.solver;
  evi_options.clip = config.clip;

  std::optional<McSampler> sampler;
  if (config.mc_samples > 0) sampler.emplace(env);

  CounterRng env_rng = CounterRng::from_seed(config.seed, Stream::kEnv);
  RidgeDesign design(env.dim(), config.lambda);
  StateId s = config.initial_state;
  long t = 1;
  int k = 0;
  while (t <= config.horizon) {
    EpochRecord epoch;
    epoch.t_start = t;
    epoch.beta = beta_at(static_cast<double>(t));
    epoch.rounds = rounds_at(static_cast<double>(t));
    const ConfidenceSet cs = epoch_refit(design, epoch.beta, env.validity());
    epoch.theta_hat = cs.center();
    epoch.log_det = design.log_det();
    epoch.shape = cs.shape();

    std::vector<ActionId> actions;
    Vec v;
    if (sampler) {
      SampledEviOptions mc_options;
      mc_options.solver = config.solver;
      mc_options.clip = config.clip;
      const CounterRng mc_rng = CounterRng::from_seed(config.seed, Stream::kMcint, static_cast<std::uint64_t>(k));
      const SampledQ sq = sampled_evi(*sampler, cs, epoch.rounds, config.mc_samples, mc_rng, mc_options);
      QTable table;
      table.values.resize(env.n_states(), env.n_actions());
      for (StateId st = 0; st < env.n_states(); ++st) {
        for (ActionId a = 0; a < env.n_actions(); ++a) table.values(st, a) = sq.q(st, a);
      }
      epoch.feasible = sq.feasible();
      epoch.evi_residual = std::numeric_limits<double>::quiet_NaN();
      epoch.solver_calls = sq.solver_calls;
      actions = greedy_policy(table);
      v = greedy_values(table);
      epoch.q = std::move(table.values);
    } else {
      EviResult planned = evi(cs, epoch.rounds, env, evi_options);
      epoch.feasible = planned.feasible;
      epoch.evi_residual = planned.gaps.empty() ? 0.0 : planned.gaps.back();
      epoch.solver_calls = planned.solver_calls;
      epoch.nonconverged = planned.nonconverged;
      actions = greedy_policy(planned.q);
      v = greedy_values(planned.q);
      epoch.q = std::move(planned.q.values);
    }
    epoch.policy = one_hot_policy(actions, env.n_actions());

    const double start_log_det = design.log_det();
    do {
      const ActionId a = actions[s];
      const StepResult out = step(env, s, a, env_rng);
      design.update(env.phi_v(v, s, a), v[out.next]);
      trace.steps.push_back({t, k, s, a, out.reward, out.next, design.log_det() - start_log_det});
      s = out.next;
      ++t;
    } while (t <= config.horizon && !doubling_triggered(design, start_log_det));
    trace.epochs.push_back(std::move(epoch));
    ++k;
  }
  return trace;
}

std::vector<Vec> replay_theta_hats(const LinearKernelMdp& env, const RunTrace& trace) {
  RidgeDesign design(env.dim(), trace.lambda);
  std::vector<Vec> out;
  out.reserve(trace.epochs.size());
  std::size_t i = 0;
  for (std::size_t k = 0; k < trace.epochs.size(); ++k) {
    out.push_back(design.theta_hat());
    const Vec v = trace.epochs[k].q.rowwise().maxCoeff();
    for (; i < trace.steps.size() && trace.steps[i].epoch == static_cast<int>(k); ++i) {
      const StepRecord& st = trace.steps[i];
      design.update(env.phi_v(v, st.state, st.action), v[st.next_state]);
    }
  }
  return out;
}

}  // namespace lkmdp
