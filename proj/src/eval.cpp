#include "lkmdp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/LU>

namespace lkmdp {

OptimalValues optimal_values(const LinearKernelMdp& env, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("optimal_values: tol must be positive");
  const int S = env.n_states();
  const int A = env.n_actions();
  const double gamma = env.gamma();
  OptimalValues out;
  out.v = Vec::Zero(S);
  out.q = Mat::Zero(S, A);
  const double stop = gamma > 0.0 ? tol * (1.0 - gamma) / gamma : std::numeric_limits<double>::infinity();
  for (;;) {
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) out.q(s, a) = env.reward(s, a) + gamma * env.transition(s, a).dot(out.v);
    }
    const Vec next = out.q.rowwise().maxCoeff();
    const double change = (next - out.v).cwiseAbs().maxCoeff();
    out.v = next;
    ++out.iterations;
    if (change < stop) break;
  }
  return out;
}

std::pair<double, double> hard_mdp_closed_form(double gamma, double delta, double Delta) {
  const double denom = gamma * (2.0 * delta + Delta - 1.0) + 1.0;
  if (!(denom > 0.0) || !(gamma < 1.0)) throw std::logic_error("hard_mdp_closed_form: parameters outside validity");
  const double v0 = gamma * (Delta + delta) / ((1.0 - gamma) * denom);
  const double v1 = (gamma * (Delta + delta) + 1.0 - gamma) / ((1.0 - gamma) * denom);
  return {v0, v1};
}

Vec policy_value(const LinearKernelMdp& env, const Mat& policy) {
  const int S = env.n_states();
  const int A = env.n_actions();
  if (policy.rows() != S || policy.cols() != A) throw std::invalid_argument("policy_value: policy shape mismatch");
  Mat P = Mat::Zero(S, S);
  Vec r = Vec::Zero(S);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const double w = policy(s, a);
      if (w == 0.0) continue;
      r[s] += w * env.reward(s, a);
      P.row(s) += w * env.transition(s, a).transpose();
    }
  }
  const Mat M = Mat::Identity(S, S) - env.gamma() * P;
  return M.partialPivLu().solve(r);
}

Vec policy_value(const LinearKernelMdp& env, const std::vector<ActionId>& policy) {
  if (static_cast<int>(policy.size()) != env.n_states()) throw std::invalid_argument("policy_value: one action per state");
  Mat pi = Mat::Zero(env.n_states(), env.n_actions());
  for (int s = 0; s < env.n_states(); ++s) pi(s, policy[static_cast<std::size_t>(s)]) = 1.0;
  return policy_value(env, pi);
}

std::string to_string(RegretMethod m) {
  return m == RegretMethod::kExactStationary ? "exact-stationary" : "rollout";
}

RegretMethod regret_method_from_string(const std::string& name) {
  if (name == "exact-stationary") return RegretMethod::kExactStationary;
  if (name == "rollout") return RegretMethod::kRollout;
  throw std::invalid_argument("unknown regret method '" + name + "'");
}

RegretTrace regret_trace(const RunTrace& trace, const LinearKernelMdp& env, const RegretOptions& options) {
  const std::size_t T = trace.steps.size();
  const double gamma = env.gamma();
  for (const auto& e : trace.epochs) {
    if (e.policy.rows() != env.n_states() || e.policy.cols() != env.n_actions()) {
      throw std::invalid_argument("regret_trace: trace does not match the environment");
    }
  }
  for (const auto& st : trace.steps) {
    if (st.state < 0 || st.state >= env.n_states() || st.epoch < 0 ||
        st.epoch >= static_cast<int>(trace.epochs.size())) {
      throw std::invalid_argument("regret_trace: trace does not match the environment");
    }
  }

  const Vec v_star = optimal_values(env, options.tol).v;
  RegretTrace out;
  out.method = options.method;
  out.delta.resize(T);
  out.cumulative.resize(T);
  out.bias_bound.resize(T);

  if (options.method == RegretMethod::kExactStationary) {
    std::vector<Vec> values;
    values.reserve(trace.epochs.size());
    for (const auto& e : trace.epochs) values.push_back(policy_value(env, e.policy));
    // Steps left in the current epoch, counted backwards.
    std::vector<long> remaining(T, 0);
    for (std::size_t i = T; i-- > 0;) {
      remaining[i] = (i + 1 < T && trace.steps[i + 1].epoch == trace.steps[i].epoch) ? remaining[i + 1] + 1 : 1;
    }
    for (std::size_t i = 0; i < T; ++i) {
      const auto& st = trace.steps[i];
      out.delta[i] = v_star[st.state] - values[static_cast<std::size_t>(st.epoch)][st.state];
      const bool last_epoch = st.epoch + 1 == static_cast<int>(trace.epochs.size());
      out.bias_bound[i] = last_epoch ? 0.0 : std::pow(gamma, static_cast<double>(remaining[i])) / (1.0 - gamma);
    }
  } else {
    if (options.rollout_horizon < 1) throw std::invalid_argument("regret_trace: rollout horizon must be positive");
    out.truncation_horizon = options.rollout_horizon;
    for (std::size_t i = 0; i < T; ++i) {
      const std::size_t h = std::min<std::size_t>(static_cast<std::size_t>(options.rollout_horizon), T - i);
      double ret = 0.0;
      double w = 1.0;
      for (std::size_t j = 0; j < h; ++j) {
        ret += w * trace.steps[i + j].reward;
        w *= gamma;
      }
      out.delta[i] = v_star[trace.steps[i].state] - ret;
      out.bias_bound[i] = w / (1.0 - gamma);
    }
  }

  double acc = 0.0;
  for (std::size_t i = 0; i < T; ++i) {
    if (options.clamp_at_zero) out.delta[i] = std::max(0.0, out.delta[i]);
    acc += out.delta[i];
    out.cumulative[i] = acc;
  }
  return out;
}

VisitCounts visit_counts(const RunTrace& trace, int n_states, int n_actions) {
  VisitCounts c;
  c.state.assign(static_cast<std::size_t>(n_states), 0);
  c.pair.assign(static_cast<std::size_t>(n_states), std::vector<long>(static_cast<std::size_t>(n_actions), 0));
  for (const auto& st : trace.steps) {
    if (st.state < 0 || st.state >= n_states || st.action < 0 || st.action >= n_actions) {
      throw std::invalid_argument("visit_counts: state or action out of range");
    }
    ++c.state[static_cast<std::size_t>(st.state)];
    ++c.pair[static_cast<std::size_t>(st.state)][static_cast<std::size_t>(st.action)];
  }
  return c;
}

double sc_to_regret(double C, double a, double gamma, double horizon) {
  if (!(C > 0.0 && a > 0.0 && horizon > 0.0 && gamma >= 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("sc_to_regret: arguments out of range");
  }
  const double e = 1.0 / (a + 1.0);
  return std::pow(C, e) * std::pow(1.0 - gamma, -e) * std::pow(horizon, a * e);
}

double loglog_slope(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) throw std::invalid_argument("loglog_slope: need at least three points");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (const auto& [t, r] : points) {
    if (!(t > 0.0 && r > 0.0)) throw std::invalid_argument("loglog_slope: values must be positive");
    const double x = std::log(t);
    const double y = std::log(r);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(points.size());
  const double denom = n * sxx - sx * sx;
  if (denom <= 0.0) throw std::invalid_argument("loglog_slope: horizons must differ");
  return (n * sxy - sx * sy) / denom;
}

double default_lower_bound_constant() { return 4.0 * std::sqrt(std::log(2.0)); }

double regret_lower_bound(double gamma, int d, double horizon, double c) {
  const double g = 1.0 - gamma;
  return gamma * d * std::sqrt(horizon) / (1600.0 * c * std::pow(g, 1.5)) - gamma / (g * g);
}

bool epoch_covers(const EpochRecord& epoch, const Vec& theta_star, double tol) {
  const Vec diff = theta_star - epoch.theta_hat;
  const double m = std::sqrt(std::max(0.0, diff.dot(epoch.shape * diff)));
  return m <= epoch.beta + tol * std::max(1.0, epoch.beta);
}

bool epoch_optimistic(const EpochRecord& epoch, const Mat& q_star, double tol) {
  return (epoch.q - q_star).minCoeff() >= -tol;
}

}  // namespace lkmdp
