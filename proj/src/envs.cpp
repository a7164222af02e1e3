#include "lkmdp/envs.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace lkmdp {

namespace {

constexpr double kStochasticTol = 1e-10;

void check_gamma(double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
}

void check_rewards(const Mat& rewards, int n_states, int n_actions) {
  if (rewards.rows() != n_states || rewards.cols() != n_actions) {
    throw std::invalid_argument("reward table must be |S| x |A|");
  }
  if (!rewards.allFinite() || rewards.minCoeff() < 0.0 || rewards.maxCoeff() > 1.0) {
    throw std::invalid_argument("rewards must lie in [0, 1]");
  }
}

void check_distribution(const Vec& p, const std::string& what) {
  if (!p.allFinite() || p.minCoeff() < -kStochasticTol || std::abs(p.sum() - 1.0) > kStochasticTol) {
    throw std::invalid_argument(what + " is not a probability distribution");
  }
}

void check_kernel_shape(const Kernel& P, int n_states, int n_actions, const std::string& what) {
  if (static_cast<int>(P.size()) != n_states) throw std::invalid_argument(what + ": wrong state count");
  for (int s = 0; s < n_states; ++s) {
    if (static_cast<int>(P[s].size()) != n_actions) throw std::invalid_argument(what + ": wrong action count");
    for (int a = 0; a < n_actions; ++a) {
      if (P[s][a].size() != n_states) throw std::invalid_argument(what + ": wrong successor count");
      check_distribution(P[s][a], what + " row (" + std::to_string(s) + "," + std::to_string(a) + ")");
    }
  }
}

// Every induced transition vector under θ* must be a distribution.
void check_true_kernel(const LinearKernelMdp& env) {
  for (int s = 0; s < env.n_states(); ++s) {
    for (int a = 0; a < env.n_actions(); ++a) {
      check_distribution(env.transition(s, a),
                         "induced transition (" + std::to_string(s) + "," + std::to_string(a) + ")");
    }
  }
}

}  // namespace

std::string to_string(Family f) {
  switch (f) {
    case Family::kTabular: return "tabular";
    case Family::kMixture: return "mixture";
    case Family::kProduct: return "product";
    case Family::kHard: return "hard";
  }
  return "unknown";
}

Family family_from_string(const std::string& name) {
  if (name == "tabular") return Family::kTabular;
  if (name == "mixture") return Family::kMixture;
  if (name == "product") return Family::kProduct;
  if (name == "hard") return Family::kHard;
  throw std::invalid_argument("unknown environment family '" + name + "'");
}

HardMdpParams lower_bound_hard_params(int dim, double gamma, double horizon) {
  HardMdpParams p;
  p.dim = dim;
  p.gamma = gamma;
  p.delta = 1.0 - gamma;
  p.Delta = dim * std::sqrt(1.0 - gamma) / (90.0 * std::sqrt(2.0 * horizon));
  return p;
}

LinearKernelMdp::LinearKernelMdp(EnvParts parts) : parts_(std::move(parts)) {
  const int S = parts_.n_states;
  const int A = parts_.n_actions;
  if (S < 1 || A < 1) throw std::invalid_argument("environment needs at least one state and one action");
  check_gamma(parts_.gamma);
  if (parts_.rewards.rows() != S || parts_.rewards.cols() != A) {
    throw std::invalid_argument("reward table must be |S| x |A|");
  }
  const auto d = parts_.theta_star.size();
  if (d < 1) throw std::invalid_argument("parameter dimension must be positive");
  if (parts_.features.size() != static_cast<std::size_t>(S) * A) {
    throw std::invalid_argument("feature table must have |S|·|A| entries");
  }
  for (const Mat& f : parts_.features) {
    if (f.rows() != d || f.cols() != S) throw std::invalid_argument("feature block must be d x |S|");
  }
  if (!parts_.validity) parts_.validity = std::make_shared<UnconstrainedSet>(static_cast<int>(d));
  if (parts_.validity->dim() != d) throw std::invalid_argument("validity set dimension mismatch");
  transitions_.reserve(parts_.features.size());
  for (const Mat& f : parts_.features) transitions_.push_back(f.transpose() * parts_.theta_star);
}

Vec LinearKernelMdp::phi_v(const Vec& value, StateId s, ActionId a) const {
  return features(s, a) * value;
}

Vec LinearKernelMdp::induced(const Vec& theta, StateId s, ActionId a) const {
  return features(s, a).transpose() * theta;
}

LinearKernelMdp make_tabular_env(const Kernel& P, const Mat& rewards, double gamma) {
  const int S = static_cast<int>(P.size());
  if (S < 1 || P[0].empty()) throw std::invalid_argument("tabular kernel must be non-empty");
  const int A = static_cast<int>(P[0].size());
  check_kernel_shape(P, S, A, "tabular kernel");
  check_rewards(rewards, S, A);
  check_gamma(gamma);

  const int d = S * S * A;
  EnvParts parts;
  parts.family = Family::kTabular;
  parts.n_states = S;
  parts.n_actions = A;
  parts.gamma = gamma;
  parts.rewards = rewards;
  parts.theta_star = Vec::Zero(d);
  std::vector<std::vector<int>> blocks;
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      Mat f = Mat::Zero(d, S);
      std::vector<int> block;
      for (int sn = 0; sn < S; ++sn) {
        const int idx = (s * A + a) * S + sn;
        f(idx, sn) = 1.0;
        parts.theta_star[idx] = P[s][a][sn];
        block.push_back(idx);
      }
      parts.features.push_back(std::move(f));
      blocks.push_back(std::move(block));
    }
  }
  parts.validity = std::make_shared<SimplexBlocksSet>(d, std::move(blocks));
  LinearKernelMdp env(std::move(parts));
  check_true_kernel(env);
  return env;
}

LinearKernelMdp make_mixture_env(const std::vector<Kernel>& base_kernels,
                                 const std::vector<std::vector<Vec>>& psi, const Mat& W,
                                 double gamma, const Mat& rewards) {
  const int m = static_cast<int>(base_kernels.size());
  if (m < 1) throw std::invalid_argument("mixture needs at least one base kernel");
  const int S = static_cast<int>(base_kernels[0].size());
  if (S < 1 || base_kernels[0][0].empty()) throw std::invalid_argument("base kernels must be non-empty");
  const int A = static_cast<int>(base_kernels[0][0].size());
  for (int k = 0; k < m; ++k) check_kernel_shape(base_kernels[k], S, A, "base kernel " + std::to_string(k));
  check_rewards(rewards, S, A);
  check_gamma(gamma);
  if (W.rows() != m || W.cols() < 1) throw std::invalid_argument("W must be m x d'");
  const int dp = static_cast<int>(W.cols());
  if (!W.allFinite() || W.minCoeff() < 0.0 || W.maxCoeff() > 1.0) {
    throw std::invalid_argument("W entries must lie in [0, 1]");
  }
  if (static_cast<int>(psi.size()) != S) throw std::invalid_argument("psi must have one row per state");
  std::vector<bool> used(dp, false);
  for (int s = 0; s < S; ++s) {
    if (static_cast<int>(psi[s].size()) != A) throw std::invalid_argument("psi must have one entry per action");
    for (int a = 0; a < A; ++a) {
      if (psi[s][a].size() != dp) throw std::invalid_argument("psi(s,a) must have d' entries");
      check_distribution(psi[s][a], "psi(" + std::to_string(s) + "," + std::to_string(a) + ")");
      for (int j = 0; j < dp; ++j) used[j] = used[j] || psi[s][a][j] > 0.0;
      check_distribution(W * psi[s][a], "mixture weights W·psi(" + std::to_string(s) + "," + std::to_string(a) + ")");
    }
  }
  std::vector<std::vector<int>> blocks;
  for (int j = 0; j < dp; ++j) {
    if (!used[j]) continue;
    if (std::abs(W.col(j).sum() - 1.0) > kStochasticTol) {
      throw std::invalid_argument("weight column " + std::to_string(j) + " leaves the simplex");
    }
    std::vector<int> block;
    for (int k = 0; k < m; ++k) block.push_back(k + m * j);
    blocks.push_back(std::move(block));
  }

  const int d = m * dp;
  EnvParts parts;
  parts.family = Family::kMixture;
  parts.n_states = S;
  parts.n_actions = A;
  parts.gamma = gamma;
  parts.rewards = rewards;
  parts.theta_star = Eigen::Map<const Vec>(W.data(), d);  // column-major vec(W)
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      Mat f(d, S);
      for (int sn = 0; sn < S; ++sn) {
        for (int j = 0; j < dp; ++j) {
          for (int k = 0; k < m; ++k) f(k + m * j, sn) = base_kernels[k][s][a][sn] * psi[s][a][j];
        }
      }
      parts.features.push_back(std::move(f));
    }
  }
  parts.validity = std::make_shared<SimplexBlocksSet>(d, std::move(blocks));
  LinearKernelMdp env(std::move(parts));
  check_true_kernel(env);
  return env;
}

LinearKernelMdp make_product_env(const Mat& psi, const std::vector<std::vector<Vec>>& mu,
                                 const Vec& theta, double gamma, const Mat& rewards,
                                 std::optional<double> D) {
  const int S = static_cast<int>(psi.rows());
  const int d = static_cast<int>(psi.cols());
  if (S < 1 || d < 1) throw std::invalid_argument("psi must be a non-empty |S| x d matrix");
  if (theta.size() != d) throw std::invalid_argument("theta must have d entries");
  if (!psi.allFinite() || psi.minCoeff() < 0.0) {
    throw std::invalid_argument("psi entries must be nonnegative (signed psi has no sampling density)");
  }
  if (static_cast<int>(mu.size()) != S || mu[0].empty()) throw std::invalid_argument("mu must be indexed [s][a]");
  const int A = static_cast<int>(mu[0].size());
  check_rewards(rewards, S, A);
  check_gamma(gamma);

  ProductData data;
  data.psi = psi;
  data.integrals = psi.colwise().sum().transpose();
  data.mu.resize(static_cast<Eigen::Index>(S) * A, d);
  for (int s = 0; s < S; ++s) {
    if (static_cast<int>(mu[s].size()) != A) throw std::invalid_argument("mu must have one entry per action");
    for (int a = 0; a < A; ++a) {
      if (mu[s][a].size() != d || !mu[s][a].allFinite() || mu[s][a].cwiseAbs().maxCoeff() > 1.0) {
        throw std::invalid_argument("mu(s,a) must be a d-vector with |entries| <= 1");
      }
      data.mu.row(s * A + a) = mu[s][a].transpose();
    }
  }
  if (D && data.integrals.cwiseAbs().maxCoeff() > *D + kStochasticTol) {
    throw std::invalid_argument("integration constants exceed the declared bound D");
  }

  EnvParts parts;
  parts.family = Family::kProduct;
  parts.n_states = S;
  parts.n_actions = A;
  parts.gamma = gamma;
  parts.rewards = rewards;
  parts.theta_star = theta;

  // B = {θ : Σ_j ψ_j(s')μ_j(s,a)θ_j ≥ 0, Σ_j I_j μ_j(s,a)θ_j = 1}; duplicate rows dropped.
  std::map<std::vector<double>, int> seen_ineq;
  std::map<std::vector<double>, int> seen_eq;
  std::vector<Vec> ineq;
  std::vector<Vec> eq;
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const Vec mrow = data.mu.row(s * A + a).transpose();
      Mat f(d, S);
      for (int sn = 0; sn < S; ++sn) {
        f.col(sn) = psi.row(sn).transpose().cwiseProduct(mrow);
        const Vec row = -f.col(sn);
        if (row.squaredNorm() == 0.0) continue;
        std::vector<double> key(row.data(), row.data() + d);
        if (seen_ineq.emplace(key, 0).second) ineq.push_back(row);
      }
      parts.features.push_back(std::move(f));
      const Vec erow = data.integrals.cwiseProduct(mrow);
      std::vector<double> key(erow.data(), erow.data() + d);
      if (seen_eq.emplace(key, 0).second) eq.push_back(erow);
    }
  }
  Mat G(static_cast<Eigen::Index>(ineq.size()), d);
  for (std::size_t i = 0; i < ineq.size(); ++i) G.row(i) = ineq[i].transpose();
  Mat Aeq(static_cast<Eigen::Index>(eq.size()), d);
  for (std::size_t i = 0; i < eq.size(); ++i) Aeq.row(i) = eq[i].transpose();
  parts.validity = std::make_shared<PolyhedralSet>(G, Vec::Zero(G.rows()), Aeq, Vec::Ones(Aeq.rows()));
  parts.product = std::move(data);
  LinearKernelMdp env(std::move(parts));
  check_true_kernel(env);
  return env;
}

std::vector<int> hard_action_signs(int dim, ActionId action) {
  const int k = dim - 1;
  std::vector<int> signs(k);
  for (int i = 0; i < k; ++i) signs[i] = ((action >> (k - 1 - i)) & 1) ? 1 : -1;
  return signs;
}

ActionId hard_action_index(const std::vector<int>& signs) {
  ActionId idx = 0;
  for (int v : signs) idx = (idx << 1) | (v > 0 ? 1 : 0);
  return idx;
}

LinearKernelMdp make_hard_env(const HardMdpParams& params, const std::vector<int>& theta_signs) {
  const int d = params.dim;
  if (d < 2) throw std::invalid_argument("hard MDP needs d >= 2");
  if (d > 24) throw std::invalid_argument("hard MDP action set 2^(d-1) is too large");
  if (!(params.delta > 0.0 && params.delta <= 1.0 / 3.0)) {
    throw std::invalid_argument("hard MDP needs delta in (0, 1/3]");
  }
  if (!(params.Delta >= 0.0)) throw std::invalid_argument("hard MDP needs Delta >= 0");
  if (params.Delta > params.delta) {
    throw std::invalid_argument("hard MDP needs Delta <= delta (kernel would leave the simplex)");
  }
  check_gamma(params.gamma);
  if (static_cast<int>(theta_signs.size()) != d - 1) throw std::invalid_argument("theta_signs must have d-1 entries");
  for (int v : theta_signs) {
    if (v != 1 && v != -1) throw std::invalid_argument("theta_signs entries must be +1 or -1");
  }

  const int A = 1 << (d - 1);
  const double delta = params.delta;
  EnvParts parts;
  parts.family = Family::kHard;
  parts.n_states = 2;
  parts.n_actions = A;
  parts.gamma = params.gamma;
  parts.rewards = Mat::Zero(2, A);
  parts.rewards.row(1).setOnes();
  parts.theta_star = Vec::Ones(d);
  for (int i = 0; i < d - 1; ++i) parts.theta_star[i] = params.Delta / (d - 1) * theta_signs[i];
  parts.features.resize(2 * static_cast<std::size_t>(A));
  for (int a = 0; a < A; ++a) {
    const auto signs = hard_action_signs(d, a);
    Mat from0 = Mat::Zero(d, 2);
    for (int i = 0; i < d - 1; ++i) {
      from0(i, 0) = -signs[i];
      from0(i, 1) = signs[i];
    }
    from0(d - 1, 0) = 1.0 - delta;
    from0(d - 1, 1) = delta;
    Mat from1 = Mat::Zero(d, 2);
    from1(d - 1, 0) = delta;
    from1(d - 1, 1) = 1.0 - delta;
    parts.features[static_cast<std::size_t>(a)] = std::move(from0);
    parts.features[static_cast<std::size_t>(A + a)] = std::move(from1);
  }
  parts.validity = std::make_shared<L1SliceSet>(d, std::min(delta, 1.0 - delta));
  parts.hard = params;
  parts.hard_signs = theta_signs;
  LinearKernelMdp env(std::move(parts));
  check_true_kernel(env);
  return env;
}

StepResult step(const LinearKernelMdp& env, StateId s, ActionId a, CounterRng& rng) {
  const Vec& p = env.transition(s, a);
  const double u = rng.uniform();
  double cum = 0.0;
  StateId last_positive = 0;
  for (StateId sn = 0; sn < p.size(); ++sn) {
    if (p[sn] <= 0.0) continue;
    last_positive = sn;
    cum += p[sn];
    if (u < cum) return {sn, env.reward(s, a)};
  }
  return {last_positive, env.reward(s, a)};
}

Vec phi_v(const LinearKernelMdp& env, const Vec& value, StateId s, ActionId a) {
  if (value.size() != env.n_states()) throw std::invalid_argument("phi_v: value must have |S| entries");
  if (!value.allFinite()) throw std::invalid_argument("phi_v: value must be finite");
  return env.phi_v(value, s, a);
}

bool b_contains(const LinearKernelMdp& env, const Vec& theta) {
  if (theta.size() != env.dim() || !theta.allFinite()) return false;
  for (int s = 0; s < env.n_states(); ++s) {
    for (int a = 0; a < env.n_actions(); ++a) {
      const Vec p = env.induced(theta, s, a);
      if (p.minCoeff() < -1e-10 || std::abs(p.sum() - 1.0) > 1e-8) return false;
    }
  }
  return true;
}

Vec b_project(const LinearKernelMdp& env, const Vec& theta) {
  if (theta.size() != env.dim()) throw std::invalid_argument("b_project: dimension mismatch");
  if (!env.validity()->can_project()) {
    throw UnsupportedOperation("projection onto B is not available for the " + to_string(env.family()) + " family");
  }
  return env.validity()->project(theta);
}

std::variant<bool, Vec> b_oracle(const LinearKernelMdp& env, const Vec& theta, BMode mode) {
  if (mode == BMode::kMembership) return b_contains(env, theta);
  return b_project(env, theta);
}

KernelReport validate_kernel(const LinearKernelMdp& env, std::uint64_t seed, int n_random_values) {
  KernelReport report;
  const Vec& theta = env.theta_star();
  for (int s = 0; s < env.n_states(); ++s) {
    for (int a = 0; a < env.n_actions(); ++a) {
      const Vec p = env.induced(theta, s, a);
      const double violation = std::max(std::max(0.0, -p.minCoeff()), std::abs(p.sum() - 1.0));
      report.max_simplex_violation = std::max(report.max_simplex_violation, violation);
      if (p.minCoeff() < -1e-10 || std::abs(p.sum() - 1.0) > 1e-8) report.flagged.emplace_back(s, a);
      const double r = env.reward(s, a);
      report.max_reward_violation = std::max({report.max_reward_violation, -r, r - 1.0});
    }
  }
  const double sqrt_d = std::sqrt(static_cast<double>(env.dim()));
  report.theta_norm_slack = theta.norm() - sqrt_d;
  CounterRng rng = CounterRng::from_seed(seed, Stream::kInstance);
  report.phi_v_slack = -sqrt_d;
  for (int k = 0; k < n_random_values; ++k) {
    Vec value(env.n_states());
    for (int s = 0; s < env.n_states(); ++s) value[s] = rng.uniform();
    for (int s = 0; s < env.n_states(); ++s) {
      for (int a = 0; a < env.n_actions(); ++a) {
        report.phi_v_slack = std::max(report.phi_v_slack, env.phi_v(value, s, a).norm() - sqrt_d);
      }
    }
  }
  return report;
}

}  // namespace lkmdp
