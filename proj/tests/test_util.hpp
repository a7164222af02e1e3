#pragma once

#include <cmath>
#include <vector>

#include "lkmdp/confset.hpp"
#include "lkmdp/envs.hpp"
#include "lkmdp/rng.hpp"

namespace lkmdp::testing {

inline double gaussian(CounterRng& rng) {
  const double u = rng.uniform() + 1e-300;
  const double v = rng.uniform();
  return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * M_PI * v);
}

inline Vec gaussian_vec(CounterRng& rng, int n) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = gaussian(rng);
  return v;
}

inline Vec random_distribution(CounterRng& rng, int n) {
  Vec p(n);
  for (int i = 0; i < n; ++i) p[i] = -std::log(rng.uniform() + 1e-300);
  return p / p.sum();
}

inline Kernel random_kernel(CounterRng& rng, int n_states, int n_actions) {
  Kernel P(static_cast<std::size_t>(n_states), std::vector<Vec>(static_cast<std::size_t>(n_actions)));
  for (auto& row : P)
    for (auto& p : row) p = random_distribution(rng, n_states);
  return P;
}

inline Mat random_rewards(CounterRng& rng, int n_states, int n_actions) {
  Mat r(n_states, n_actions);
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) r(s, a) = rng.uniform();
  return r;
}

// Random symmetric positive-definite matrix with spread-out eigenvalues.
inline Mat random_spd(CounterRng& rng, int d, double spread = 1.0) {
  Mat M(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) M(r, c) = gaussian(rng);
  Vec scale(d);
  for (int i = 0; i < d; ++i) scale[i] = std::exp(spread * gaussian(rng));
  return M * scale.asDiagonal() * M.transpose() + 0.1 * Mat::Identity(d, d);
}

struct EviInstance {
  LinearKernelMdp env;
  ConfidenceSet cs;
};

// Random (environment, confidence set) pairs whose centers sit near θ*; every
// third one is a hard MDP, the rest are small tabular environments.
inline EviInstance random_evi_instance(CounterRng& rng, int i) {
  const double gamma = 0.3 + 0.6 * rng.uniform();
  if (i % 3 == 2) {
    std::vector<int> signs;
    for (int k = 0; k < 2; ++k) signs.push_back(rng.uniform() < 0.5 ? -1 : 1);
    auto env = make_hard_env({3, 0.2, 0.1 * rng.uniform(), gamma}, signs);
    const Mat shape = random_spd(rng, 3, 1.0);
    ConfidenceSet cs(env.theta_star() + 0.05 * gaussian_vec(rng, 3), 0.1 + rng.uniform(), shape, env.validity());
    return {std::move(env), std::move(cs)};
  }
  const int S = 2 + static_cast<int>(rng.uniform_index(2));
  auto env = make_tabular_env(random_kernel(rng, S, 2), random_rewards(rng, S, 2), gamma);
  const int d = env.dim();
  ConfidenceSet cs(env.theta_star() + 0.05 * gaussian_vec(rng, d), 0.05 + 0.5 * rng.uniform(),
                   random_spd(rng, d, 0.5), env.validity());
  return {std::move(env), std::move(cs)};
}

}  // namespace lkmdp::testing
