#include "lkmdp/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace lkmdp {
namespace {

using testing::random_distribution;
using testing::random_kernel;
using testing::random_rewards;

// Successor frequencies of 10^5 draws per (s,a) against the kernel, 3 binomial sd per cell.
void expect_step_frequencies(const LinearKernelMdp& env, std::uint64_t seed) {
  CounterRng rng = CounterRng::from_seed(seed, Stream::kEnv);
  const int draws = 100000;
  for (int s = 0; s < env.n_states(); ++s) {
    for (int a = 0; a < env.n_actions(); ++a) {
      std::vector<int> counts(env.n_states(), 0);
      for (int i = 0; i < draws; ++i) ++counts[step(env, s, a, rng).next];
      for (int sn = 0; sn < env.n_states(); ++sn) {
        const double p = env.transition(s, a)[sn];
        const double sd = std::sqrt(draws * p * (1 - p));
        EXPECT_NEAR(counts[sn], draws * p, 3.0 * sd + 1e-9) << "s=" << s << " a=" << a << " s'=" << sn;
      }
    }
  }
}

LinearKernelMdp identity_chain() {
  Kernel P(2, std::vector<Vec>(1));
  P[0][0] = Eigen::Vector2d(1, 0);
  P[1][0] = Eigen::Vector2d(0, 1);
  Mat r(2, 1);
  r << 0.0, 1.0;
  return make_tabular_env(P, r, 0.9);
}

TEST(TabularEnv, IdentityChain) {
  const auto env = identity_chain();
  EXPECT_EQ(env.dim(), 4);
  for (int i = 0; i < env.dim(); ++i) {
    EXPECT_TRUE(env.theta_star()[i] == 0.0 || env.theta_star()[i] == 1.0);
  }
  const Eigen::Vector2d V(2.5, -1.0);
  for (int s = 0; s < 2; ++s) {
    const Vec phi = phi_v(env, V, s, 0);
    EXPECT_EQ((phi.array() != 0.0).count(), 2);
    EXPECT_DOUBLE_EQ(phi.dot(env.theta_star()), V[s]);
  }
  CounterRng rng(3);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(step(env, 0, 0, rng).next, 0);
    EXPECT_EQ(step(env, 1, 0, rng).next, 1);
  }
}

TEST(TabularEnv, InnerProductsReproduceKernel) {
  CounterRng rng = CounterRng::from_seed(1, Stream::kInstance);
  const Kernel P = random_kernel(rng, 3, 2);
  const auto env = make_tabular_env(P, random_rewards(rng, 3, 2), 0.5);
  EXPECT_EQ(env.dim(), 18);
  for (int s = 0; s < 3; ++s)
    for (int a = 0; a < 2; ++a)
      for (int sn = 0; sn < 3; ++sn) EXPECT_DOUBLE_EQ(env.phi(sn, s, a).dot(env.theta_star()), P[s][a][sn]);
}

TEST(TabularEnv, RandomKernelsValidate) {
  CounterRng rng = CounterRng::from_seed(2, Stream::kInstance);
  for (int i = 0; i < 100; ++i) {
    const int S = 1 + static_cast<int>(rng.uniform_index(4));
    const int A = 1 + static_cast<int>(rng.uniform_index(3));
    const auto env = make_tabular_env(random_kernel(rng, S, A), random_rewards(rng, S, A), 0.7);
    EXPECT_TRUE(validate_kernel(env, i).ok());
  }
}

TEST(TabularEnv, RejectsInvalidInput) {
  Kernel P(1, std::vector<Vec>(1, Vec::Constant(1, 0.9)));
  EXPECT_THROW(make_tabular_env(P, Mat::Zero(1, 1), 0.5), std::invalid_argument);
  P[0][0] = Vec::Ones(1);
  EXPECT_THROW(make_tabular_env(P, Mat::Constant(1, 1, 1.5), 0.5), std::invalid_argument);
  EXPECT_THROW(make_tabular_env(P, Mat::Zero(1, 1), 1.0), std::invalid_argument);
  Kernel neg(1, std::vector<Vec>(1, Eigen::Vector2d(1.5, -0.5)));
  EXPECT_THROW(make_tabular_env(neg, Mat::Zero(1, 1), 0.5), std::invalid_argument);
}

TEST(TabularEnv, PhiVOfConstantOneSumsToOne) {
  CounterRng rng = CounterRng::from_seed(3, Stream::kInstance);
  const auto env = make_tabular_env(random_kernel(rng, 4, 3), random_rewards(rng, 4, 3), 0.5);
  for (int s = 0; s < 4; ++s)
    for (int a = 0; a < 3; ++a) {
      EXPECT_NEAR(phi_v(env, Vec::Ones(4), s, a).dot(env.theta_star()), 1.0, 1e-12);
      EXPECT_EQ(phi_v(env, Vec::Zero(4), s, a).norm(), 0.0);
    }
}

TEST(MixtureEnv, SingleBaseEqualsItsKernel) {
  CounterRng rng = CounterRng::from_seed(4, Stream::kInstance);
  const Kernel P = random_kernel(rng, 3, 2);
  const Mat r = random_rewards(rng, 3, 2);
  const std::vector<std::vector<Vec>> psi(3, std::vector<Vec>(2, Vec::Ones(1)));
  const auto mix = make_mixture_env({P}, psi, Mat::Ones(1, 1), 0.6, r);
  const auto tab = make_tabular_env(P, r, 0.6);
  for (int s = 0; s < 3; ++s)
    for (int a = 0; a < 2; ++a) EXPECT_LT((mix.transition(s, a) - tab.transition(s, a)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MixtureEnv, ConstantPsiMixesWithFirstWeightColumn) {
  CounterRng rng = CounterRng::from_seed(5, Stream::kInstance);
  const Kernel P0 = random_kernel(rng, 3, 2);
  const Kernel P1 = random_kernel(rng, 3, 2);
  Mat W(2, 2);
  W << 0.3, 0.9, 0.7, 0.1;
  const std::vector<std::vector<Vec>> psi(3, std::vector<Vec>(2, Eigen::Vector2d(1, 0)));
  const auto env = make_mixture_env({P0, P1}, psi, W, 0.5, random_rewards(rng, 3, 2));
  for (int s = 0; s < 3; ++s)
    for (int a = 0; a < 2; ++a) {
      const Vec direct = 0.3 * P0[s][a] + 0.7 * P1[s][a];
      EXPECT_LT((env.transition(s, a) - direct).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(MixtureEnv, MatchesDirectMixtureFormula) {
  CounterRng rng = CounterRng::from_seed(6, Stream::kInstance);
  const int m = 3;
  const int dp = 2;
  std::vector<Kernel> bases;
  for (int k = 0; k < m; ++k) bases.push_back(random_kernel(rng, 4, 2));
  Mat W(m, dp);
  for (int j = 0; j < dp; ++j) W.col(j) = random_distribution(rng, m);
  std::vector<std::vector<Vec>> psi(4, std::vector<Vec>(2));
  for (auto& row : psi)
    for (auto& p : row) p = random_distribution(rng, dp);
  const auto env = make_mixture_env(bases, psi, W, 0.5, random_rewards(rng, 4, 2));
  EXPECT_EQ(env.dim(), m * dp);
  for (int s = 0; s < 4; ++s)
    for (int a = 0; a < 2; ++a) {
      const Vec weights = W * psi[s][a];
      for (int sn = 0; sn < 4; ++sn) {
        double direct = 0.0;
        for (int k = 0; k < m; ++k) direct += weights[k] * bases[k][s][a][sn];
        EXPECT_NEAR(env.phi(sn, s, a).dot(env.theta_star()), direct, 1e-12);
      }
    }
  EXPECT_TRUE(validate_kernel(env).ok());
}

TEST(MixtureEnv, RejectsWeightsOffTheSimplex) {
  CounterRng rng = CounterRng::from_seed(7, Stream::kInstance);
  const Kernel P = random_kernel(rng, 2, 1);
  const std::vector<std::vector<Vec>> psi(2, std::vector<Vec>(1, Vec::Ones(1)));
  Mat W(2, 1);
  W << 0.5, 0.6;
  EXPECT_THROW(make_mixture_env({P, P}, psi, W, 0.5, Mat::Zero(2, 1)), std::invalid_argument);
  const std::vector<std::vector<Vec>> bad_psi(2, std::vector<Vec>(1, Vec::Constant(1, 0.5)));
  EXPECT_THROW(make_mixture_env({P}, bad_psi, Mat::Ones(1, 1), 0.5, Mat::Zero(2, 1)), std::invalid_argument);
}

TEST(MixtureEnv, ProjectionOntoWeightSimplex) {
  CounterRng rng = CounterRng::from_seed(8, Stream::kInstance);
  const Kernel P = random_kernel(rng, 2, 1);
  const std::vector<std::vector<Vec>> psi(2, std::vector<Vec>(1, Vec::Ones(1)));
  Mat W(2, 1);
  W << 0.5, 0.5;
  const auto env = make_mixture_env({P, random_kernel(rng, 2, 1)}, psi, W, 0.5, Mat::Zero(2, 1));
  const Vec p = std::get<Vec>(b_oracle(env, Eigen::Vector2d(2, -1), BMode::kProject));
  EXPECT_NEAR(p[0], 1.0, 1e-12);
  EXPECT_NEAR(p[1], 0.0, 1e-12);
}

// ψ(s') rows (.5,0), (0,.5), (.5,.5); θ = (1, 1); μ₀ + μ₁ = 1 keeps every row stochastic.
LinearKernelMdp small_product_env() {
  Mat psi(3, 2);
  psi << 0.5, 0, 0, 0.5, 0.5, 0.5;
  std::vector<std::vector<Vec>> mu(3, std::vector<Vec>(2));
  mu[0][0] = Eigen::Vector2d(0.3, 0.7);
  mu[0][1] = Eigen::Vector2d(1.0, 0.0);
  mu[1][0] = Eigen::Vector2d(0.5, 0.5);
  mu[1][1] = Eigen::Vector2d(0.0, 1.0);
  mu[2][0] = Eigen::Vector2d(0.9, 0.1);
  mu[2][1] = Eigen::Vector2d(0.2, 0.8);
  Mat r(3, 2);
  r << 0, 0.5, 1, 0.2, 0.3, 0.9;
  return make_product_env(psi, mu, Eigen::Vector2d(1, 1), 0.8, r, 1.0);
}

TEST(ProductEnv, SingleStateIntegrals) {
  std::vector<std::vector<Vec>> mu(1, std::vector<Vec>(1, Eigen::Vector3d(1, 0, 0)));
  const auto env = make_product_env(Mat::Ones(1, 3), mu, Eigen::Vector3d(1, 0.2, -0.4), 0.5, Mat::Zero(1, 1));
  EXPECT_TRUE(env.product()->integrals.isApprox(Vec::Ones(3)));
}

TEST(ProductEnv, PhiVMatchesExhaustiveSum) {
  const auto env = small_product_env();
  const Eigen::Vector3d V(0.4, 2.0, -1.0);
  const Mat& psi = env.product()->psi;
  for (int s = 0; s < 3; ++s)
    for (int a = 0; a < 2; ++a) {
      Vec expected = Vec::Zero(2);
      for (int sn = 0; sn < 3; ++sn) expected += V[sn] * psi.row(sn).transpose().cwiseProduct(env.product()->mu.row(s * 2 + a).transpose());
      EXPECT_LT((phi_v(env, V, s, a) - expected).cwiseAbs().maxCoeff(), 1e-14);
    }
  EXPECT_NEAR(env.transition(0, 0)[0], 0.15, 1e-14);
  EXPECT_NEAR(env.transition(0, 0)[1], 0.35, 1e-14);
  EXPECT_NEAR(env.transition(0, 0)[2], 0.5, 1e-14);
}

TEST(ProductEnv, IntegralsAreColumnSums) {
  const auto env = small_product_env();
  const Vec sums = env.product()->psi.colwise().sum().transpose();
  EXPECT_EQ(env.product()->integrals, sums);
}

TEST(ProductEnv, RejectsInvalidInput) {
  Mat psi(2, 1);
  psi << 0.5, 0.5;
  std::vector<std::vector<Vec>> mu(2, std::vector<Vec>(1, Vec::Ones(1)));
  // θ = 2 doubles every probability.
  EXPECT_THROW(make_product_env(psi, mu, Vec::Constant(1, 2.0), 0.5, Mat::Zero(2, 1)), std::invalid_argument);
  EXPECT_NO_THROW(make_product_env(psi, mu, Vec::Ones(1), 0.5, Mat::Zero(2, 1)));
  EXPECT_THROW(make_product_env(-psi, mu, -Vec::Ones(1), 0.5, Mat::Zero(2, 1)), std::invalid_argument);
  EXPECT_THROW(make_product_env(psi, mu, Vec::Ones(1), 0.5, Mat::Zero(2, 1), 0.5), std::invalid_argument);
}

TEST(HardEnv, ActionEncodingIsLexicographic) {
  EXPECT_EQ(hard_action_signs(4, 0), (std::vector<int>{-1, -1, -1}));
  EXPECT_EQ(hard_action_signs(4, 1), (std::vector<int>{-1, -1, 1}));
  EXPECT_EQ(hard_action_signs(4, 4), (std::vector<int>{1, -1, -1}));
  EXPECT_EQ(hard_action_signs(4, 7), (std::vector<int>{1, 1, 1}));
  for (int a = 0; a < 8; ++a) EXPECT_EQ(hard_action_index(hard_action_signs(4, a)), a);
}

TEST(HardEnv, RowsSumToOneAndRewards) {
  const auto env = make_hard_env({4, 0.1, 0.05, 0.9}, {1, -1, 1});
  EXPECT_EQ(env.n_states(), 2);
  EXPECT_EQ(env.n_actions(), 8);
  for (int a = 0; a < 8; ++a) {
    EXPECT_DOUBLE_EQ(env.phi(0, 0, a).dot(env.theta_star()) + env.phi(1, 0, a).dot(env.theta_star()), 1.0);
    EXPECT_EQ(env.reward(0, a), 0.0);
    EXPECT_EQ(env.reward(1, a), 1.0);
  }
  EXPECT_EQ(env.theta_star()[3], 1.0);
}

TEST(HardEnv, SignMatchingActionHasLargestExit) {
  const auto env = make_hard_env({4, 0.1, 0.05, 0.9}, {1, -1, 1});
  const ActionId best = hard_action_index({1, -1, 1});
  EXPECT_EQ(best, 5);
  EXPECT_NEAR(env.transition(0, best)[1], 0.1 + 0.05, 1e-15);
}

TEST(HardEnv, ExitProbabilitiesForAllSignPatterns) {
  const auto env = make_hard_env({3, 0.1, 0.05, 0.9}, {1, -1});
  std::vector<double> seen;
  for (int a = 0; a < 4; ++a) {
    const Vec& p = env.transition(0, a);
    EXPECT_GE(p.minCoeff(), 0.0);
    EXPECT_NEAR(p.sum(), 1.0, 1e-15);
    const double exit = p[1];
    EXPECT_TRUE(std::abs(exit - 0.05) < 1e-12 || std::abs(exit - 0.1) < 1e-12 || std::abs(exit - 0.15) < 1e-12);
    seen.push_back(exit);
  }
  EXPECT_NEAR(*std::max_element(seen.begin(), seen.end()), 0.15, 1e-12);
  EXPECT_NEAR(*std::min_element(seen.begin(), seen.end()), 0.05, 1e-12);
}

TEST(HardEnv, PhiVTwoTermExpansion) {
  CounterRng rng = CounterRng::from_seed(9, Stream::kInstance);
  const double delta = 0.2;
  const auto env = make_hard_env({5, delta, 0.1, 0.9}, {1, 1, -1, 1});
  const Vec theta = env.theta_star().head(4);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::Vector2d V(rng.uniform() * 10, rng.uniform() * 10);
    for (int a = 0; a < env.n_actions(); ++a) {
      const auto signs = hard_action_signs(5, a);
      const double at = Eigen::Map<const Eigen::VectorXi>(signs.data(), 4).cast<double>().dot(theta);
      const double expected = (1 - delta - at) * V[0] + (delta + at) * V[1];
      EXPECT_NEAR(phi_v(env, V, 0, a).dot(env.theta_star()), expected, 1e-12);
    }
  }
}

TEST(HardEnv, BoundaryDeltaEqualsDeltaValidates) {
  const auto env = make_hard_env({4, 0.1, 0.1, 0.9}, {-1, 1, 1});
  EXPECT_TRUE(validate_kernel(env).ok());
  EXPECT_THROW(make_hard_env({4, 0.1, 0.11, 0.9}, {-1, 1, 1}), std::invalid_argument);
  EXPECT_THROW(make_hard_env({4, 0.1, 0.05, 0.9}, {-1, 1}), std::invalid_argument);
  EXPECT_THROW(make_hard_env({4, 0.1, 0.05, 0.9}, {-1, 1, 0}), std::invalid_argument);
}

// Permuting sign coordinates together with the action encoding gives the same kernel.
TEST(HardEnv, PermutationSymmetry) {
  const std::vector<int> signs{1, -1, -1};
  std::vector<int> perm{2, 0, 1};
  const auto env = make_hard_env({4, 0.1, 0.06, 0.9}, signs);
  std::vector<int> permuted(3);
  for (int i = 0; i < 3; ++i) permuted[perm[i]] = signs[i];
  const auto other = make_hard_env({4, 0.1, 0.06, 0.9}, permuted);
  for (int a = 0; a < 8; ++a) {
    const auto s = hard_action_signs(4, a);
    std::vector<int> ps(3);
    for (int i = 0; i < 3; ++i) ps[perm[i]] = s[i];
    const ActionId b = hard_action_index(ps);
    for (int st = 0; st < 2; ++st) EXPECT_LT((env.transition(st, a) - other.transition(st, b)).norm(), 1e-15);
  }
}

TEST(HardEnv, ExitFrequencyFromGoodState) {
  const auto env = make_hard_env({3, 0.1, 0.05, 0.9}, {1, 1});
  CounterRng rng = CounterRng::from_seed(10, Stream::kEnv);
  const int n = 100000;
  int to_x0 = 0;
  for (int i = 0; i < n; ++i) to_x0 += step(env, 1, 2, rng).next == 0;
  EXPECT_NEAR(to_x0, n * 0.1, 3.0 * std::sqrt(n * 0.1 * 0.9));
}

TEST(Step, FrequenciesMatchKernels) {
  CounterRng rng = CounterRng::from_seed(11, Stream::kInstance);
  expect_step_frequencies(make_tabular_env(random_kernel(rng, 3, 2), random_rewards(rng, 3, 2), 0.5), 1);
  expect_step_frequencies(small_product_env(), 2);
  expect_step_frequencies(make_hard_env({3, 0.2, 0.1, 0.9}, {1, -1}), 3);
}

TEST(Step, SameSeedSameTrajectory) {
  CounterRng inst = CounterRng::from_seed(12, Stream::kInstance);
  const auto env = make_tabular_env(random_kernel(inst, 4, 2), random_rewards(inst, 4, 2), 0.5);
  auto roll = [&](std::uint64_t seed) {
    CounterRng rng = CounterRng::from_seed(seed, Stream::kEnv);
    std::vector<int> path;
    int s = 0;
    for (int t = 0; t < 500; ++t) {
      s = step(env, s, t % 2, rng).next;
      path.push_back(s);
    }
    return path;
  };
  EXPECT_EQ(roll(5), roll(5));
  EXPECT_NE(roll(5), roll(6));
}

TEST(BOracle, TrueParameterIsMemberForEveryFamily) {
  CounterRng rng = CounterRng::from_seed(13, Stream::kInstance);
  const std::vector<std::vector<Vec>> psi(3, std::vector<Vec>(2, Vec::Ones(1)));
  const std::vector<LinearKernelMdp> envs{
      make_tabular_env(random_kernel(rng, 3, 2), random_rewards(rng, 3, 2), 0.5),
      make_mixture_env({random_kernel(rng, 3, 2)}, psi, Mat::Ones(1, 1), 0.5, random_rewards(rng, 3, 2)),
      small_product_env(),
      make_hard_env({4, 0.1, 0.05, 0.9}, {1, 1, -1}),
  };
  for (const auto& env : envs) {
    EXPECT_TRUE(std::get<bool>(b_oracle(env, env.theta_star(), BMode::kMembership))) << to_string(env.family());
    EXPECT_TRUE(env.validity()->contains(env.theta_star())) << to_string(env.family());
    EXPECT_TRUE(validate_kernel(env).ok()) << to_string(env.family());
  }
}

TEST(BOracle, NegativeTabularEntryIsRejected) {
  CounterRng rng = CounterRng::from_seed(14, Stream::kInstance);
  const auto env = make_tabular_env(random_kernel(rng, 2, 2), random_rewards(rng, 2, 2), 0.5);
  Vec theta = env.theta_star();
  theta[0] -= 0.5;
  theta[1] += 0.5;
  EXPECT_FALSE(b_contains(env, theta));
  EXPECT_FALSE(env.validity()->contains(theta));
}

TEST(BOracle, ValiditySetsNeverExceedExactB) {
  CounterRng rng = CounterRng::from_seed(15, Stream::kInstance);
  const auto hard = make_hard_env({4, 0.1, 0.05, 0.9}, {1, 1, -1});
  const auto tab = make_tabular_env(random_kernel(rng, 2, 2), random_rewards(rng, 2, 2), 0.5);
  for (const auto* env : {&hard, &tab}) {
    for (int i = 0; i < 500; ++i) {
      const Vec z = env->theta_star() + 0.3 * testing::gaussian_vec(rng, env->dim());
      const Vec p = b_project(*env, z);
      EXPECT_TRUE(env->validity()->contains(p, 1e-9));
      EXPECT_TRUE(b_contains(*env, p));
    }
  }
}

TEST(ValidateKernel, FlagsCorruptedRow) {
  CounterRng rng = CounterRng::from_seed(16, Stream::kInstance);
  const auto env = make_tabular_env(random_kernel(rng, 2, 2), random_rewards(rng, 2, 2), 0.5);
  EnvParts parts = env.parts();
  // Row (1,0) occupies coordinates (1·2 + 0)·2 + {0,1}; add 0.1 to make it sum to 1.1.
  parts.theta_star[4] += 0.1;
  const LinearKernelMdp bad(parts);
  const auto report = validate_kernel(bad);
  EXPECT_FALSE(report.ok());
  ASSERT_EQ(report.flagged.size(), 1u);
  EXPECT_EQ(report.flagged[0], std::make_pair(1, 0));
  EXPECT_NEAR(report.max_simplex_violation, 0.1, 1e-12);
}

TEST(ValidateKernel, NormBoundsHold) {
  const auto env = make_hard_env({6, 0.3, 0.3, 0.5}, {1, 1, -1, -1, 1});
  const auto report = validate_kernel(env, 3, 100);
  EXPECT_LE(report.theta_norm_slack, 0.0);
  EXPECT_LE(report.phi_v_slack, 1e-9);
}

TEST(Family, NamesRoundTrip) {
  for (Family f : {Family::kTabular, Family::kMixture, Family::kProduct, Family::kHard}) {
    EXPECT_EQ(family_from_string(to_string(f)), f);
  }
  EXPECT_THROW(family_from_string("nope"), std::invalid_argument);
}

}  // namespace
}  // namespace lkmdp
