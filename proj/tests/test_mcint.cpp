#include "lkmdp/mcint.hpp"

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "lkmdp/eval.hpp"
#include "lkmdp/evi.hpp"
#include "lkmdp/harness.hpp"
#include "test_util.hpp"

namespace lkmdp {
namespace {

using testing::random_distribution;
using testing::random_rewards;

// θ_j = 1/I_j with μ(s,a) on the simplex makes every row stochastic.
LinearKernelMdp random_product_env(CounterRng& rng, int S, int A, int d, double gamma) {
  Mat psi(S, d);
  Vec theta(d);
  for (int j = 0; j < d; ++j) {
    const double scale = 0.5 + rng.uniform();
    psi.col(j) = scale * random_distribution(rng, S);
    theta[j] = 1.0 / psi.col(j).sum();
  }
  std::vector<std::vector<Vec>> mu(static_cast<std::size_t>(S), std::vector<Vec>(static_cast<std::size_t>(A)));
  for (auto& row : mu)
    for (auto& m : row) m = random_distribution(rng, d);
  return make_product_env(psi, mu, theta, gamma, random_rewards(rng, S, A));
}

Vec random_values(CounterRng& rng, int S, double vmax) {
  Vec v(S);
  for (int s = 0; s < S; ++s) v[s] = vmax * rng.uniform();
  return v;
}

ValueFn table(const Vec& v) {
  return [&v](StateId s) { return v[s]; };
}

TEST(McSampler, RejectsOtherFamilies) {
  const auto env = make_preset("tabular-2s", 10);
  EXPECT_THROW(McSampler{env}, UnsupportedOperation);
}

TEST(McSampler, SamplesFollowPsiColumns) {
  CounterRng rng = CounterRng::from_seed(1, Stream::kInstance);
  const auto env = random_product_env(rng, 5, 2, 2, 0.9);
  McSampler sampler(env);
  CounterRng draw = CounterRng::from_seed(2, Stream::kMcint);
  const int n = 100000;
  for (int j = 0; j < 2; ++j) {
    std::vector<int> counts(5, 0);
    for (int i = 0; i < n; ++i) ++counts[sampler.sample(j, draw)];
    const Vec p = env.product()->psi.col(j) / env.product()->integrals[j];
    for (int s = 0; s < 5; ++s) EXPECT_NEAR(counts[s], n * p[s], 3.0 * std::sqrt(n * p[s] * (1 - p[s])));
  }
}

TEST(McPhiV, ConstantValueIsExact) {
  CounterRng rng = CounterRng::from_seed(3, Stream::kInstance);
  const auto env = random_product_env(rng, 20, 2, 3, 0.9);
  McSampler sampler(env);
  const Vec c = Vec::Constant(20, 4.2);
  for (int a = 0; a < 2; ++a) {
    const Vec est = mc_phi_v(sampler, table(c), 3, a, 7, CounterRng::from_seed(0, Stream::kMcint));
    EXPECT_LT((est - phi_v(env, c, 3, a)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(McPhiV, ZeroMuCoordinateIsExactlyZero) {
  Mat psi(3, 2);
  psi << 0.2, 0.5, 0.3, 0.25, 0.5, 0.25;
  std::vector<std::vector<Vec>> mu(3, std::vector<Vec>(1, Eigen::Vector2d(1.0, 0.0)));
  const auto env = make_product_env(psi, mu, Eigen::Vector2d(1.0, 1.0), 0.5, Mat::Zero(3, 1));
  McSampler sampler(env);
  const Eigen::Vector3d V(1.0, 0.3, 1.7);
  const Vec est = mc_phi_v(sampler, table(V), 0, 0, 50, CounterRng::from_seed(1, Stream::kMcint));
  EXPECT_EQ(est[1], 0.0);
}

TEST(McPhiV, ZeroIntegralCoordinateIsSkipped) {
  Mat psi(2, 2);
  psi << 0.5, 0.0, 0.5, 0.0;
  std::vector<std::vector<Vec>> mu(2, std::vector<Vec>(1, Eigen::Vector2d(1.0, 0.3)));
  const auto env = make_product_env(psi, mu, Eigen::Vector2d(1.0, 0.0), 0.5, Mat::Zero(2, 1));
  McSampler sampler(env);
  EXPECT_FALSE(sampler.active(1));
  const Vec est = mc_phi_v(sampler, table(Eigen::Vector2d(1, 2)), 0, 0, 10, CounterRng(1));
  EXPECT_EQ(est[1], 0.0);
}

// RMS error with 100x the samples drops by about 10x.
TEST(McPhiV, RmsErrorRatioBetweenSampleSizes) {
  CounterRng rng = CounterRng::from_seed(4, Stream::kInstance);
  const auto env = random_product_env(rng, 20, 2, 3, 0.9);
  McSampler sampler(env);
  const Vec V = random_values(rng, 20, 10.0);
  const Vec exact = phi_v(env, V, 0, 1);
  double sq_small = 0.0;
  double sq_large = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const CounterRng r = CounterRng::from_seed(rep, Stream::kMcint);
    sq_small += (mc_phi_v(sampler, table(V), 0, 1, 100, r) - exact).squaredNorm();
    sq_large += (mc_phi_v(sampler, table(V), 0, 1, 10000, r.split(99)) - exact).squaredNorm();
  }
  const double ratio = std::sqrt(sq_large / sq_small);
  EXPECT_GT(ratio, 0.05);
  EXPECT_LT(ratio, 0.2);
}

TEST(McPhiV, Unbiased) {
  CounterRng rng = CounterRng::from_seed(5, Stream::kInstance);
  const auto env = random_product_env(rng, 20, 2, 3, 0.9);
  McSampler sampler(env);
  const Vec V = random_values(rng, 20, 10.0);
  const Vec exact = phi_v(env, V, 2, 0);
  const int reps = 10000;
  Vec sum = Vec::Zero(3);
  Vec sum2 = Vec::Zero(3);
  for (int rep = 0; rep < reps; ++rep) {
    const Vec est = mc_phi_v(sampler, table(V), 2, 0, 20, CounterRng::from_seed(rep, Stream::kMcint));
    sum += est;
    sum2 += est.cwiseAbs2();
  }
  const Vec mean = sum / reps;
  for (int j = 0; j < 3; ++j) {
    const double var = sum2[j] / reps - mean[j] * mean[j];
    EXPECT_NEAR(mean[j], exact[j], 4.0 * std::sqrt(var / reps)) << "coordinate " << j;
  }
}

TEST(McPhiV, SupErrorScalesLikeInverseRootR) {
  CounterRng rng = CounterRng::from_seed(6, Stream::kInstance);
  const auto env = random_product_env(rng, 20, 2, 3, 0.9);
  McSampler sampler(env);
  const Vec V = random_values(rng, 20, 10.0);
  const Vec exact = phi_v(env, V, 1, 1);
  std::vector<std::pair<double, double>> points;
  for (int R : {100, 1000, 10000}) {
    double err = 0.0;
    for (int rep = 0; rep < 200; ++rep) {
      const Vec est = mc_phi_v(sampler, table(V), 1, 1, R, CounterRng::from_seed(rep, Stream::kMcint, R));
      err += (est - exact).cwiseAbs().maxCoeff();
    }
    points.emplace_back(R, err / 200);
  }
  const double slope = loglog_slope(points);
  EXPECT_GE(slope, -0.65);
  EXPECT_LE(slope, -0.35);
}

TEST(SampledEvi, SingleRoundIsExact) {
  CounterRng rng = CounterRng::from_seed(7, Stream::kInstance);
  const auto env = random_product_env(rng, 10, 2, 3, 0.8);
  McSampler sampler(env);
  ConfidenceSet cs(env.theta_star(), 0.5, Mat::Identity(3, 3), std::make_shared<UnconstrainedSet>(3));
  const auto sq = sampled_evi(sampler, cs, 1, 5, CounterRng(3));
  const auto exact = evi(cs, 1, env);
  for (int s = 0; s < 10; ++s)
    for (int a = 0; a < 2; ++a) EXPECT_NEAR(sq.q(s, a), exact.q.values(s, a), 1e-10);
}

TEST(SampledEvi, MyopicDiscountGivesRewards) {
  CounterRng rng = CounterRng::from_seed(8, Stream::kInstance);
  const auto env = random_product_env(rng, 10, 2, 3, 0.0);
  McSampler sampler(env);
  ConfidenceSet cs(env.theta_star(), 0.5, Mat::Identity(3, 3), std::make_shared<UnconstrainedSet>(3));
  const auto sq = sampled_evi(sampler, cs, 4, 30, CounterRng(5));
  for (int s = 0; s < 10; ++s)
    for (int a = 0; a < 2; ++a) EXPECT_NEAR(sq.q(s, a), env.reward(s, a), 1e-15);
}

TEST(SampledEvi, MatchesExactEviOnSmallEnv) {
  CounterRng rng = CounterRng::from_seed(9, Stream::kInstance);
  const double gamma = 0.7;
  const auto env = random_product_env(rng, 10, 2, 3, gamma);
  McSampler sampler(env);
  const int U = 8;
  int close = 0;
  const int runs = 10;
  for (int run = 0; run < runs; ++run) {
    ConfidenceSet cs(env.theta_star(), 0.3 + 0.1 * run, testing::random_spd(rng, 3, 0.5),
                     std::make_shared<UnconstrainedSet>(3));
    const auto exact = evi(cs, U, env);
    const auto sq = sampled_evi(sampler, cs, U, 5000, CounterRng::from_seed(run, Stream::kMcint));
    double err = 0.0;
    for (int s = 0; s < 10; ++s)
      for (int a = 0; a < 2; ++a) err = std::max(err, std::abs(sq.q(s, a) - exact.q.values(s, a)));
    close += err <= 0.05 / (1.0 - gamma);
  }
  EXPECT_GE(close, 9);
}

TEST(SampledEvi, MemoryStaysWithinLattice) {
  const auto env = make_preset("product-20", 100);
  McSampler sampler(env);
  ConfidenceSet cs(env.theta_star(), 0.2, Mat::Identity(3, 3), env.validity());
  const int U = 6;
  const int R = 200;
  const auto sq = sampled_evi(sampler, cs, U, R, CounterRng(1));
  EXPECT_TRUE(sq.feasible());
  EXPECT_GT(sq.peak_stored_values, 0u);
  EXPECT_LE(sq.peak_stored_values, static_cast<std::size_t>(U * R * env.dim()) + 64);
  EXPECT_EQ(sq.final_values().size(), static_cast<std::size_t>(R * env.dim()));
}

TEST(SampledEvi, EmptyIntersectionReturnsInitialValue) {
  const auto env = make_preset("product-20", 100);
  McSampler sampler(env);
  ConfidenceSet cs(env.theta_star() + Vec::Constant(3, 0.5), 0.01, Mat::Identity(3, 3), env.validity());
  const auto sq = sampled_evi(sampler, cs, 3, 10, CounterRng(1));
  EXPECT_FALSE(sq.feasible());
  EXPECT_DOUBLE_EQ(sq.q(0, 0), 10.0);
}

}  // namespace
}  // namespace lkmdp
