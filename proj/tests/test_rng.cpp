#include "lkmdp/rng.hpp"

#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

namespace lkmdp {
namespace {

// Reference SplitMix64 sequence for seed 0 (state advanced before mixing).
TEST(CounterRng, MatchesSplitMix64ReferenceSequence) {
  CounterRng rng(0);
  EXPECT_EQ(rng.next_u64(), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(rng.next_u64(), 0x6E789E6AA1B965F4ULL);
  EXPECT_EQ(rng.next_u64(), 0x06C45D188009454FULL);
}

TEST(CounterRng, DrawIsAFunctionOfCounter) {
  CounterRng a = CounterRng::from_seed(42, Stream::kEnv);
  for (int i = 0; i < 10; ++i) a.next_u64();
  CounterRng b(a.key(), 10);
  CounterRng c = a;
  EXPECT_EQ(b.next_u64(), c.next_u64());
}

TEST(CounterRng, StreamsAndSeedsDiffer) {
  std::set<std::uint64_t> firsts;
  for (std::uint64_t seed = 0; seed < 4; ++seed)
    for (Stream s : {Stream::kEnv, Stream::kMcint, Stream::kPolicy, Stream::kInstance})
      for (std::uint64_t sub = 0; sub < 3; ++sub) firsts.insert(CounterRng::from_seed(seed, s, sub).next_u64());
  EXPECT_EQ(firsts.size(), 4u * 4u * 3u);
}

TEST(CounterRng, SplitDoesNotAdvanceParent) {
  CounterRng rng = CounterRng::from_seed(1, Stream::kMcint);
  const auto before = rng.counter();
  CounterRng child = rng.split(3);
  EXPECT_EQ(rng.counter(), before);
  EXPECT_NE(child.key(), rng.key());
  EXPECT_EQ(rng.split(3).next_u64(), child.next_u64());
}

TEST(CounterRng, UniformMomentsAndRange) {
  CounterRng rng = CounterRng::from_seed(7, Stream::kInstance);
  const int n = 200000;
  double sum = 0.0;
  double sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sum2 += u * u;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  EXPECT_NEAR(mean, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
  EXPECT_NEAR(var, 1.0 / 12.0, 2e-3);
}

TEST(CounterRng, UniformIndexIsUnbiased) {
  CounterRng rng = CounterRng::from_seed(9, Stream::kPolicy);
  const int n = 6;
  const int draws = 120000;
  std::vector<int> counts(n, 0);
  for (int i = 0; i < draws; ++i) {
    const auto k = rng.uniform_index(n);
    ASSERT_LT(k, static_cast<std::uint64_t>(n));
    ++counts[k];
  }
  const double p = 1.0 / n;
  const double sd = std::sqrt(draws * p * (1 - p));
  for (int c : counts) EXPECT_NEAR(c, draws * p, 4.0 * sd);
  EXPECT_EQ(rng.uniform_index(1), 0u);
}

}  // namespace
}  // namespace lkmdp
