#pragma once

#include <cstdint>
#include <limits>

namespace lkmdp {

// Independent random streams derived from a single run seed.
enum class Stream : std::uint64_t {
  kEnv = 1,       // transition sampling
  kMcint = 2,     // Monte-Carlo integration lattices
  kPolicy = 3,    // randomized baselines
  kInstance = 4,  // random instance generation in tools and tests
};

/// Counter-based 64-bit generator ("SplitMix64 in counter mode").
///
/// Draw i of a stream with key k is mix64(k + (i + 1) * 0x9E3779B97F4A7C15),
/// where mix64 is the SplitMix64 finalizer. The state is just (key, counter),
/// so any draw can be recomputed from its index, and streams are split by
/// hashing (seed, stream id, sub id) into a fresh key.
///
/// Satisfies UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key = 0, std::uint64_t counter = 0)
      : key_(key), counter_(counter) {}

  static CounterRng from_seed(std::uint64_t seed, Stream stream, std::uint64_t sub = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next_u64(); }
  std::uint64_t next_u64();

  // Uniform double in [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, n); unbiased (rejection on the low word).
  std::uint64_t uniform_index(std::uint64_t n);

  // Child stream keyed on this stream's key and `id`; does not advance this stream.
  CounterRng split(std::uint64_t id) const;

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  static std::uint64_t mix64(std::uint64_t z);

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace lkmdp
