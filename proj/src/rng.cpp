#include "lkmdp/rng.hpp"

namespace lkmdp {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t CounterRng::mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

CounterRng CounterRng::from_seed(std::uint64_t seed, Stream stream, std::uint64_t sub) {
  std::uint64_t k = mix64(seed + kGolden);
  k = mix64(k ^ mix64(static_cast<std::uint64_t>(stream) * kGolden));
  k = mix64(k ^ mix64((sub + 1) * 0xD1B54A32D192ED03ULL));
  return CounterRng(k, 0);
}

std::uint64_t CounterRng::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double CounterRng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t CounterRng::uniform_index(std::uint64_t n) {
  if (n <= 1) return 0;
  // Lemire's multiply-shift with rejection.
  std::uint64_t x = next_u64();
  __uint128_t m = static_cast<__uint128_t>(x) * n;
  std::uint64_t low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      x = next_u64();
      m = static_cast<__uint128_t>(x) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

CounterRng CounterRng::split(std::uint64_t id) const {
  return CounterRng(mix64(key_ ^ mix64((id + 1) * kGolden + 0x632BE59BD9B4E019ULL)), 0);
}

}  // namespace lkmdp
