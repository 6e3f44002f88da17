#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace lscm {

using Engine = std::mt19937_64;

/// SplitMix64 finalizer.
[[nodiscard]] constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

[[nodiscard]] constexpr std::uint64_t hash_tag(std::string_view tag) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/**
 * @brief Derive an independent substream seed from a master seed.
 *
 * The result depends only on (master, tag, index), so streams can be
 * created in any order and on any thread.
 */
[[nodiscard]] constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                                                  std::uint64_t index = 0) noexcept {
  return mix64(mix64(master ^ hash_tag(tag)) + mix64(index + 0x632be59bd9b4e019ULL));
}

[[nodiscard]] inline Engine make_engine(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return Engine(seq);
}

/// Uniform integer in [0, bound). Lemire's multiply-shift with rejection.
[[nodiscard]] inline std::uint64_t uniform_below(Engine& eng, std::uint64_t bound) {
  if (bound <= 1) return 0;
  const std::uint64_t threshold = (0 - bound) % bound;
  while (true) {
    const std::uint64_t x = eng();
    const __uint128_t prod = static_cast<__uint128_t>(x) * bound;
    if (static_cast<std::uint64_t>(prod) >= threshold) return static_cast<std::uint64_t>(prod >> 64);
  }
}

/// Fisher-Yates shuffle driven only by uniform_below, so draws do not depend
/// on the standard library's distribution implementations.
template <typename T>
void shuffle_in_place(std::span<T> values, Engine& eng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(eng, i));
    std::swap(values[i - 1], values[j]);
  }
}

[[nodiscard]] std::vector<std::size_t> random_permutation(std::size_t n, Engine& eng);

/// Standard normal draw via the polar Box-Muller method.
class NormalSampler {
 public:
  double operator()(Engine& eng);

 private:
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace lscm
