#pragma once

#include <cstdint>
#include <random>

namespace zedbs {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Independent stream seed from (master, purpose tag, index). Same inputs,
/// same seed, on every run and every thread.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag,
                                 std::uint64_t index = 0) noexcept {
  return splitmix64(splitmix64(master ^ splitmix64(tag)) + index);
}

namespace seed_tag {
inline constexpr std::uint64_t channel = 0x43484e4c;  // "CHNL"
inline constexpr std::uint64_t noise = 0x4e4f4953;    // "NOIS"
inline constexpr std::uint64_t phase = 0x50485345;    // "PHSE"
inline constexpr std::uint64_t trial = 0x5452494c;    // "TRIL"
inline constexpr std::uint64_t mask = 0x4d41534b;     // "MASK"
}  // namespace seed_tag

}  // namespace zedbs
