#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace csilab {

using Engine = std::mt19937_64;

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Seed of a named substream. Every random draw in the library goes through one of these so
/// that evaluation order (and parallelism) never changes results.
constexpr std::uint64_t substream(std::uint64_t seed, std::string_view tag) noexcept {
  return detail::splitmix64(seed ^ detail::splitmix64(detail::fnv1a(tag)));
}

constexpr std::uint64_t substream(std::uint64_t seed, std::string_view tag, std::uint64_t index) noexcept {
  return detail::splitmix64(substream(seed, tag) + detail::splitmix64(index + 1));
}

constexpr std::uint64_t substream(std::uint64_t seed, std::string_view tag, std::uint64_t i, std::uint64_t j) noexcept {
  return substream(substream(seed, tag, i), "", j);
}

inline Engine make_engine(std::uint64_t stream_seed) { return Engine{stream_seed}; }

}  // namespace csilab
