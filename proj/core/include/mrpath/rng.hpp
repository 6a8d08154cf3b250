#pragma once

// Deterministic random streams. Every consumer derives its own engine from
// (seed, keys...) so results do not depend on scheduling or thread count.

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace mrpath::rng {

using Engine = std::mt19937_64;

/// splitmix64 finalizer.
std::uint64_t mix(std::uint64_t x) noexcept;

/// FNV-1a over the bytes of a label (used to key streams by snp_id).
std::uint64_t hash_label(std::string_view label) noexcept;

std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) noexcept;

inline Engine make_engine(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  return Engine(derive(seed, keys));
}

// Stream domains, so that e.g. initialization and E-step draws never collide.
enum Domain : std::uint64_t {
  kInit = 0x1111,
  kEStep = 0x2222,
  kFinal = 0x3333,
  kInformation = 0x4444,
  kPosterior = 0x5555,
  kSimulate = 0x6666,
  kStudy = 0x7777,
  kBaseline = 0x8888,
};

}  // namespace mrpath::rng
