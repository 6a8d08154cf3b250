#include "mrpath/rng.hpp"

namespace mrpath::rng {

std::uint64_t mix(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_label(std::string_view label) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) noexcept {
  // Re-mixing the state before folding in each key keeps the result
  // order-sensitive (seed and keys cannot be swapped).
  std::uint64_t h = mix(seed);
  for (auto k : keys) h = mix(mix(h) ^ k);
  return h;
}

}  // namespace mrpath::rng
