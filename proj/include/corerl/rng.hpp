#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace corerl {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to decorrelate derived seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// FNV-1a over the label, so child streams depend only on (root, label).
constexpr std::uint64_t label_hash(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Child stream for a fixed label ("env", "noise", "buffer", "init", ...).
inline Rng child_rng(std::uint64_t root_seed, std::string_view label) {
  return Rng(mix64(mix64(root_seed) ^ label_hash(label)));
}

}  // namespace corerl
