#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace survbal {

using Rng = std::mt19937_64;

/// Independent deterministic stream for (seed, tag...) keys.
inline Rng make_rng(std::initializer_list<std::uint64_t> key) {
  std::vector<std::uint32_t> words;
  for (auto k : key) {
    words.push_back(static_cast<std::uint32_t>(k & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(k >> 32));
  }
  std::seed_seq s(words.begin(), words.end());
  return Rng(s);
}

}  // namespace survbal
