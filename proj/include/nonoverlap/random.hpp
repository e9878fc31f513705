#pragma once

// Seed derivation for reproducible parallel streams. A stream is identified
// by the master seed plus a path of integer coordinates (replicate index,
// bootstrap draw, ...), so results never depend on execution order.

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace nonoverlap {

using Engine = std::mt19937_64;

inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * path.size());
  auto push = [&](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(master);
  for (auto p : path) push(p);
  std::seed_seq seq(words.begin(), words.end());
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

inline Engine make_engine(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  return Engine(derive_seed(master, path));
}

}  // namespace nonoverlap
