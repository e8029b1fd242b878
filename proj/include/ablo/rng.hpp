#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace ablo {

using Rng = std::mt19937_64;

/// Named sub-streams of one run seed. Each consumer owns its own stream so that
/// e.g. the task sequence does not shift when the Bernoulli sequence changes.
enum class Stream : std::uint32_t {
  tasks = 0,
  bernoulli = 1,
  init = 2,
  data = 3,
};

/// Deterministic generator for (seed, path...). Distinct paths give statistically
/// independent streams; equal paths give bit-identical streams.
inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path = {}) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * path.size());
  auto push = [&words](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto p : path) push(p);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

inline Rng make_rng(std::uint64_t seed, Stream stream, std::uint64_t replica = 0) {
  return make_rng(seed, {replica, static_cast<std::uint64_t>(stream)});
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline bool bernoulli(Rng& rng, double q) { return std::bernoulli_distribution(q)(rng); }

}  // namespace ablo
