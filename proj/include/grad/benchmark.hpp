#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "grad/errors.hpp"

namespace grad {

struct BenchmarkQuestion {
  std::string prompt;  // "q <key>"
  std::string gold;    // single value token
};

// Planted-fact QA set. Each fact is one record "q <key> <value>". The
// corrupted corpus replaces the value of floor(p * num_facts) facts with a
// distractor, so a model fit on it answers those facts wrongly.
struct SyntheticBenchmark {
  std::vector<std::string> truthful_corpus;
  std::vector<std::string> corrupted_corpus;
  std::vector<BenchmarkQuestion> questions;
  std::vector<bool> corrupted;  // per fact
  std::uint64_t seed = 0;
  double p = 0.0;
};

// Keys are unique per fact. Values and distractors come from two disjoint
// pools of ceil(num_facts / 4) tokens each, so answers repeat across facts.
inline SyntheticBenchmark generate_benchmark(std::size_t num_facts, double p, std::uint64_t seed) {
  if (num_facts < 1) throw ParameterError("num_facts must be >= 1");
  if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("corruption fraction p must lie in [0, 1]");

  // Raw engine output only: std:: distributions are not portable across
  // standard libraries and reports must reproduce bit-for-bit.
  std::mt19937_64 rng(seed);
  const std::size_t pool = (num_facts + 3) / 4;
  std::vector<std::size_t> value(num_facts), distractor(num_facts);
  for (std::size_t i = 0; i < num_facts; ++i) {
    value[i] = rng() % pool;
    distractor[i] = rng() % pool;
  }
  std::vector<std::size_t> order(num_facts);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = num_facts - 1; i > 0; --i) std::swap(order[i], order[rng() % (i + 1)]);

  SyntheticBenchmark bench;
  bench.seed = seed;
  bench.p = p;
  bench.corrupted.assign(num_facts, false);
  const auto flips = static_cast<std::size_t>(std::floor(p * static_cast<double>(num_facts)));
  for (std::size_t i = 0; i < flips; ++i) bench.corrupted[order[i]] = true;

  for (std::size_t i = 0; i < num_facts; ++i) {
    std::string key = "key" + std::to_string(i);
    std::string gold = "val" + std::to_string(value[i]);
    std::string wrong = "alt" + std::to_string(distractor[i]);
    bench.truthful_corpus.push_back("q " + key + " " + gold);
    bench.corrupted_corpus.push_back("q " + key + " " + (bench.corrupted[i] ? wrong : gold));
    bench.questions.push_back({"q " + key, gold});
  }
  return bench;
}

}  // namespace grad
