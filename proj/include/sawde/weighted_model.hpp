#pragma once

// Feature-importance tallies and the prefix-subset search built on them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "sawde/classifier.hpp"
#include "sawde/de_core.hpp"
#include "sawde/error.hpp"

namespace sawde {

/// weight1 counts features newly switched on by accepted trials; weight2
/// counts the features of each sub-population's elite individuals.
struct WeightMatrices {
  std::vector<std::uint64_t> weight1;
  std::vector<std::uint64_t> weight2;

  explicit WeightMatrices(std::size_t dimension = 0) : weight1(dimension, 0), weight2(dimension, 0) {}
  std::size_t dimension() const { return weight1.size(); }
};

/// Features selected in `after` but not in `before`.
inline std::vector<std::size_t> new_features(const BinaryMask& before, const BinaryMask& after) {
  if (before.size() != after.size()) throw ContractError("new_features: mask lengths differ");
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < after.size(); ++j)
    if (after.test(j) && !before.test(j)) out.push_back(j);
  return out;
}

inline void record_update(WeightMatrices& w, std::span<const std::size_t> updated_features) {
  for (auto j : updated_features) {
    if (j >= w.dimension()) throw ContractError("record_update: feature index out of range");
    ++w.weight1[j];
  }
}

/// Number of elites counted for a sub-population of `size`.
constexpr std::size_t elite_count(std::size_t size) { return (size + 4) / 5; }

/// Ranks `subpop` (population indices) by fitness descending, fewer features
/// first on ties, and tallies the features of the top fifth (rounded up).
/// Returns the elite indices in rank order.
inline std::vector<std::size_t> record_elite(WeightMatrices& w, std::span<const Individual> pop,
                                             std::span<const std::size_t> subpop) {
  std::vector<std::size_t> ranked(subpop.begin(), subpop.end());
  std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
    if (pop[a].score() != pop[b].score()) return pop[a].score() > pop[b].score();
    return pop[a].mask.count() < pop[b].mask.count();
  });
  ranked.resize(elite_count(ranked.size()));
  for (auto i : ranked)
    for (std::size_t j = 0; j < pop[i].mask.size(); ++j)
      if (pop[i].mask.test(j)) ++w.weight2[j];
  return ranked;
}

/// Feature indices sorted by weight descending, lower index first on ties.
inline std::vector<std::size_t> rank_features(std::span<const std::uint64_t> weights) {
  std::vector<std::size_t> idx(weights.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return weights[a] > weights[b]; });
  return idx;
}

/// The D candidate masks: prefixes 1..floor(D/2) of the weight1 ranking, then
/// prefixes 1..D-floor(D/2) of the weight2 ranking.
inline std::vector<BinaryMask> prefix_candidates(const WeightMatrices& w) {
  const std::size_t d = w.dimension();
  const std::size_t half = d / 2;
  const auto r1 = rank_features(w.weight1);
  const auto r2 = rank_features(w.weight2);
  std::vector<BinaryMask> out;
  out.reserve(d);
  BinaryMask m(d);
  for (std::size_t i = 0; i < half; ++i) {
    m.set(r1[i]);
    out.push_back(m);
  }
  m = BinaryMask(d);
  for (std::size_t i = 0; i < d - half; ++i) {
    m.set(r2[i]);
    out.push_back(m);
  }
  return out;
}

struct SearchResult {
  BinaryMask mask;
  double fitness = 0.0;
  std::size_t evaluations = 0;
  bool truncated = false;  // budget ran out before all candidates were scored
};

/// Scores the prefix candidates (at most `budget` of them) and returns the
/// best: highest accuracy, then fewer features, then earlier candidate.
inline SearchResult search_solutions(const WeightMatrices& w, FitnessEvaluator& eval, std::uint64_t budget) {
  if (w.dimension() != eval.dimension()) throw ContractError("search_solutions: weight length does not match D");
  auto candidates = prefix_candidates(w);
  SearchResult res;
  if (budget < candidates.size()) {
    candidates.resize(static_cast<std::size_t>(budget));
    res.truncated = true;
  }
  const auto scores = eval.evaluate(candidates);
  res.evaluations = candidates.size();
  res.mask = BinaryMask(w.dimension());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const bool better = i == 0 || scores[i] > res.fitness ||
                        (scores[i] == res.fitness && candidates[i].count() < res.mask.count());
    if (better) {
      res.fitness = scores[i];
      res.mask = candidates[i];
    }
  }
  return res;
}

struct Injection {
  std::size_t replaced = 0;
  double previous_fitness = 0.0;
};

/// Position whose binarization at `theta` is exactly `mask`: selected
/// components sit at (1 + theta) / 2, unselected at theta / 2.
inline std::vector<double> encode_mask(const BinaryMask& mask, double theta) {
  std::vector<double> pos(mask.size());
  for (std::size_t j = 0; j < mask.size(); ++j) pos[j] = mask.test(j) ? (1.0 + theta) / 2.0 : theta / 2.0;
  return pos;
}

/// Replaces the worst individual when the candidate is strictly better.
inline std::optional<Injection> inject(std::vector<Individual>& pop, const BinaryMask& mask, double fitness,
                                       double theta) {
  if (pop.empty()) return std::nullopt;
  const auto worst = worst_index(pop);
  if (!(fitness > pop[worst].score())) return std::nullopt;
  Injection ev{worst, pop[worst].score()};
  pop[worst].position = encode_mask(mask, theta);
  pop[worst].mask = mask;
  pop[worst].fitness = fitness;
  return ev;
}

}  // namespace sawde
