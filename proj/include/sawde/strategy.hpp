#pragma once

// Ensemble-strategy pool and the self-adaptive selector.
//
// An ensemble strategy (EnS) is an ordered group of mutation scenarios that a
// sub-population applies in sequence during one generation. The selector
// picks uniformly over the whole pool during the first half of the budget and
// uniformly over the five strategies with the best reward/selection ratio
// afterwards. Every `period` generations the strategy with the best
// gain-per-evaluation is granted a reward and forced onto the sub-population.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sawde/dataset.hpp"
#include "sawde/de_core.hpp"
#include "sawde/error.hpp"
#include "sawde/rng.hpp"

namespace sawde {

struct EnsembleStrategy {
  int id = 0;  // 1-based position in the pool
  std::vector<Cms> members;
};

using StrategyPool = std::vector<EnsembleStrategy>;

/// The five scenarios retained for the default pool.
inline constexpr std::array<Cms, 5> kDefaultBase = {Cms::current_to_best_1, Cms::current_to_rand_1, Cms::best_1,
                                                    Cms::rand_to_best_1, Cms::rand_2};

/// All 3-subsets of a 5-scenario base, in lexicographic order of member ids.
inline StrategyPool build_strategy_pool(std::span<const Cms> base) {
  if (base.size() != 5) throw ContractError("build_strategy_pool: base must contain exactly 5 scenarios");
  std::vector<Cms> sorted(base.begin(), base.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ContractError("build_strategy_pool: base scenarios must be distinct");
  StrategyPool pool;
  for (std::size_t a = 0; a < 5; ++a)
    for (std::size_t b = a + 1; b < 5; ++b)
      for (std::size_t c = b + 1; c < 5; ++c)
        pool.push_back({static_cast<int>(pool.size()) + 1, {sorted[a], sorted[b], sorted[c]}});
  return pool;
}

inline StrategyPool default_strategy_pool() { return build_strategy_pool(kDefaultBase); }

/// Degenerate pool used by plain single-scenario DE baselines.
inline StrategyPool single_cms_pool(Cms cms) { return {{1, {cms}}}; }

/// Per-strategy counters, indexed by EnS id - 1.
struct StrategyStats {
  std::vector<std::uint64_t> selections;  // EnSNum
  std::vector<double> change;             // accumulated accuracy gain
  std::vector<std::uint64_t> consumed;    // cFES
  std::vector<std::uint64_t> rewards;

  explicit StrategyStats(std::size_t pool_size = 0)
      : selections(pool_size, 0), change(pool_size, 0.0), consumed(pool_size, 0), rewards(pool_size, 0) {}

  std::size_t size() const { return selections.size(); }

  /// Reward / selections, 0 for a never-selected strategy.
  double success_ratio(std::size_t i) const {
    return selections[i] == 0 ? 0.0 : static_cast<double>(rewards[i]) / static_cast<double>(selections[i]);
  }

  /// Gain per consumed evaluation, 0 when nothing was consumed.
  double gain_rate(std::size_t i) const {
    return consumed[i] == 0 ? 0.0 : change[i] / static_cast<double>(consumed[i]);
  }
};

/// The up-to-five strategy ids with the highest success ratio; ties go to the
/// lower id.
inline std::vector<int> top_strategies(const StrategyStats& stats, std::size_t keep = 5) {
  std::vector<int> ids(stats.size());
  std::iota(ids.begin(), ids.end(), 1);
  std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
    return stats.success_ratio(static_cast<std::size_t>(a - 1)) > stats.success_ratio(static_cast<std::size_t>(b - 1));
  });
  ids.resize(std::min(keep, ids.size()));
  return ids;
}

/// Chooses the strategy for one sub-population.
inline int select_ens(const StrategyStats& stats, std::uint64_t fes, std::uint64_t max_fes, Rng& rng) {
  if (stats.size() == 0) throw ContractError("select_ens: empty strategy pool");
  if (2 * fes <= max_fes) return static_cast<int>(rng.index(stats.size())) + 1;
  const auto top = top_strategies(stats);
  return top[rng.index(top.size())];
}

inline void check_ens_id(const StrategyStats& stats, int ens_id) {
  if (ens_id < 1 || static_cast<std::size_t>(ens_id) > stats.size())
    throw ContractError("invalid EnS id " + std::to_string(ens_id));
}

/// Books one application of a strategy: one selection, the summed accuracy
/// gain of the individuals it improved and the evaluations it spent.
inline void record_outcome(StrategyStats& stats, int ens_id, double gain, std::uint64_t evals_used) {
  check_ens_id(stats, ens_id);
  if (gain < 0.0) throw ContractError("record_outcome: negative gain");
  const auto i = static_cast<std::size_t>(ens_id - 1);
  ++stats.selections[i];
  stats.change[i] += gain;
  stats.consumed[i] += evals_used;
}

/// At reward generations, grants a reward to the strategy with the highest
/// gain rate (lowest id on ties) and returns it as the forced choice.
inline std::optional<int> apply_reward(StrategyStats& stats, std::uint64_t generation, std::uint64_t period = 20) {
  if (generation == 0) throw ContractError("apply_reward: generation counts from 1");
  if (stats.size() == 0 || generation % period != 0) return std::nullopt;
  std::size_t best = 0;
  for (std::size_t i = 1; i < stats.size(); ++i)
    if (stats.gain_rate(i) > stats.gain_rate(best)) best = i;
  ++stats.rewards[best];
  return static_cast<int>(best) + 1;
}

// ---------------------------------------------------------------------------
// Offline ranking of the eight scenarios from per-dataset accuracies.

/// Mean accuracy of each scenario (columns, CMS1..CMS8) on each dataset.
struct CmsAccuracyTable {
  std::vector<std::string> datasets;
  std::vector<std::array<double, 8>> accuracy;
};

struct CmsRanking {
  std::array<int, 8> worst_counts{};
  std::vector<Cms> order;  // best first
  std::vector<Cms> selected;
};

namespace detail {

inline CmsRanking rank_from_counts(const std::array<int, 8>& counts, const std::array<std::array<int, 8>, 8>* wins,
                                   std::size_t keep) {
  // Within a group of equal counts, order by pairwise wins against the other
  // members of the group, then by id.
  std::array<int, 8> group_score{};
  if (wins)
    for (std::size_t a = 0; a < 8; ++a)
      for (std::size_t b = 0; b < 8; ++b)
        if (a != b && counts[a] == counts[b]) group_score[a] += (*wins)[a][b];

  std::array<std::size_t, 8> idx{};
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (counts[a] != counts[b]) return counts[a] < counts[b];
    return group_score[a] > group_score[b];
  });
  CmsRanking r;
  r.worst_counts = counts;
  for (auto i : idx) r.order.push_back(cms_from_int(static_cast<int>(i) + 1));
  r.selected.assign(r.order.begin(), r.order.begin() + static_cast<std::ptrdiff_t>(keep));
  std::sort(r.selected.begin(), r.selected.end());
  return r;
}

}  // namespace detail

/// Ranks scenarios from bare worst-counts. Equal counts fall back to the lower id.
inline CmsRanking rank_cms_from_counts(const std::array<int, 8>& counts, std::size_t keep = 5) {
  return detail::rank_from_counts(counts, nullptr, keep);
}

/// On each dataset, every scenario whose accuracy is at or below the third
/// lowest value is marked as one of the worst (so a four-way tie at the
/// bottom marks four). Datasets where all scenarios tie are skipped.
/// Scenarios are ranked by ascending mark count; equal counts are ordered by
/// how many datasets each beats the others on.
inline CmsRanking rank_cms(const CmsAccuracyTable& table, std::size_t keep = 5) {
  if (table.accuracy.empty()) throw ContractError("rank_cms: empty accuracy table");
  std::array<int, 8> counts{};
  std::array<std::array<int, 8>, 8> wins{};
  for (const auto& row : table.accuracy) {
    for (std::size_t a = 0; a < 8; ++a)
      for (std::size_t b = 0; b < 8; ++b)
        if (row[a] > row[b]) ++wins[a][b];
    if (std::all_of(row.begin(), row.end(), [&](double v) { return v == row[0]; })) continue;
    auto sorted = row;
    std::sort(sorted.begin(), sorted.end());
    const double cutoff = sorted[2];
    for (std::size_t a = 0; a < 8; ++a)
      if (row[a] <= cutoff) ++counts[a];
  }
  return detail::rank_from_counts(counts, &wins, keep);
}

/// Reads `dataset,cms1,...,cms8` CSV (header row required).
inline CmsAccuracyTable parse_cms_table(std::istream& in, const std::string& origin = "<stream>") {
  CmsAccuracyTable table;
  std::string line;
  std::size_t line_no = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv(line);
    if (cells.size() != 9)
      throw DatasetError(origin + ":" + std::to_string(line_no) + ": expected dataset plus 8 accuracy columns");
    if (header) {
      header = false;
      continue;
    }
    std::array<double, 8> acc{};
    for (std::size_t i = 0; i < 8; ++i)
      if (!detail::parse_real(cells[i + 1], acc[i]))
        throw DatasetError(origin + ":" + std::to_string(line_no) + ": column " + std::to_string(i + 2) +
                           ": non-numeric value '" + std::string(cells[i + 1]) + "'");
    table.datasets.emplace_back(cells[0]);
    table.accuracy.push_back(acc);
  }
  return table;
}

}  // namespace sawde
