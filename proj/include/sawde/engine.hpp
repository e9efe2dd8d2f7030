#pragma once

// The generation loop: multi-population DE driven by the self-adaptive
// strategy selector, with the weighted-model search every `reward_period`
// generations.
//
// A single coordinator owns the population, counters and weights. Fitness
// evaluations inside one scenario pass are independent and may run on several
// worker threads; their outcomes are committed in ascending individual order,
// and every random draw comes from a stream keyed by (seed, generation,
// sub-population, purpose), so results do not depend on the worker count.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sawde/classifier.hpp"
#include "sawde/dataset.hpp"
#include "sawde/de_core.hpp"
#include "sawde/error.hpp"
#include "sawde/rng.hpp"
#include "sawde/run_log.hpp"
#include "sawde/strategy.hpp"
#include "sawde/weighted_model.hpp"

namespace sawde {

struct EngineConfig {
  std::size_t population = 100;
  std::size_t sub_populations = 5;
  std::uint64_t max_fes = 1'000'000;
  double theta = 0.6;
  int k = 3;
  int folds = 3;
  std::uint64_t seed = 1;
  bool early_stop = true;
  std::size_t workers = 1;
  bool cache = true;
  ControlParams params;
  StrategyPool pool = default_strategy_pool();
  /// Self-adaptive selection and rewards; off means uniform selection.
  bool adaptive = true;
  bool weighted_model = true;
  std::uint64_t reward_period = 20;

  void validate() const {
    if (population == 0 || sub_populations == 0) throw ContractError("EngineConfig: N and m must be positive");
    if (population % sub_populations != 0)
      throw ContractError("EngineConfig: population " + std::to_string(population) + " is not divisible by " +
                          std::to_string(sub_populations) + " sub-populations");
    if (max_fes == 0) throw ContractError("EngineConfig: max_fes must be positive");
    if (!(theta > 0.0 && theta < 1.0)) throw ContractError("EngineConfig: theta must lie in (0, 1)");
    if (reward_period == 0) throw ContractError("EngineConfig: reward period must be positive");
    if (pool.empty()) throw ContractError("EngineConfig: empty strategy pool");
    params.validate();
    const std::size_t block = population / sub_populations;
    for (const auto& ens : pool)
      for (auto cms : ens.members)
        if (block < random_index_demand(cms) + 1)
          throw ContractError("EngineConfig: sub-populations of " + std::to_string(block) + " are too small for " +
                              std::string(cms_name(cms)));
  }
};

struct TraceRow {
  std::uint64_t generation = 0;
  std::uint64_t fes = 0;
  double best_accuracy = 0.0;
  std::size_t best_subset = 0;
  double min_fitness = 0.0;
};

struct InjectionRecord {
  std::uint64_t generation = 0;
  double min_before = 0.0;
  double min_after = 0.0;
  bool replaced = false;
};

struct RunResult {
  Individual best;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::size_t subset_size = 0;
  std::size_t dimension = 0;
  double reduction_rate = 0.0;
  std::uint64_t fes_used = 0;
  std::uint64_t generations = 0;
  bool early_stopped = false;
  std::vector<TraceRow> trace;
  std::vector<InjectionRecord> injections;
  StrategyStats stats;
  WeightMatrices weights;
};

/// A fresh random permutation of 0..n-1 cut into m equal blocks; each block
/// is returned in ascending order.
inline std::vector<std::vector<std::size_t>> partition(std::size_t n, std::size_t m, Rng& rng) {
  if (m == 0 || n % m != 0) throw ContractError("partition: population size not divisible by sub-population count");
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  shuffle(perm, rng);
  const std::size_t block = n / m;
  std::vector<std::vector<std::size_t>> out(m);
  for (std::size_t s = 0; s < m; ++s) {
    out[s].assign(perm.begin() + static_cast<std::ptrdiff_t>(s * block),
                  perm.begin() + static_cast<std::ptrdiff_t>((s + 1) * block));
    std::sort(out[s].begin(), out[s].end());
  }
  return out;
}

/// Perfect training accuracy with fewer than half the features selected.
inline bool check_early_stop(const Individual& best, std::size_t dimension) {
  return best.fitness && *best.fitness == 1.0 && 2 * best.mask.count() < dimension;
}

namespace detail {

inline double min_fitness(const std::vector<Individual>& pop) {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& ind : pop) lo = std::min(lo, ind.score());
  return lo;
}

inline Json stats_json(const StrategyStats& s) {
  return Json{{"selections", s.selections}, {"change", s.change}, {"consumed", s.consumed}, {"rewards", s.rewards}};
}

inline Json pool_json(const StrategyPool& pool) {
  Json out = Json::array();
  for (const auto& ens : pool) {
    Json members = Json::array();
    for (auto c : ens.members) members.push_back(to_int(c));
    out.push_back(members);
  }
  return out;
}

}  // namespace detail

/// Runs the optimizer on `train` (folds are assigned from the seed when the
/// view has none) and scores the final best mask on `test`.
inline RunResult run(const EngineConfig& cfg, const DatasetView& train, const DatasetView& test, RunLog log = {}) {
  cfg.validate();
  const DatasetView folded =
      train.has_folds() ? train : assign_folds(train, cfg.folds, derive_seed({cfg.seed, static_cast<std::uint64_t>(Stream::folds)}));
  FitnessEvaluator eval(folded, {cfg.k, cfg.cache, cfg.workers});
  const std::size_t dim = eval.dimension();
  const std::size_t n = cfg.population;
  const std::size_t m = cfg.sub_populations;

  log.emit({{"type", "run_start"},
            {"dataset", train.data().name},
            {"D", dim},
            {"train_rows", folded.size()},
            {"test_rows", test.size()},
            {"N", n},
            {"m", m},
            {"max_fes", cfg.max_fes},
            {"theta", cfg.theta},
            {"k", cfg.k},
            {"folds", folded.fold_count},
            {"seed", cfg.seed},
            {"early_stop", cfg.early_stop},
            {"adaptive", cfg.adaptive},
            {"weighted_model", cfg.weighted_model},
            {"pool", detail::pool_json(cfg.pool)}});

  Rng init_rng = Rng::stream(cfg.seed, 0, 0, Stream::init);
  auto pop = init_population(n, dim, init_rng);
  {
    std::vector<BinaryMask> masks;
    for (auto& ind : pop) {
      ind.mask = binarize(ind.position, cfg.theta);
      masks.push_back(ind.mask);
    }
    const auto scores = eval.evaluate(masks);
    for (std::size_t i = 0; i < n; ++i) pop[i].fitness = scores[i];
  }

  RunResult result;
  result.dimension = dim;
  result.stats = StrategyStats(cfg.pool.size());
  result.weights = WeightMatrices(dim);
  auto& stats = result.stats;
  auto& weights = result.weights;

  {
    const auto& b = pop[best_index(pop)];
    log.emit({{"type", "init"}, {"fes", eval.fes()}, {"best_accuracy", b.score()}, {"best_subset", b.mask.count()},
              {"min_fitness", detail::min_fitness(pop)}});
  }

  bool stop = cfg.early_stop && check_early_stop(pop[best_index(pop)], dim);
  result.early_stopped = stop;
  std::uint64_t gen = 0;
  while (!stop && eval.fes() < cfg.max_fes) {
    ++gen;
    Rng part_rng = Rng::stream(cfg.seed, gen, 0, Stream::partition);
    const auto subs = partition(n, m, part_rng);
    bool exhausted = false;

    for (std::size_t s = 0; s < m && !exhausted; ++s) {
      try {
        std::optional<int> forced;
        if (cfg.adaptive) forced = apply_reward(stats, gen, cfg.reward_period);
        int ens_id;
        if (forced) {
          ens_id = *forced;
          log.emit({{"type", "reward"}, {"generation", gen}, {"subpop", s}, {"ens", ens_id}});
        } else {
          Rng sel_rng = Rng::stream(cfg.seed, gen, s, Stream::select);
          ens_id = cfg.adaptive ? select_ens(stats, eval.fes(), cfg.max_fes, sel_rng)
                                : static_cast<int>(sel_rng.index(cfg.pool.size())) + 1;
        }
        log.emit({{"type", "select"}, {"generation", gen}, {"subpop", s}, {"ens", ens_id}, {"forced", forced.has_value()}});

        const auto& members = cfg.pool[static_cast<std::size_t>(ens_id - 1)].members;
        double ens_gain = 0.0;
        std::uint64_t ens_evals = 0;
        for (std::size_t step = 0; step < members.size(); ++step) {
          const Cms cms = members[step];
          const std::size_t best = best_index(pop);
          Rng pass_rng = Rng::stream(cfg.seed, gen, s, Stream::cms_pass, step);

          std::vector<Individual> trials(subs[s].size());
          std::vector<BinaryMask> masks(subs[s].size());
          for (std::size_t t = 0; t < subs[s].size(); ++t) {
            const std::size_t i = subs[s][t];
            const auto donor = mutate(cms, pop, subs[s], i, best, cfg.params.scale(cms), pass_rng);
            trials[t].position = crossover(pop[i].position, donor, cfg.params.crossover_rate(cms), pass_rng);
            trials[t].mask = binarize(trials[t].position, cfg.theta);
            masks[t] = trials[t].mask;
          }
          const auto scores = eval.evaluate(masks);

          double pass_gain = 0.0;
          std::size_t accepted = 0;
          Json added = Json::array();
          for (std::size_t t = 0; t < subs[s].size(); ++t) {
            const std::size_t i = subs[s][t];
            trials[t].fitness = scores[t];
            const auto outcome = select(pop[i], trials[t]);
            if (!outcome.trial_wins) continue;
            const auto fresh = new_features(pop[i].mask, trials[t].mask);
            if (cfg.weighted_model) record_update(weights, fresh);
            for (auto j : fresh) added.push_back(j);
            pass_gain += outcome.gain;
            ++accepted;
            pop[i] = std::move(trials[t]);
          }
          ens_gain += pass_gain;
          ens_evals += masks.size();
          log.emit({{"type", "pass"}, {"generation", gen}, {"subpop", s}, {"ens", ens_id}, {"cms", to_int(cms)},
                    {"evals", masks.size()}, {"accepted", accepted}, {"gain", pass_gain}, {"new_features", added}});
          if (eval.fes() >= cfg.max_fes) {
            exhausted = true;
            break;
          }
        }
        record_outcome(stats, ens_id, ens_gain, ens_evals);

        if (cfg.weighted_model) {
          const auto elites = record_elite(weights, pop, subs[s]);
          Json feats = Json::array();
          for (auto i : elites)
            for (auto j : pop[i].mask.indices()) feats.push_back(j);
          log.emit({{"type", "elite"}, {"generation", gen}, {"subpop", s}, {"count", elites.size()}, {"features", feats}});
        }
      } catch (const Error& e) {
        throw Error("generation " + std::to_string(gen) + ", sub-population " + std::to_string(s) + ": " + e.what());
      }
    }

    if (cfg.weighted_model && !exhausted && gen % cfg.reward_period == 0 && eval.fes() < cfg.max_fes) {
      const auto found = search_solutions(weights, eval, cfg.max_fes - eval.fes());
      log.emit({{"type", "search"}, {"generation", gen}, {"evals", found.evaluations}, {"truncated", found.truncated},
                {"fitness", found.fitness}, {"mask", found.mask.to_string()}});
      InjectionRecord rec;
      rec.generation = gen;
      rec.min_before = detail::min_fitness(pop);
      if (const auto inj = inject(pop, found.mask, found.fitness, cfg.theta)) {
        rec.replaced = true;
        log.emit({{"type", "inject"}, {"generation", gen}, {"replaced", inj->replaced},
                  {"previous_fitness", inj->previous_fitness}, {"fitness", found.fitness}});
      }
      rec.min_after = detail::min_fitness(pop);
      result.injections.push_back(rec);
    }

    const auto& b = pop[best_index(pop)];
    TraceRow row{gen, eval.fes(), b.score(), b.mask.count(), detail::min_fitness(pop)};
    result.trace.push_back(row);
    log.emit({{"type", "generation"}, {"generation", gen}, {"fes", row.fes}, {"best_accuracy", row.best_accuracy},
              {"best_subset", row.best_subset}, {"min_fitness", row.min_fitness}, {"stats", detail::stats_json(stats)}});

    if (cfg.early_stop && check_early_stop(b, dim)) {
      stop = true;
      result.early_stopped = true;
    }
  }

  result.best = pop[best_index(pop)];
  result.train_accuracy = result.best.score();
  result.test_accuracy = test_accuracy(folded, test, result.best.mask, cfg.k);
  result.subset_size = result.best.mask.count();
  result.reduction_rate = 1.0 - static_cast<double>(result.subset_size) / static_cast<double>(dim);
  result.fes_used = eval.fes();
  result.generations = gen;

  log.emit({{"type", "end"},
            {"fes", result.fes_used},
            {"generations", result.generations},
            {"early_stopped", result.early_stopped},
            {"train_accuracy", result.train_accuracy},
            {"test_accuracy", result.test_accuracy},
            {"subset_size", result.subset_size},
            {"D", dim},
            {"mask", result.best.mask.to_string()},
            {"stats", detail::stats_json(stats)},
            {"weight1", weights.weight1},
            {"weight2", weights.weight2}});
  return result;
}

}  // namespace sawde
