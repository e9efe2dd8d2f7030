#pragma once

// Real-coded differential evolution over [0,1]^D: initialization, threshold
// binarization, the eight candidate mutation scenarios, binomial crossover
// and accuracy-maximizing selection.

#include <algorithm>
#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sawde/classifier.hpp"
#include "sawde/error.hpp"
#include "sawde/rng.hpp"

namespace sawde {

/// Candidate mutation scenario.
enum class Cms : int {
  current_to_best_1 = 1,
  current_to_rand_1 = 2,
  rand_3 = 3,
  best_1 = 4,
  rand_to_best_1 = 5,
  rand_2 = 6,
  best_2 = 7,
  best_3 = 8,
};

inline constexpr std::array<Cms, 8> kAllCms = {Cms::current_to_best_1, Cms::current_to_rand_1, Cms::rand_3,
                                               Cms::best_1,            Cms::rand_to_best_1,     Cms::rand_2,
                                               Cms::best_2,            Cms::best_3};

constexpr int to_int(Cms c) { return static_cast<int>(c); }

inline Cms cms_from_int(int id) {
  if (id < 1 || id > 8) throw ContractError("CMS id must lie in 1..8, got " + std::to_string(id));
  return static_cast<Cms>(id);
}

constexpr std::string_view cms_name(Cms c) {
  switch (c) {
    case Cms::current_to_best_1: return "DE/current to best/1";
    case Cms::current_to_rand_1: return "DE/current to rand/1";
    case Cms::rand_3: return "DE/rand/3";
    case Cms::best_1: return "DE/best/1";
    case Cms::rand_to_best_1: return "DE/rand to best/1";
    case Cms::rand_2: return "DE/rand/2";
    case Cms::best_2: return "DE/best/2";
    case Cms::best_3: return "DE/best/3";
  }
  return "?";
}

/// Number of distinct random individuals (besides target and best) a scenario
/// draws from the sub-population.
constexpr std::size_t random_index_demand(Cms c) {
  switch (c) {
    case Cms::current_to_best_1: return 2;
    case Cms::current_to_rand_1: return 3;
    case Cms::rand_3: return 7;
    case Cms::best_1: return 2;
    case Cms::rand_to_best_1: return 3;
    case Cms::rand_2: return 5;
    case Cms::best_2: return 4;
    case Cms::best_3: return 6;
  }
  return 7;
}

/// Scale factor and crossover rate per scenario, indexed by CMS id - 1.
struct ControlParams {
  std::array<double, 8> F{0.5, 1.0, 0.6, 0.9, 0.5, 0.9, 0.6, 1.0};
  std::array<double, 8> CR{0.1, 0.2, 0.9, 0.8, 0.9, 0.1, 0.8, 0.2};

  double scale(Cms c) const { return F[static_cast<std::size_t>(to_int(c) - 1)]; }
  double crossover_rate(Cms c) const { return CR[static_cast<std::size_t>(to_int(c) - 1)]; }

  void validate() const {
    for (std::size_t i = 0; i < 8; ++i) {
      if (!(F[i] > 0.0 && F[i] <= 2.0)) throw ContractError("ControlParams: F must lie in (0, 2]");
      if (!(CR[i] >= 0.0 && CR[i] <= 1.0)) throw ContractError("ControlParams: CR must lie in [0, 1]");
    }
  }
};

/// Selected iff the component is at or above the threshold.
inline BinaryMask binarize(std::span<const double> position, double theta) {
  BinaryMask m(position.size());
  for (std::size_t j = 0; j < position.size(); ++j)
    if (position[j] >= theta) m.set(j);
  return m;
}

struct Individual {
  std::vector<double> position;
  std::optional<double> fitness;
  BinaryMask mask;

  double score() const { return fitness.value(); }
};

inline std::vector<Individual> init_population(std::size_t size, std::size_t dimension, Rng& rng) {
  if (size == 0 || dimension == 0) throw ContractError("init_population: N and D must be positive");
  std::vector<Individual> pop(size);
  for (auto& ind : pop) {
    ind.position.resize(dimension);
    for (auto& p : ind.position) p = rng.uniform();
  }
  return pop;
}

/// Clamps every component into [0, 1].
inline void repair(std::span<double> v) {
  for (auto& x : v) x = std::clamp(x, 0.0, 1.0);
}

/// The vectors a scenario reads. `random` holds r1, r2, ... in draw order;
/// DE/best/3 names its six draws r2..r7, so random[0] is its r2.
struct DonorOperands {
  std::span<const double> current;
  std::span<const double> best;
  std::array<std::span<const double>, 7> random{};
  double rand_scalar = 0.0;  // only read by DE/current to rand/1
};

/// Donor vector before bound repair.
inline std::vector<double> donor_formula(Cms cms, const DonorOperands& op, double F) {
  const std::size_t dim = op.current.size();
  const auto& r = op.random;
  std::vector<double> v(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    switch (cms) {
      case Cms::current_to_best_1:
        v[j] = op.current[j] + F * (op.best[j] - op.current[j]) + F * (r[0][j] - r[1][j]);
        break;
      case Cms::current_to_rand_1:
        v[j] = op.current[j] + op.rand_scalar * (r[0][j] - op.current[j]) + F * (r[1][j] - r[2][j]);
        break;
      case Cms::rand_3:
        v[j] = r[0][j] + F * (r[1][j] - r[2][j] + r[3][j] - r[4][j] + r[5][j] - r[6][j]);
        break;
      case Cms::best_1:
        v[j] = op.best[j] + F * (r[0][j] - r[1][j]);
        break;
      case Cms::rand_to_best_1:
        v[j] = r[0][j] + F * (op.best[j] - op.current[j]) + F * (r[1][j] - r[2][j]);
        break;
      case Cms::rand_2:
        v[j] = r[0][j] + F * (r[1][j] - r[2][j]) + F * (r[3][j] - r[4][j]);
        break;
      case Cms::best_2:
        v[j] = op.best[j] + F * (r[0][j] - r[1][j]) + F * (r[2][j] - r[3][j]);
        break;
      case Cms::best_3:
        v[j] = op.best[j] + F * (r[0][j] - r[1][j] + r[2][j] - r[3][j] + r[4][j] - r[5][j]);
        break;
    }
  }
  return v;
}

/// Random draws consumed by one mutation.
struct MutationDraw {
  std::array<std::size_t, 7> random{};  // population indices
  std::size_t count = 0;
  double rand_scalar = 0.0;
};

/// Draws mutually distinct indices from `subpop`, all different from `target`,
/// by partial Fisher-Yates over the candidate list.
inline MutationDraw draw_mutation(Cms cms, std::span<const std::size_t> subpop, std::size_t target, Rng& rng) {
  const std::size_t need = random_index_demand(cms);
  std::vector<std::size_t> candidates;
  candidates.reserve(subpop.size());
  for (auto i : subpop)
    if (i != target) candidates.push_back(i);
  if (candidates.size() < need)
    throw ContractError(std::string(cms_name(cms)) + " needs " + std::to_string(need) +
                        " individuals besides the target; sub-population has " + std::to_string(candidates.size()));
  MutationDraw draw;
  draw.count = need;
  for (std::size_t i = 0; i < need; ++i) {
    const std::size_t j = i + rng.index(candidates.size() - i);
    std::swap(candidates[i], candidates[j]);
    draw.random[i] = candidates[i];
  }
  if (cms == Cms::current_to_rand_1) draw.rand_scalar = rng.uniform();
  return draw;
}

/// Repaired donor for `pop[target]`; random operands come from `subpop`,
/// `best` may be anywhere in the population.
inline std::vector<double> mutate(Cms cms, std::span<const Individual> pop, std::span<const std::size_t> subpop,
                                  std::size_t target, std::size_t best, double F, Rng& rng) {
  const auto draw = draw_mutation(cms, subpop, target, rng);
  DonorOperands op;
  op.current = pop[target].position;
  op.best = pop[best].position;
  for (std::size_t i = 0; i < draw.count; ++i) op.random[i] = pop[draw.random[i]].position;
  op.rand_scalar = draw.rand_scalar;
  auto donor = donor_formula(cms, op, F);
  repair(donor);
  return donor;
}

/// Binomial crossover with one forced donor dimension.
inline std::vector<double> crossover(std::span<const double> target, std::span<const double> donor, double cr,
                                     Rng& rng) {
  if (target.size() != donor.size()) throw ContractError("crossover: target and donor lengths differ");
  if (target.empty()) return {};
  const std::size_t forced = rng.index(target.size());
  std::vector<double> trial(target.size());
  for (std::size_t j = 0; j < target.size(); ++j) {
    const bool take = rng.uniform() <= cr || j == forced;
    trial[j] = take ? donor[j] : target[j];
  }
  return trial;
}

struct SelectionOutcome {
  bool trial_wins = false;
  bool improved = false;
  double gain = 0.0;
};

/// Trial replaces target on higher accuracy, or on equal accuracy with fewer
/// selected features.
inline SelectionOutcome select(const Individual& target, const Individual& trial) {
  if (!target.fitness || !trial.fitness) throw ContractError("select: fitness not set");
  const double t = *target.fitness, u = *trial.fitness;
  SelectionOutcome out;
  out.trial_wins = u > t || (u == t && trial.mask.count() < target.mask.count());
  out.improved = out.trial_wins;
  out.gain = std::max(0.0, u - t);
  return out;
}

/// Population index of the best individual: highest fitness, then fewest
/// features, then lowest index.
inline std::size_t best_index(std::span<const Individual> pop) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < pop.size(); ++i) {
    const auto &a = pop[i], &b = pop[best];
    if (a.score() > b.score() || (a.score() == b.score() && a.mask.count() < b.mask.count())) best = i;
  }
  return best;
}

/// Population index of the worst individual: lowest fitness, then most
/// features, then lowest index.
inline std::size_t worst_index(std::span<const Individual> pop) {
  std::size_t worst = 0;
  for (std::size_t i = 1; i < pop.size(); ++i) {
    const auto &a = pop[i], &b = pop[worst];
    if (a.score() < b.score() || (a.score() == b.score() && a.mask.count() > b.mask.count())) worst = i;
  }
  return worst;
}

}  // namespace sawde
