// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <boost/math/distributions/chi_squared.hpp>
#include <chrono>
#include <cstdio>
#include <random>
#include <set>
#include <sstream>

#include "support.hpp"

using namespace sawde;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& title, const std::string& detail) {
  std::printf("[%s] %2d %s: %s\n", ok ? "PASS" : "FAIL", id, title.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int decimals = 4) { return format_fixed(v, decimals); }

// Every trace seen by the suite is checked for monotone best accuracy and for
// injections that never lower the population minimum.
struct MonotonicityLedger {
  std::size_t runs = 0, violations = 0;
  void add(const RunResult& r) {
    ++runs;
    for (std::size_t g = 1; g < r.trace.size(); ++g)
      if (r.trace[g].best_accuracy < r.trace[g - 1].best_accuracy) ++violations;
    for (const auto& inj : r.injections)
      if (inj.min_after < inj.min_before) ++violations;
  }
} monotone;

std::shared_ptr<const Dataset> load(const std::string& file) {
  return std::make_shared<const Dataset>(load_dataset(std::string(SAWDE_DATA_DIR) + "/" + file));
}

BinaryMask random_mask(std::mt19937& gen, std::size_t d) {
  BinaryMask m(d);
  while (m.empty())
    for (std::size_t j = 0; j < d; ++j) m.set(j, gen() % 2 == 1);
  return m;
}

void oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937 gen(2024);
  std::size_t checks = 0, mismatches = 0;
  for (int ds_i = 0; ds_i < 20; ++ds_i) {
    const std::size_t n = 30 + gen() % 31, d = 2 + gen() % 9;
    const int classes = 2 + static_cast<int>(gen() % 2);
    auto pts = oracle::random_points(gen, n, d, classes);
    auto ds = support::dataset_from(pts, classes);
    const auto view = assign_folds(full_view(ds), 3, static_cast<std::uint64_t>(ds_i));
    FitnessEvaluator fast(view, {3, false, 1, false}), direct(view, {3, false, 1, true});
    DatasetView train{ds, {}, {}, 0}, test{ds, {}, {}, 0};
    std::vector<oracle::Point> pool;
    for (std::size_t i = 0; i < n; ++i) {
      (i % 4 == 0 ? test : train).rows.push_back(i);
      if (i % 4 != 0) pool.push_back(pts[i]);
    }
    for (int m = 0; m < 10; ++m) {
      const auto mask = random_mask(gen, d);
      const auto bits = support::to_ints(mask);
      const double want = oracle::cv(pts, view.folds, 3, bits, 3);
      mismatches += fast.cv_accuracy(mask) != want;
      mismatches += direct.cv_accuracy(mask) != want;
      int correct = 0;
      for (auto r : test.rows) correct += oracle::knn(pool, pts[r].x, bits, 3) == pts[r].label;
      mismatches += test_accuracy(train, test, mask, 3) != static_cast<double>(correct) / static_cast<double>(test.size());
      checks += 3;
    }
  }
  const double secs = seconds_since(t0);
  report(1, mismatches == 0 && secs < 10.0, "classifier oracle equivalence",
         std::to_string(checks) + " comparisons, " + std::to_string(mismatches) + " mismatches, " + fmt(secs, 2) + " s");
}

void operator_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937 gen(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  std::size_t fixtures = 0;
  for (int id = 1; id <= 8; ++id)
    for (int f = 0; f < 100; ++f, ++fixtures) {
      // Operands come from a real population so the draw path is exercised.
      const std::size_t d = 1 + gen() % 20;
      Rng rng(gen());
      auto pop = init_population(10, d, rng);
      std::vector<std::size_t> subpop(10);
      std::iota(subpop.begin(), subpop.end(), 0);
      const std::size_t target = gen() % 10, best = gen() % 10;
      const double F = u(gen) * 1.2;
      const auto draw = draw_mutation(cms_from_int(id), subpop, target, rng);
      DonorOperands op;
      op.current = pop[target].position;
      op.best = pop[best].position;
      std::vector<std::vector<double>> r(7, std::vector<double>(d, 0.0));
      for (std::size_t i = 0; i < draw.count; ++i) {
        op.random[i] = pop[draw.random[i]].position;
        r[i] = pop[draw.random[i]].position;
      }
      for (std::size_t i = draw.count; i < 7; ++i) op.random[i] = r[i];
      op.rand_scalar = draw.rand_scalar;
      const auto got = donor_formula(cms_from_int(id), op, F);
      const auto want = oracle::donor(id, pop[target].position, pop[best].position, r, F, draw.rand_scalar);
      for (std::size_t j = 0; j < d; ++j) worst = std::max(worst, std::fabs(got[j] - want[j]));
    }
  const double secs = seconds_since(t0);
  std::ostringstream s;
  s << fixtures << " fixtures, max |delta| = " << worst << ", " << fmt(secs, 2) << " s";
  report(2, worst < 1e-12 && secs < 5.0, "mutation operator correctness", s.str());
}

void pool_property() {
  const auto pool = build_strategy_pool(kDefaultBase);
  const std::vector<std::vector<int>> want{{1, 2, 4}, {1, 2, 5}, {1, 2, 6}, {1, 4, 5}, {1, 4, 6},
                                          {1, 5, 6}, {2, 4, 5}, {2, 4, 6}, {2, 5, 6}, {4, 5, 6}};
  bool ok = pool.size() == want.size();
  std::string got;
  for (std::size_t i = 0; ok && i < pool.size(); ++i) {
    std::vector<int> ids;
    for (auto c : pool[i].members) ids.push_back(to_int(c));
    ok = ok && ids == want[i] && pool[i].id == static_cast<int>(i) + 1;
    got += "{";
    for (std::size_t k = 0; k < ids.size(); ++k) got += (k ? "," : "") + std::to_string(ids[k]);
    got += "}";
  }
  report(3, ok, "strategy pool", got);
}

void selector_behavior() {
  StrategyStats stats(10);
  Rng rng(99);
  std::array<double, 10> counts{};
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) ++counts[static_cast<std::size_t>(select_ens(stats, 0, 1000, rng) - 1)];
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - draws / 10.0) * (c - draws / 10.0) / (draws / 10.0);
  const double p = boost::math::cdf(boost::math::complement(boost::math::chi_squared(9), chi2));

  std::mt19937 gen(5);
  int outside = 0;
  for (int i = 0; i < 10000; ++i) {
    StrategyStats s(10);
    for (std::size_t k = 0; k < 10; ++k) {
      s.selections[k] = gen() % 30;
      s.rewards[k] = s.selections[k] ? gen() % (s.selections[k] + 1) : 0;
    }
    const int id = select_ens(s, 501, 1000, rng);
    const double sr = s.success_ratio(static_cast<std::size_t>(id - 1));
    int ahead = 0;
    for (std::size_t k = 0; k < 10; ++k) {
      const double o = s.success_ratio(k);
      ahead += o > sr || (o == sr && static_cast<int>(k) + 1 < id);
    }
    outside += ahead >= 5;
  }
  report(4, p > 0.01 && outside == 0, "selector behavior",
         "uniform phase chi2=" + fmt(chi2, 2) + " p=" + fmt(p) + "; top-5 phase " + std::to_string(outside) +
             " of 10000 draws outside the top-5");
}

void cms_ranking() {
  const auto r = rank_cms_from_counts({3, 1, 8, 3, 5, 3, 5, 6});
  std::vector<int> got;
  for (auto c : r.selected) got.push_back(to_int(c));
  std::string s;
  for (auto g : got) s += (s.empty() ? "" : ",") + std::to_string(g);
  report(5, got == std::vector<int>{1, 2, 4, 5, 6}, "scenario ranking from worst-counts", "selected {" + s + "}");
}

void budget_accounting() {
  auto ds = load("ConnectionistBench.csv");
  const auto data = prepare_split(ds, 0.7, 1);
  EngineConfig cfg;
  cfg.population = 20;
  cfg.sub_populations = 2;
  cfg.early_stop = false;
  const std::size_t d = ds->cols;
  cfg.max_fes = cfg.population + 100 * 3 * cfg.population + 5 * d;  // exactly 100 generations
  const auto r = run(cfg, data.train, data.test);
  monotone.add(r);
  std::size_t bad_generations = 0;
  std::uint64_t prev = cfg.population;
  for (const auto& row : r.trace) {
    const std::uint64_t want = 3 * cfg.population + (row.generation % 20 == 0 ? d : 0);
    bad_generations += row.fes - prev != want;
    prev = row.fes;
  }

  std::mt19937 gen(3);
  std::size_t bound_violations = 0, configs = 0;
  for (int i = 0; i < 12; ++i, ++configs) {
    EngineConfig c;
    c.sub_populations = 1 + gen() % 4;
    c.population = c.sub_populations * (6 + gen() % 10);
    c.max_fes = 1 + gen() % 4000;
    c.seed = gen();
    c.early_stop = gen() % 2;
    const auto res = run(c, data.train, data.test);
    monotone.add(res);
    bound_violations += res.fes_used > c.max_fes + 3 * c.population + d;
  }
  report(6, r.generations == 100 && bad_generations == 0 && bound_violations == 0, "budget accounting",
         std::to_string(r.generations) + " generations, " + std::to_string(bad_generations) +
             " with an unexpected evaluation count; " + std::to_string(bound_violations) + " of " +
             std::to_string(configs) + " random configs over the bound");
}

std::string logged(const EngineConfig& cfg, const Normalized& data) {
  std::ostringstream out;
  monotone.add(run(cfg, data.train, data.test, RunLog(&out)));
  return out.str();
}

void determinism() {
  auto ds = load("wdbc.csv");
  const auto data = prepare_split(ds, 0.7, 4);
  EngineConfig cfg;
  cfg.max_fes = 6000;
  cfg.seed = 4;
  cfg.workers = 1;
  const auto a = logged(cfg, data);
  const auto b = logged(cfg, data);
  cfg.workers = 4;
  const auto c = logged(cfg, data);
  const auto d = logged(cfg, data);
  const bool ok = !a.empty() && a == b && a == c && a == d;
  report(8, ok, "determinism", std::to_string(a.size()) + "-byte logs; workers 1 vs 1: " + (a == b ? "equal" : "differ") +
                                   ", workers 1 vs 4: " + (a == c ? "equal" : "differ") + ", 4 vs 4: " +
                                   (c == d ? "equal" : "differ"));
}

struct SweepResult {
  double train = 0.0, test = 0.0, reduction = 0.0, seconds = 0.0;
  std::vector<double> train_values;
};

SweepResult sweep(const std::shared_ptr<const Dataset>& ds, const AlgorithmSpec& algo, std::uint64_t max_fes) {
  SweepResult s;
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> test, red;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto data = prepare_split(ds, 0.7, seed);
    EngineConfig cfg = algo.configure(EngineConfig{});
    cfg.max_fes = max_fes;
    cfg.seed = seed;
    const auto r = run(cfg, data.train, data.test);
    monotone.add(r);
    s.train_values.push_back(r.train_accuracy);
    test.push_back(r.test_accuracy);
    red.push_back(r.reduction_rate);
  }
  s.train = mean_of(s.train_values);
  s.test = mean_of(test);
  s.reduction = mean_of(red);
  s.seconds = seconds_since(t0);
  return s;
}

SweepResult sawde_wdbc;

void desk_scale_anchors() {
  const auto wdbc = load("wdbc.csv");
  sawde_wdbc = sweep(wdbc, AlgorithmSpec{}, 50000);
  const auto& w = sawde_wdbc;
  const bool wdbc_ok = w.train >= 0.95 && w.test >= 0.88 && w.reduction >= 0.50 && w.seconds <= 600.0;
  const auto sonar = sweep(load("ConnectionistBench.csv"), AlgorithmSpec{}, 50000);
  const bool sonar_ok = sonar.train >= 0.90 && sonar.reduction >= 0.60;
  report(9, wdbc_ok && sonar_ok, "desk-scale anchors",
         "wdbc train " + fmt(w.train) + " test " + fmt(w.test) + " reduction " + fmt(100 * w.reduction, 1) + "% in " +
             fmt(w.seconds, 1) + " s; ConnectionistBench train " + fmt(sonar.train) + " reduction " +
             fmt(100 * sonar.reduction, 1) + "% in " + fmt(sonar.seconds, 1) + " s");
}

std::shared_ptr<const Dataset> two_informative(unsigned seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<oracle::Point> pts;
  while (pts.size() < 120) {
    std::vector<double> x(20);
    for (auto& v : x) v = u(gen);
    const double s = x[0] + x[1] - 1.0;
    if (std::fabs(s) < 0.2) continue;  // keep a margin around the separating line
    pts.push_back({x, s > 0 ? 1 : 0, pts.size()});
  }
  return support::dataset_from(pts, 2, "two-informative");
}

void early_stop() {
  std::string detail;
  bool ok = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto data = prepare_split(two_informative(static_cast<unsigned>(seed)), 0.7, seed);
    EngineConfig cfg;
    cfg.seed = seed;
    cfg.max_fes = 1'000'000;
    const auto r = run(cfg, data.train, data.test);
    monotone.add(r);
    const bool pass = r.early_stopped && r.fes_used < 10000 && r.train_accuracy == 1.0 && r.subset_size < 10;
    ok = ok && pass;
    detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + ": " +
              std::to_string(r.fes_used) + " FES, acc " + fmt(r.train_accuracy) + ", " +
              std::to_string(r.subset_size) + " features";
  }
  report(10, ok, "early stop on separable data", detail);
}

void baseline_comparison() {
  const auto wdbc = load("wdbc.csv");
  double best = 0.0;
  int best_id = 0;
  std::vector<double> best_values;
  std::string detail;
  for (int id = 1; id <= 8; ++id) {
    const auto s = sweep(wdbc, AlgorithmSpec{cms_from_int(id)}, 50000);
    detail += (detail.empty() ? "" : " ") + std::to_string(id) + ":" + fmt(s.train);
    if (s.train > best) {
      best = s.train;
      best_id = id;
      best_values = s.train_values;
    }
  }
  report(11, sawde_wdbc.train >= best - 0.005, "adaptive ensemble vs single-scenario baselines",
         "SaWDE " + fmt(sawde_wdbc.train) + " vs best baseline CMS" + std::to_string(best_id) + " " + fmt(best) +
             " (all: " + detail + "), Welch p=" + fmt(welch_t_test(sawde_wdbc.train_values, best_values)));
}

}  // namespace

int main() {
  try {
    oracle_equivalence();
    operator_correctness();
    pool_property();
    selector_behavior();
    cms_ranking();
    budget_accounting();
    determinism();
    desk_scale_anchors();
    early_stop();
    baseline_comparison();
    report(7, monotone.violations == 0, "monotonicity",
           std::to_string(monotone.runs) + " runs checked, " + std::to_string(monotone.violations) + " violations");
  } catch (const std::exception& e) {
    std::printf("[FAIL] suite aborted: %s\n", e.what());
    return 1;
  }
  std::printf("%d criteria failed\n", failures);
  return failures;
}
