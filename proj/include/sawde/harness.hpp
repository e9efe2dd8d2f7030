#pragma once

// Experiment protocol: dataset x algorithm x repeat sweeps, per-run logs,
// aggregate reports computed from those logs, convergence tables and the
// Welch t-test used to compare result columns.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "sawde/dataset.hpp"
#include "sawde/engine.hpp"
#include "sawde/error.hpp"
#include "sawde/run_log.hpp"

namespace sawde {

// ---------------------------------------------------------------------------
// Statistics

inline double mean_of(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
inline double stddev_of(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double mu = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

/// Two-sided Welch (unequal variance) t-test p-value. Two constant samples
/// give 1 when their means agree and 0 otherwise.
inline double welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw ContractError("welch_t_test: each sample needs at least 2 values");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double ma = mean_of(a), mb = mean_of(b);
  const double va = std::pow(stddev_of(a), 2) / na;
  const double vb = std::pow(stddev_of(b), 2) / nb;
  const double se2 = va + vb;
  if (se2 == 0.0) return ma == mb ? 1.0 : 0.0;
  const double t = (ma - mb) / std::sqrt(se2);
  const double df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  const boost::math::students_t dist(df);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t))));
}

// ---------------------------------------------------------------------------
// Number formatting

/// Shortest representation that round-trips.
inline std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, decimals);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Algorithms under test

struct AlgorithmSpec {
  std::optional<Cms> single;  // empty for the full self-adaptive optimizer

  /// "sawde" or "single-cms:<1..8>".
  static AlgorithmSpec parse(std::string_view s) {
    if (s == "sawde") return {};
    constexpr std::string_view prefix = "single-cms:";
    if (s.starts_with(prefix)) {
      int id = 0;
      const auto rest = s.substr(prefix.size());
      const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), id);
      if (ec == std::errc() && ptr == rest.data() + rest.size()) return {cms_from_int(id)};
    }
    throw ContractError("unknown algorithm '" + std::string(s) + "' (expected sawde or single-cms:1..8)");
  }

  std::string label() const { return single ? "single-cms:" + std::to_string(to_int(*single)) : "sawde"; }
  std::string file_label() const { return single ? "single-cms-" + std::to_string(to_int(*single)) : "sawde"; }

  /// Single-scenario baselines run plain DE: a one-member pool, no adaptive
  /// selection, no weighted model. The budget is unchanged.
  EngineConfig configure(EngineConfig cfg) const {
    if (single) {
      cfg.pool = single_cms_pool(*single);
      cfg.adaptive = false;
      cfg.weighted_model = false;
    }
    return cfg;
  }
};

// ---------------------------------------------------------------------------
// Run logs -> summaries

struct RunSummary {
  std::string dataset;
  std::string algorithm;
  int repeat = 0;
  std::uint64_t seed = 0;
  std::size_t dimension = 0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::size_t subset_size = 0;
  std::uint64_t fes = 0;
  std::uint64_t generations = 0;
  std::vector<TraceRow> trace;
};

namespace detail {

/// Parses every record; throws naming the last valid record when the log is
/// malformed or lacks its final "end" record.
inline std::vector<Json> read_log(std::istream& in, const std::string& origin) {
  std::vector<Json> records;
  std::string line;
  auto last_valid = [&]() -> std::string {
    if (records.empty()) return "none";
    const auto& r = records.back();
    std::string s = "#" + std::to_string(records.size()) + " (" + r.value("type", std::string("?"));
    if (r.contains("generation")) s += ", generation " + r["generation"].dump();
    return s + ")";
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Json rec = Json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object() || !rec.contains("type"))
      throw Error(origin + ": truncated or corrupt log; last valid record " + last_valid());
    records.push_back(std::move(rec));
  }
  if (records.empty() || records.back()["type"] != "end")
    throw Error(origin + ": truncated log; last valid record " + last_valid());
  return records;
}

}  // namespace detail

/// Summary of one run recomputed from its log alone.
inline RunSummary summarize_log(std::istream& in, const std::string& origin = "<log>") {
  const auto records = detail::read_log(in, origin);
  RunSummary s;
  for (const auto& r : records) {
    const auto& type = r["type"];
    if (type == "cell") {
      s.dataset = r["dataset"].get<std::string>();
      s.algorithm = r["algorithm"].get<std::string>();
      s.repeat = r["repeat"].get<int>();
      s.seed = r["seed"].get<std::uint64_t>();
    } else if (type == "run_start") {
      if (s.dataset.empty()) s.dataset = r["dataset"].get<std::string>();
      if (s.algorithm.empty()) s.algorithm = "sawde";
      s.seed = r["seed"].get<std::uint64_t>();
      s.dimension = r["D"].get<std::size_t>();
    } else if (type == "generation") {
      s.trace.push_back({r["generation"].get<std::uint64_t>(), r["fes"].get<std::uint64_t>(),
                         r["best_accuracy"].get<double>(), r["best_subset"].get<std::size_t>(),
                         r["min_fitness"].get<double>()});
    } else if (type == "end") {
      s.train_accuracy = r["train_accuracy"].get<double>();
      s.test_accuracy = r["test_accuracy"].get<double>();
      s.subset_size = r["subset_size"].get<std::size_t>();
      s.fes = r["fes"].get<std::uint64_t>();
      s.generations = r["generations"].get<std::uint64_t>();
      s.dimension = r["D"].get<std::size_t>();
    }
  }
  return s;
}

inline RunSummary summarize_log_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(path.string() + ": cannot open log");
  return summarize_log(in, path.string());
}

/// Plot-ready convergence CSV: one row per generation.
inline std::string emit_convergence(std::istream& log, const std::string& origin = "<log>") {
  const auto records = detail::read_log(log, origin);
  std::ostringstream out;
  out << "generation,fes,best_train_accuracy,best_subset_size\n";
  for (const auto& r : records) {
    if (r["type"] != "generation") continue;
    out << r["generation"].get<std::uint64_t>() << ',' << r["fes"].get<std::uint64_t>() << ','
        << format_real(r["best_accuracy"].get<double>()) << ',' << r["best_subset"].get<std::size_t>() << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Aggregation

struct ReportRow {
  std::string dataset;
  std::string algorithm;
  std::size_t dimension = 0;
  std::size_t runs = 0;
  double train_mean = 0.0, train_std = 0.0;
  double test_mean = 0.0, test_std = 0.0;
  double subset_mean = 0.0, subset_std = 0.0;
  double reduction_pct = 0.0;
};

struct ConvergencePoint {
  std::string dataset;
  std::string algorithm;
  std::uint64_t generation = 0;
  std::size_t runs = 0;
  double mean_fes = 0.0;
  double mean_best_accuracy = 0.0;
  double mean_best_subset = 0.0;
};

struct CellError {
  std::string dataset;
  std::string algorithm;
  int repeat = -1;
  std::string message;
};

struct Report {
  std::vector<ReportRow> rows;
  std::vector<RunSummary> runs;
  std::vector<ConvergencePoint> convergence;
  std::vector<CellError> errors;
};

/// Groups runs by (dataset, algorithm) in lexicographic order.
inline Report aggregate(std::vector<RunSummary> runs) {
  std::sort(runs.begin(), runs.end(), [](const RunSummary& a, const RunSummary& b) {
    return std::tie(a.dataset, a.algorithm, a.repeat) < std::tie(b.dataset, b.algorithm, b.repeat);
  });
  Report report;
  std::map<std::pair<std::string, std::string>, std::vector<const RunSummary*>> groups;
  for (const auto& r : runs) groups[{r.dataset, r.algorithm}].push_back(&r);
  for (const auto& [key, members] : groups) {
    std::vector<double> train, test, subset;
    for (const auto* r : members) {
      train.push_back(r->train_accuracy);
      test.push_back(r->test_accuracy);
      subset.push_back(static_cast<double>(r->subset_size));
    }
    ReportRow row;
    row.dataset = key.first;
    row.algorithm = key.second;
    row.dimension = members.front()->dimension;
    row.runs = members.size();
    row.train_mean = mean_of(train);
    row.train_std = stddev_of(train);
    row.test_mean = mean_of(test);
    row.test_std = stddev_of(test);
    row.subset_mean = mean_of(subset);
    row.subset_std = stddev_of(subset);
    row.reduction_pct = row.dimension ? 100.0 * (1.0 - row.subset_mean / static_cast<double>(row.dimension)) : 0.0;
    report.rows.push_back(row);

    std::size_t longest = 0;
    for (const auto* r : members) longest = std::max(longest, r->trace.size());
    for (std::size_t g = 0; g < longest; ++g) {
      ConvergencePoint p;
      p.dataset = key.first;
      p.algorithm = key.second;
      p.generation = g + 1;
      for (const auto* r : members) {
        if (g >= r->trace.size()) continue;
        ++p.runs;
        p.mean_fes += static_cast<double>(r->trace[g].fes);
        p.mean_best_accuracy += r->trace[g].best_accuracy;
        p.mean_best_subset += static_cast<double>(r->trace[g].best_subset);
      }
      const auto k = static_cast<double>(p.runs);
      p.mean_fes /= k;
      p.mean_best_accuracy /= k;
      p.mean_best_subset /= k;
      report.convergence.push_back(p);
    }
  }
  report.runs = std::move(runs);
  return report;
}

inline void write_report_csv(const Report& report, std::ostream& out) {
  out << "dataset,algorithm,D,runs,train_mean,train_std,test_mean,test_std,subset_mean,subset_std,reduction_pct\n";
  for (const auto& r : report.rows)
    out << r.dataset << ',' << r.algorithm << ',' << r.dimension << ',' << r.runs << ',' << format_fixed(r.train_mean, 4)
        << ',' << format_fixed(r.train_std, 4) << ',' << format_fixed(r.test_mean, 4) << ','
        << format_fixed(r.test_std, 4) << ',' << format_fixed(r.subset_mean, 4) << ','
        << format_fixed(r.subset_std, 4) << ',' << format_fixed(r.reduction_pct, 4) << '\n';
}

inline void write_runs_csv(const Report& report, std::ostream& out) {
  out << "dataset,algorithm,repeat,seed,D,train_accuracy,test_accuracy,subset_size,fes,generations\n";
  for (const auto& r : report.runs)
    out << r.dataset << ',' << r.algorithm << ',' << r.repeat << ',' << r.seed << ',' << r.dimension << ','
        << format_real(r.train_accuracy) << ',' << format_real(r.test_accuracy) << ',' << r.subset_size << ','
        << r.fes << ',' << r.generations << '\n';
}

inline void write_convergence_csv(const Report& report, std::ostream& out) {
  out << "dataset,algorithm,generation,runs,mean_fes,mean_best_accuracy,mean_best_subset\n";
  for (const auto& p : report.convergence)
    out << p.dataset << ',' << p.algorithm << ',' << p.generation << ',' << p.runs << ','
        << format_fixed(p.mean_fes, 1) << ',' << format_fixed(p.mean_best_accuracy, 6) << ','
        << format_fixed(p.mean_best_subset, 2) << '\n';
}

inline Json errors_json(const std::vector<CellError>& errors) {
  Json cells = Json::array();
  for (const auto& e : errors)
    cells.push_back({{"dataset", e.dataset}, {"algorithm", e.algorithm}, {"repeat", e.repeat}, {"error", e.message}});
  return {{"failed", errors.size()}, {"cells", cells}};
}

/// Reads every *.jsonl log below `dir` (sorted by path) and aggregates them.
/// Unreadable logs are reported as errors.
inline Report report_from_logs(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<RunSummary> runs;
  std::vector<CellError> errors;
  for (const auto& f : files) {
    try {
      runs.push_back(summarize_log_file(f));
    } catch (const std::exception& e) {
      errors.push_back({f.filename().string(), "", -1, e.what()});
    }
  }
  auto report = aggregate(std::move(runs));
  report.errors = std::move(errors);
  return report;
}

/// Writes report.csv, runs.csv and convergence.csv into `dir`, plus
/// errors.json when any cell failed.
inline void write_report_files(const Report& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "report.csv");
    write_report_csv(report, out);
  }
  {
    std::ofstream out(dir / "runs.csv");
    write_runs_csv(report, out);
  }
  {
    std::ofstream out(dir / "convergence.csv");
    write_convergence_csv(report, out);
  }
  if (!report.errors.empty()) {
    std::ofstream out(dir / "errors.json");
    out << errors_json(report.errors).dump(2) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Experiments

struct ExperimentSpec {
  std::vector<ManifestEntry> datasets;
  std::vector<AlgorithmSpec> algorithms{AlgorithmSpec{}};
  int repeats = 5;
  EngineConfig engine;
  std::uint64_t seed_base = 1;
  double train_fraction = 0.7;
  std::filesystem::path output_dir = "results";
  std::size_t jobs = 1;  // concurrent cells

  void validate() const {
    if (repeats < 1) throw ContractError("ExperimentSpec: repeats must be at least 1");
    if (datasets.empty()) throw ContractError("ExperimentSpec: no datasets");
    if (algorithms.empty()) throw ContractError("ExperimentSpec: no algorithms");
  }
};

/// The data side of one cell: a seeded 7:3 style split, scaled on train.
inline Normalized prepare_split(std::shared_ptr<const Dataset> ds, double train_fraction, std::uint64_t seed) {
  auto [train, test] = split_train_test(std::move(ds), train_fraction, seed);
  return normalize(train, test);
}

/// Log path of one cell relative to the output directory.
inline std::filesystem::path cell_log_path(const std::string& dataset, const AlgorithmSpec& algo, int repeat) {
  return std::filesystem::path("logs") / (dataset + "__" + algo.file_label() + "__r" + std::to_string(repeat) + ".jsonl");
}

/// Runs every (dataset, algorithm, repeat) cell with seed = seed_base + repeat,
/// writes one log per cell and builds the report from those logs. Failing
/// cells are collected in Report::errors without stopping the sweep.
inline Report run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  namespace fs = std::filesystem;
  fs::create_directories(spec.output_dir / "logs");

  std::vector<std::shared_ptr<const Dataset>> loaded(spec.datasets.size());
  std::vector<CellError> errors;
  for (std::size_t d = 0; d < spec.datasets.size(); ++d) {
    const auto& entry = spec.datasets[d];
    try {
      loaded[d] = std::make_shared<const Dataset>(load_dataset(entry.path, entry.label, entry.name));
    } catch (const std::exception& e) {
      errors.push_back({entry.name, "", -1, e.what()});
    }
  }

  struct Cell {
    std::size_t dataset;
    std::size_t algorithm;
    int repeat;
  };
  std::vector<Cell> cells;
  for (std::size_t d = 0; d < spec.datasets.size(); ++d)
    if (loaded[d])
      for (std::size_t a = 0; a < spec.algorithms.size(); ++a)
        for (int r = 0; r < spec.repeats; ++r) cells.push_back({d, a, r});

  std::vector<std::optional<CellError>> cell_errors(cells.size());
  std::vector<double> seconds(cells.size(), 0.0);
  auto run_cell = [&](std::size_t c) {
    const auto& cell = cells[c];
    const auto& entry = spec.datasets[cell.dataset];
    const auto& algo = spec.algorithms[cell.algorithm];
    const std::uint64_t seed = spec.seed_base + static_cast<std::uint64_t>(cell.repeat);
    const auto start = std::chrono::steady_clock::now();
    try {
      const auto data = prepare_split(loaded[cell.dataset], spec.train_fraction, seed);
      EngineConfig cfg = algo.configure(spec.engine);
      cfg.seed = seed;
      const auto path = spec.output_dir / cell_log_path(entry.name, algo, cell.repeat);
      std::ofstream out(path);
      if (!out) throw Error(path.string() + ": cannot write log");
      RunLog log(&out);
      log.emit({{"type", "cell"}, {"dataset", entry.name}, {"algorithm", algo.label()}, {"repeat", cell.repeat},
                {"seed", seed}, {"train_fraction", spec.train_fraction}});
      run(cfg, data.train, data.test, log);
    } catch (const std::exception& e) {
      cell_errors[c] = CellError{entry.name, algo.label(), cell.repeat, e.what()};
    }
    seconds[c] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  const std::size_t jobs = std::max<std::size_t>(1, std::min(spec.jobs, cells.size()));
  if (jobs == 1) {
    for (std::size_t c = 0; c < cells.size(); ++c) run_cell(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < jobs; ++j)
      pool.emplace_back([&] {
        for (std::size_t c; (c = next.fetch_add(1)) < cells.size();) run_cell(c);
      });
  }

  std::vector<RunSummary> runs;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (cell_errors[c]) {
      errors.push_back(*cell_errors[c]);
      continue;
    }
    const auto& cell = cells[c];
    const auto path =
        spec.output_dir / cell_log_path(spec.datasets[cell.dataset].name, spec.algorithms[cell.algorithm], cell.repeat);
    try {
      runs.push_back(summarize_log_file(path));
    } catch (const std::exception& e) {
      errors.push_back({spec.datasets[cell.dataset].name, spec.algorithms[cell.algorithm].label(), cell.repeat, e.what()});
    }
  }

  auto report = aggregate(std::move(runs));
  report.errors = std::move(errors);
  write_report_files(report, spec.output_dir);

  // Wall-clock lives apart from the report so report files stay reproducible.
  std::ofstream timing(spec.output_dir / "timing.csv");
  timing << "dataset,algorithm,repeat,seconds\n";
  for (std::size_t c = 0; c < cells.size(); ++c)
    timing << spec.datasets[cells[c].dataset].name << ',' << spec.algorithms[cells[c].algorithm].label() << ','
           << cells[c].repeat << ',' << format_fixed(seconds[c], 3) << '\n';
  return report;
}

/// Output directory after applying the SAWDE_OUTPUT_DIR override.
inline std::filesystem::path resolve_output_dir(const std::filesystem::path& requested) {
  if (const char* env = std::getenv("SAWDE_OUTPUT_DIR"); env && *env) return env;
  return requested;
}

}  // namespace sawde
