// Command-line front end: run, experiment, rank-cms, report, ttest, convergence.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "sawde/sawde.hpp"

namespace {

using sawde::Json;

/// Engine flags shared by `run` and `experiment`; names follow EngineConfig.
struct EngineFlags {
  std::size_t population = 100;
  std::size_t sub_populations = 5;
  std::uint64_t max_fes = 1'000'000;
  double theta = 0.6;
  int k = 3;
  int folds = 3;
  std::size_t workers = 1;
  bool no_early_stop = false;
  bool no_cache = false;

  void attach(CLI::App* app) {
    app->add_option("-N,--population", population, "Population size")->capture_default_str();
    app->add_option("-m,--sub-populations", sub_populations, "Number of sub-populations")->capture_default_str();
    app->add_option("--max-fes", max_fes, "Fitness-evaluation budget")->capture_default_str();
    app->add_option("--theta", theta, "Binarization threshold")->capture_default_str();
    app->add_option("-k,--neighbors", k, "KNN neighbours")->capture_default_str();
    app->add_option("--folds", folds, "Cross-validation folds")->capture_default_str();
    app->add_option("--workers", workers, "Evaluation threads per run")->capture_default_str();
    app->add_flag("--no-early-stop", no_early_stop, "Disable the perfect-accuracy early stop");
    app->add_flag("--no-cache", no_cache, "Disable the fitness cache");
  }

  sawde::EngineConfig config() const {
    sawde::EngineConfig cfg;
    cfg.population = population;
    cfg.sub_populations = sub_populations;
    cfg.max_fes = max_fes;
    cfg.theta = theta;
    cfg.k = k;
    cfg.folds = folds;
    cfg.workers = workers;
    cfg.early_stop = !no_early_stop;
    cfg.cache = !no_cache;
    return cfg;
  }
};

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> out;
  for (auto cell : sawde::detail::split_csv(csv)) {
    double v = 0.0;
    if (!sawde::detail::parse_real(cell, v)) throw sawde::ContractError("not a number: '" + std::string(cell) + "'");
    out.push_back(v);
  }
  return out;
}

/// Column `column` of runs.csv rows matching `dataset` and `algorithm`.
std::vector<double> runs_column(const std::string& path, const std::string& dataset, const std::string& algorithm,
                                const std::string& column) {
  std::ifstream in(path);
  if (!in) throw sawde::Error(path + ": cannot open");
  std::string line;
  std::getline(in, line);
  const auto header = sawde::detail::split_csv(line);
  std::vector<std::string> names(header.begin(), header.end());
  auto find = [&](const std::string& n) {
    auto it = std::find(names.begin(), names.end(), n);
    if (it == names.end()) throw sawde::Error(path + ": no column '" + n + "'");
    return static_cast<std::size_t>(it - names.begin());
  };
  const auto ci = find(column), di = find("dataset"), ai = find("algorithm");
  std::vector<double> out;
  while (std::getline(in, line)) {
    const auto cells = sawde::detail::split_csv(line);
    if (cells.size() != names.size() || cells[di] != dataset || cells[ai] != algorithm) continue;
    double v = 0.0;
    if (!sawde::detail::parse_real(cells[ci], v)) throw sawde::Error(path + ": non-numeric '" + std::string(cells[ci]) + "'");
    out.push_back(v);
  }
  return out;
}

int fail(const std::string& message) {
  std::cerr << Json{{"error", message}}.dump() << '\n';
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-adaptive weighted differential evolution for wrapper feature selection"};
  app.require_subcommand(1);

  // run ---------------------------------------------------------------------
  auto* run_cmd = app.add_subcommand("run", "Optimize one dataset with one algorithm");
  EngineFlags run_flags;
  std::string data_path, label = "last", algorithm = "sawde", log_path, name;
  std::uint64_t seed = 1;
  double train_fraction = 0.7;
  run_cmd->add_option("--data", data_path, "CSV file with header row")->required();
  run_cmd->add_option("--label", label, "Label column: first, last or a header name")->capture_default_str();
  run_cmd->add_option("--name", name, "Dataset name (defaults to the file stem)");
  run_cmd->add_option("--algorithm", algorithm, "sawde or single-cms:<1..8>")->capture_default_str();
  run_cmd->add_option("--seed", seed, "Seed for the split and the optimizer")->capture_default_str();
  run_cmd->add_option("--train-fraction", train_fraction, "Training share of the split")->capture_default_str();
  run_cmd->add_option("--log", log_path, "Write the run log (JSON lines) here");
  run_flags.attach(run_cmd);

  // experiment --------------------------------------------------------------
  auto* exp_cmd = app.add_subcommand("experiment", "Sweep datasets x algorithms x repeats from a manifest");
  EngineFlags exp_flags;
  std::string manifest, out_dir = "results";
  std::vector<std::string> algorithms{"sawde"};
  int repeats = 5;
  std::uint64_t seed_base = 1;
  std::size_t jobs = 1;
  double exp_fraction = 0.7;
  exp_cmd->add_option("--manifest", manifest, "Lines of name,path,label-column")->required();
  exp_cmd->add_option("--algorithms", algorithms, "sawde and/or single-cms:<1..8>")->delimiter(',')->capture_default_str();
  exp_cmd->add_option("--repeats", repeats, "Runs per cell")->capture_default_str();
  exp_cmd->add_option("--seed-base", seed_base, "Seed of repeat 0")->capture_default_str();
  exp_cmd->add_option("--train-fraction", exp_fraction, "Training share of each split")->capture_default_str();
  exp_cmd->add_option("--out", out_dir, "Output directory (SAWDE_OUTPUT_DIR overrides)")->capture_default_str();
  exp_cmd->add_option("--jobs", jobs, "Cells run concurrently")->capture_default_str();
  exp_flags.attach(exp_cmd);

  // rank-cms ----------------------------------------------------------------
  auto* rank_cmd = app.add_subcommand("rank-cms", "Pick the five strongest mutation scenarios");
  std::string table_path, counts_csv;
  auto* table_opt = rank_cmd->add_option("--table", table_path, "CSV: dataset,cms1..cms8 accuracies");
  auto* counts_opt = rank_cmd->add_option("--counts", counts_csv, "Eight worst-counts, comma separated");
  table_opt->excludes(counts_opt);

  // report ------------------------------------------------------------------
  auto* report_cmd = app.add_subcommand("report", "Aggregate run logs into report tables");
  std::string logs_dir, report_out = "results";
  report_cmd->add_option("--logs", logs_dir, "Directory searched for *.jsonl logs")->required();
  report_cmd->add_option("--out", report_out, "Output directory (SAWDE_OUTPUT_DIR overrides)")->capture_default_str();

  // ttest -------------------------------------------------------------------
  auto* ttest_cmd = app.add_subcommand("ttest", "Welch t-test between two result columns");
  std::string sample_a, sample_b, runs_csv, column = "train_accuracy", dataset_name, algo_a, algo_b;
  ttest_cmd->add_option("--a", sample_a, "Inline sample A, comma separated");
  ttest_cmd->add_option("--b", sample_b, "Inline sample B, comma separated");
  ttest_cmd->add_option("--runs", runs_csv, "runs.csv produced by experiment/report");
  ttest_cmd->add_option("--column", column, "Column of runs.csv to compare")->capture_default_str();
  ttest_cmd->add_option("--dataset", dataset_name, "Dataset filter for runs.csv");
  ttest_cmd->add_option("--algorithm-a", algo_a, "Algorithm for sample A");
  ttest_cmd->add_option("--algorithm-b", algo_b, "Algorithm for sample B");

  // convergence -------------------------------------------------------------
  auto* conv_cmd = app.add_subcommand("convergence", "Convert a run log to a convergence CSV");
  std::string conv_log;
  conv_cmd->add_option("--log", conv_log, "Run log (JSON lines)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      auto ds = std::make_shared<const sawde::Dataset>(
          sawde::load_dataset(data_path, sawde::LabelColumn::parse(label), name));
      const auto algo = sawde::AlgorithmSpec::parse(algorithm);
      auto cfg = algo.configure(run_flags.config());
      cfg.seed = seed;
      const auto data = sawde::prepare_split(ds, train_fraction, seed);
      std::ofstream log_file;
      sawde::RunLog log;
      if (!log_path.empty()) {
        log_file.open(log_path);
        if (!log_file) return fail(log_path + ": cannot write log");
        log = sawde::RunLog(&log_file);
        log.emit({{"type", "cell"}, {"dataset", ds->name}, {"algorithm", algo.label()}, {"repeat", 0}, {"seed", seed},
                  {"train_fraction", train_fraction}});
      }
      const auto r = sawde::run(cfg, data.train, data.test, log);
      std::cout << Json{{"dataset", ds->name},
                        {"algorithm", algo.label()},
                        {"D", r.dimension},
                        {"train_accuracy", r.train_accuracy},
                        {"test_accuracy", r.test_accuracy},
                        {"subset_size", r.subset_size},
                        {"reduction_pct", 100.0 * r.reduction_rate},
                        {"fes", r.fes_used},
                        {"generations", r.generations},
                        {"early_stopped", r.early_stopped},
                        {"mask", r.best.mask.to_string()}}
                       .dump(2)
                << '\n';
      return 0;
    }

    if (*exp_cmd) {
      sawde::ExperimentSpec spec;
      spec.datasets = sawde::load_manifest(manifest);
      spec.algorithms.clear();
      for (const auto& a : algorithms) spec.algorithms.push_back(sawde::AlgorithmSpec::parse(a));
      spec.repeats = repeats;
      spec.engine = exp_flags.config();
      spec.seed_base = seed_base;
      spec.train_fraction = exp_fraction;
      spec.output_dir = sawde::resolve_output_dir(out_dir);
      spec.jobs = jobs;
      const auto report = sawde::run_experiment(spec);
      sawde::write_report_csv(report, std::cout);
      if (!report.errors.empty()) {
        std::cerr << sawde::errors_json(report.errors).dump() << '\n';
        return 2;
      }
      return 0;
    }

    if (*rank_cmd) {
      sawde::CmsRanking ranking;
      if (!table_path.empty()) {
        std::ifstream in(table_path);
        if (!in) return fail(table_path + ": cannot open");
        ranking = sawde::rank_cms(sawde::parse_cms_table(in, table_path));
      } else if (!counts_csv.empty()) {
        const auto values = parse_values(counts_csv);
        if (values.size() != 8) return fail("--counts needs exactly 8 values");
        std::array<int, 8> counts{};
        for (std::size_t i = 0; i < 8; ++i) counts[i] = static_cast<int>(values[i]);
        ranking = sawde::rank_cms_from_counts(counts);
      } else {
        return fail("rank-cms needs --table or --counts");
      }
      Json order = Json::array(), selected = Json::array();
      for (auto c : ranking.order) order.push_back(sawde::to_int(c));
      for (auto c : ranking.selected) selected.push_back(sawde::to_int(c));
      std::cout << Json{{"worst_counts", ranking.worst_counts}, {"order", order}, {"selected", selected}}.dump() << '\n';
      return 0;
    }

    if (*report_cmd) {
      const auto report = sawde::report_from_logs(logs_dir);
      sawde::write_report_files(report, sawde::resolve_output_dir(report_out));
      sawde::write_report_csv(report, std::cout);
      if (!report.errors.empty()) {
        std::cerr << sawde::errors_json(report.errors).dump() << '\n';
        return 2;
      }
      return 0;
    }

    if (*ttest_cmd) {
      std::vector<double> a, b;
      if (!runs_csv.empty()) {
        if (dataset_name.empty() || algo_a.empty() || algo_b.empty())
          return fail("--runs needs --dataset, --algorithm-a and --algorithm-b");
        a = runs_column(runs_csv, dataset_name, algo_a, column);
        b = runs_column(runs_csv, dataset_name, algo_b, column);
      } else {
        a = parse_values(sample_a);
        b = parse_values(sample_b);
      }
      const double p = sawde::welch_t_test(a, b);
      std::cout << Json{{"n_a", a.size()},
                        {"n_b", b.size()},
                        {"mean_a", sawde::mean_of(a)},
                        {"mean_b", sawde::mean_of(b)},
                        {"p_value", p},
                        {"significant_at_0.05", p < 0.05}}
                       .dump()
                << '\n';
      return 0;
    }

    if (*conv_cmd) {
      std::ifstream in(conv_log);
      if (!in) return fail(conv_log + ": cannot open");
      std::cout << sawde::emit_convergence(in, conv_log);
      return 0;
    }
  } catch (const std::exception& e) {
    return fail(e.what());
  }
  return 0;
}
