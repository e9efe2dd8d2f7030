#pragma once

// Tabular classification data: CSV loading, stratified train/test splits,
// stratified cross-validation folds and train-only min-max scaling.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sawde/error.hpp"
#include "sawde/rng.hpp"

namespace sawde {

/// Numeric feature matrix (row-major) with integer class labels 0..C-1.
struct Dataset {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> features;
  std::vector<int> labels;
  int class_count = 0;
  std::vector<std::string> class_names;
  std::vector<std::string> feature_names;

  double at(std::size_t r, std::size_t c) const { return features[r * cols + c]; }
  std::span<const double> row(std::size_t r) const {
    return {features.data() + r * cols, cols};
  }
};

/// Where the class label lives in a CSV file.
struct LabelColumn {
  enum class Kind { first, last, named };
  Kind kind = Kind::last;
  std::string name;

  static LabelColumn first() { return {Kind::first, {}}; }
  static LabelColumn last() { return {Kind::last, {}}; }
  static LabelColumn named(std::string n) { return {Kind::named, std::move(n)}; }

  /// "first", "last", or any other string as a header name.
  static LabelColumn parse(std::string_view s) {
    if (s == "first") return first();
    if (s == "last") return last();
    return named(std::string(s));
  }
  std::string to_string() const {
    switch (kind) {
      case Kind::first: return "first";
      case Kind::last: return "last";
      default: return name;
    }
  }
};

/// A subset of a dataset's rows, optionally carrying fold ids.
///
/// `rows` are indices into `source`; `folds[i]` is the fold of `rows[i]`.
struct DatasetView {
  std::shared_ptr<const Dataset> source;
  std::vector<std::size_t> rows;
  std::vector<int> folds;
  int fold_count = 0;

  std::size_t size() const { return rows.size(); }
  bool has_folds() const { return fold_count > 0; }
  const Dataset& data() const { return *source; }
  std::span<const double> features(std::size_t i) const { return source->row(rows[i]); }
  int label(std::size_t i) const { return source->labels[rows[i]]; }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return cells;
}

inline bool parse_real(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace detail

/// Parses CSV text with a header row. Labels are re-coded to 0..C-1 in order
/// of first appearance. `origin` is only used in error messages.
inline Dataset parse_dataset(std::istream& in, std::string name, const LabelColumn& label = LabelColumn::last(),
                             const std::string& origin = "<stream>") {
  auto fail = [&](std::size_t line, const std::string& what) -> DatasetError {
    return DatasetError(origin + ":" + std::to_string(line) + ": " + what);
  };

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    for (auto cell : detail::split_csv(line)) header.emplace_back(cell);
    break;
  }
  if (header.empty()) throw fail(line_no, "empty file");
  if (header.size() < 2) throw fail(line_no, "need at least one feature column and a label column");

  std::size_t label_col = header.size() - 1;
  if (label.kind == LabelColumn::Kind::first) {
    label_col = 0;
  } else if (label.kind == LabelColumn::Kind::named) {
    auto it = std::find(header.begin(), header.end(), label.name);
    if (it == header.end()) throw fail(1, "label column '" + label.name + "' not found in header");
    label_col = static_cast<std::size_t>(it - header.begin());
  }

  Dataset ds;
  ds.name = std::move(name);
  ds.cols = header.size() - 1;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (c != label_col) ds.feature_names.push_back(header[c]);

  std::map<std::string, int, std::less<>> codes;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv(line);
    if (cells.size() != header.size())
      throw fail(line_no, "expected " + std::to_string(header.size()) + " columns, found " +
                              std::to_string(cells.size()));
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c == label_col) {
        if (cells[c].empty()) throw fail(line_no, "column " + std::to_string(c + 1) + " ('" + header[c] + "'): missing label");
        auto it = codes.find(cells[c]);
        if (it == codes.end()) {
          it = codes.emplace(std::string(cells[c]), static_cast<int>(codes.size())).first;
          ds.class_names.emplace_back(cells[c]);
        }
        ds.labels.push_back(it->second);
        continue;
      }
      double v = 0.0;
      if (!detail::parse_real(cells[c], v))
        throw fail(line_no, "column " + std::to_string(c + 1) + " ('" + header[c] + "'): non-numeric value '" +
                                std::string(cells[c]) + "'");
      if (!std::isfinite(v))
        throw fail(line_no, "column " + std::to_string(c + 1) + " ('" + header[c] + "'): non-finite value");
      ds.features.push_back(v);
    }
    ++ds.rows;
  }
  ds.class_count = static_cast<int>(codes.size());
  if (ds.rows == 0) throw fail(line_no, "no data rows");
  if (ds.class_count < 2) throw fail(line_no, "dataset has a single class; need at least 2");
  if (ds.rows < static_cast<std::size_t>(ds.class_count))
    throw fail(line_no, "fewer rows than classes");
  return ds;
}

inline Dataset load_dataset(const std::filesystem::path& path, const LabelColumn& label = LabelColumn::last(),
                            std::string name = {}) {
  std::ifstream in(path);
  if (!in) throw DatasetError(path.string() + ": cannot open file");
  if (name.empty()) name = path.stem().string();
  return parse_dataset(in, std::move(name), label, path.string());
}

/// View over every row of a dataset, in index order.
inline DatasetView full_view(std::shared_ptr<const Dataset> ds) {
  DatasetView v;
  v.rows.resize(ds->rows);
  for (std::size_t i = 0; i < ds->rows; ++i) v.rows[i] = i;
  v.source = std::move(ds);
  return v;
}

/// Stratified split. Per-class train counts are apportioned by largest
/// remainder so the total is round(fraction * n) and every class is within
/// one instance of its exact share (remainder ties go to the lower class id).
inline std::pair<DatasetView, DatasetView> split_train_test(std::shared_ptr<const Dataset> ds, double train_fraction,
                                                            std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ContractError("split_train_test: train fraction must lie in (0, 1)");
  const auto classes = static_cast<std::size_t>(ds->class_count);
  std::vector<std::vector<std::size_t>> members(classes);
  for (std::size_t r = 0; r < ds->rows; ++r) members[static_cast<std::size_t>(ds->labels[r])].push_back(r);

  const auto total = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(ds->rows)));
  std::vector<std::size_t> take(classes);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    const double exact = train_fraction * static_cast<double>(members[c].size());
    take[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += take[c];
    remainders.emplace_back(exact - static_cast<double>(take[c]), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < total && i < remainders.size(); ++i) {
    const auto c = remainders[i].second;
    if (take[c] < members[c].size()) {
      ++take[c];
      ++assigned;
    }
  }

  DatasetView train, test;
  train.source = ds;
  test.source = ds;
  for (std::size_t c = 0; c < classes; ++c) {
    if (take[c] == 0)
      throw ContractError("split_train_test: class '" + ds->class_names[c] + "' has no training rows at fraction " +
                          std::to_string(train_fraction));
    Rng rng(derive_seed({seed, static_cast<std::uint64_t>(Stream::split), c}));
    auto idx = members[c];
    shuffle(idx, rng);
    train.rows.insert(train.rows.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take[c]));
    test.rows.insert(test.rows.end(), idx.begin() + static_cast<std::ptrdiff_t>(take[c]), idx.end());
  }
  std::sort(train.rows.begin(), train.rows.end());
  std::sort(test.rows.begin(), test.rows.end());
  return {std::move(train), std::move(test)};
}

/// Stratified fold assignment: each class is shuffled, classes are laid out
/// one after another and positions are dealt round-robin over the folds.
/// Fold sizes therefore differ by at most one, and a class with fewer members
/// than folds simply lands in consecutive folds.
inline DatasetView assign_folds(DatasetView view, int folds, std::uint64_t seed) {
  if (folds < 2) throw ContractError("assign_folds: need at least 2 folds");
  if (static_cast<std::size_t>(folds) > view.size())
    throw ContractError("assign_folds: " + std::to_string(folds) + " folds requested for " +
                        std::to_string(view.size()) + " rows");
  const auto classes = static_cast<std::size_t>(view.data().class_count);
  std::vector<std::vector<std::size_t>> members(classes);
  for (std::size_t i = 0; i < view.size(); ++i) members[static_cast<std::size_t>(view.label(i))].push_back(i);

  view.folds.assign(view.size(), 0);
  std::size_t position = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    Rng rng(derive_seed({seed, static_cast<std::uint64_t>(Stream::folds), c}));
    shuffle(members[c], rng);
    for (auto i : members[c]) view.folds[i] = static_cast<int>(position++ % static_cast<std::size_t>(folds));
  }
  view.fold_count = folds;
  return view;
}

/// Per-feature min-max parameters fitted on training rows.
struct MinMaxParams {
  std::vector<double> min;
  std::vector<double> max;

  double apply(std::size_t feature, double v) const {
    const double range = max[feature] - min[feature];
    if (!(range > 0.0)) return 0.0;
    return std::clamp((v - min[feature]) / range, 0.0, 1.0);
  }
};

struct Normalized {
  DatasetView train;
  DatasetView test;
  MinMaxParams params;
};

/// Fits min-max scaling on `train` only and applies it to both views. The
/// returned views share a new scaled copy of the dataset with unchanged row
/// indices; test values outside the training range are clamped to [0, 1].
inline Normalized normalize(const DatasetView& train, const DatasetView& test) {
  if (train.source != test.source) throw ContractError("normalize: views reference different datasets");
  if (train.size() == 0) throw ContractError("normalize: empty training view");
  const Dataset& src = train.data();
  MinMaxParams params;
  params.min.assign(src.cols, 0.0);
  params.max.assign(src.cols, 0.0);
  for (std::size_t c = 0; c < src.cols; ++c) {
    double lo = src.at(train.rows[0], c), hi = lo;
    for (auto r : train.rows) {
      lo = std::min(lo, src.at(r, c));
      hi = std::max(hi, src.at(r, c));
    }
    params.min[c] = lo;
    params.max[c] = hi;
  }

  auto scaled = std::make_shared<Dataset>(src);
  for (std::size_t r = 0; r < src.rows; ++r)
    for (std::size_t c = 0; c < src.cols; ++c) scaled->features[r * src.cols + c] = params.apply(c, src.at(r, c));

  Normalized out{train, test, std::move(params)};
  out.train.source = scaled;
  out.test.source = scaled;
  return out;
}

/// One line of a dataset manifest: `name,path,label-column`.
struct ManifestEntry {
  std::string name;
  std::filesystem::path path;
  LabelColumn label;
};

/// Reads a manifest. Blank lines and lines starting with '#' are skipped;
/// relative paths resolve against the manifest's directory.
inline std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError(path.string() + ": cannot open manifest");
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto cells = detail::split_csv(t);
    if (cells.size() < 2 || cells.size() > 3)
      throw DatasetError(path.string() + ":" + std::to_string(line_no) + ": expected name,path[,label-column]");
    ManifestEntry e;
    e.name = std::string(cells[0]);
    e.path = std::filesystem::path(std::string(cells[1]));
    if (e.path.is_relative()) e.path = path.parent_path() / e.path;
    e.label = cells.size() == 3 ? LabelColumn::parse(cells[2]) : LabelColumn::last();
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace sawde
