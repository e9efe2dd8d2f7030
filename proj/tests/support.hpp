#pragma once

#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sawde/sawde.hpp"

namespace support {

inline std::shared_ptr<const sawde::Dataset> dataset_from(const std::vector<oracle::Point>& pts, int classes,
                                                          std::string name = "synthetic") {
  auto ds = std::make_shared<sawde::Dataset>();
  ds->name = std::move(name);
  ds->rows = pts.size();
  ds->cols = pts.front().x.size();
  for (const auto& p : pts) {
    ds->features.insert(ds->features.end(), p.x.begin(), p.x.end());
    ds->labels.push_back(p.label);
  }
  ds->class_count = classes;
  for (int c = 0; c < classes; ++c) ds->class_names.push_back("c" + std::to_string(c));
  for (std::size_t j = 0; j < ds->cols; ++j) ds->feature_names.push_back("f" + std::to_string(j));
  return ds;
}

inline std::shared_ptr<const sawde::Dataset> parse(const std::string& csv,
                                                   sawde::LabelColumn label = sawde::LabelColumn::last()) {
  std::istringstream in(csv);
  return std::make_shared<const sawde::Dataset>(sawde::parse_dataset(in, "inline", label));
}

inline std::vector<int> to_ints(const sawde::BinaryMask& m) {
  std::vector<int> out(m.size());
  for (std::size_t j = 0; j < m.size(); ++j) out[j] = m.test(j) ? 1 : 0;
  return out;
}

/// Two classes separated by feature 0 only (plus `extra_informative` copies),
/// the remaining features are noise.
inline std::shared_ptr<const sawde::Dataset> separable(std::size_t rows, std::size_t dims, std::size_t informative,
                                                       unsigned seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> noise(0.0, 1.0);
  std::vector<oracle::Point> pts(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const int label = static_cast<int>(i % 2);
    pts[i].label = label;
    pts[i].id = i;
    pts[i].x.resize(dims);
    for (std::size_t j = 0; j < dims; ++j)
      pts[i].x[j] = j < informative ? (label == 0 ? 0.1 : 0.9) + 0.05 * noise(gen) : noise(gen);
  }
  return dataset_from(pts, 2, "separable");
}

}  // namespace support
