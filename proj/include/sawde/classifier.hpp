#pragma once

// KNN wrapper fitness: k-fold cross-validated accuracy of a KNN classifier
// restricted to a feature mask.
//
// Neighbour order is (squared Euclidean distance, source row index); class
// votes tie toward the smallest class id. Distances always accumulate the
// selected features in ascending index order, so every code path (pair
// table, direct scan, test-set scoring) produces bit-identical distances.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include "sawde/dataset.hpp"
#include "sawde/error.hpp"

namespace sawde {

/// Feature-selection bit string. Bit j set means feature j is selected.
class BinaryMask {
 public:
  BinaryMask() = default;
  explicit BinaryMask(std::size_t size) : bits_(size, '0') {}

  /// Parses a string of '0'/'1' characters.
  static BinaryMask from_string(std::string_view s) {
    BinaryMask m(s.size());
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (s[j] != '0' && s[j] != '1') throw ContractError("BinaryMask: invalid character in '" + std::string(s) + "'");
      m.set(j, s[j] == '1');
    }
    return m;
  }

  static BinaryMask from_indices(std::size_t size, std::span<const std::size_t> selected) {
    BinaryMask m(size);
    for (auto j : selected) {
      if (j >= size) throw ContractError("BinaryMask: index out of range");
      m.set(j);
    }
    return m;
  }

  std::size_t size() const { return bits_.size(); }
  std::size_t count() const { return ones_; }
  bool empty() const { return ones_ == 0; }
  bool test(std::size_t j) const { return bits_[j] == '1'; }

  void set(std::size_t j, bool on = true) {
    if (test(j) == on) return;
    bits_[j] = on ? '1' : '0';
    on ? ++ones_ : --ones_;
  }

  std::vector<std::size_t> indices() const {
    std::vector<std::size_t> out;
    out.reserve(ones_);
    for (std::size_t j = 0; j < bits_.size(); ++j)
      if (bits_[j] == '1') out.push_back(j);
    return out;
  }

  const std::string& to_string() const { return bits_; }

  friend bool operator==(const BinaryMask& a, const BinaryMask& b) { return a.bits_ == b.bits_; }

 private:
  std::string bits_;
  std::size_t ones_ = 0;
};

namespace detail {

struct Neighbor {
  double distance;
  std::size_t row;  // source row index, the tie-breaker
  int label;
};

inline bool closer(const Neighbor& a, const Neighbor& b) {
  return a.distance < b.distance || (a.distance == b.distance && a.row < b.row);
}

/// Keeps the k closest neighbours seen so far, sorted.
class NearestK {
 public:
  explicit NearestK(std::size_t k) : k_(k) { best_.reserve(k + 1); }

  void offer(const Neighbor& n) {
    if (best_.size() == k_ && !closer(n, best_.back())) return;
    auto pos = std::upper_bound(best_.begin(), best_.end(), n, closer);
    best_.insert(pos, n);
    if (best_.size() > k_) best_.pop_back();
  }

  /// Majority class; ties resolve to the smallest class id.
  int vote(int class_count, std::vector<int>& tally) const {
    tally.assign(static_cast<std::size_t>(class_count), 0);
    for (const auto& n : best_) ++tally[static_cast<std::size_t>(n.label)];
    return static_cast<int>(std::max_element(tally.begin(), tally.end()) - tally.begin());
  }

  void clear() { best_.clear(); }

  /// Distance beyond which no candidate can enter the set.
  double bound() const {
    return best_.size() < k_ ? std::numeric_limits<double>::infinity() : best_.back().distance;
  }

 private:
  std::size_t k_;
  std::vector<Neighbor> best_;
};

inline double masked_sq_distance(std::span<const double> a, std::span<const double> b,
                                 std::span<const std::size_t> selected) {
  double s = 0.0;
  for (auto j : selected) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

}  // namespace detail

/// Predicts the class of `query` from the rows of `train`, measuring distance
/// over the selected features only.
inline int knn_predict(const DatasetView& train, std::span<const double> query, const BinaryMask& mask, int k) {
  if (mask.empty()) throw ContractError("knn_predict: empty feature mask");
  if (k < 1 || static_cast<std::size_t>(k) > train.size())
    throw ContractError("knn_predict: k must lie in [1, |train|]");
  const auto selected = mask.indices();
  detail::NearestK nearest(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < train.size(); ++i)
    nearest.offer({detail::masked_sq_distance(train.features(i), query, selected), train.rows[i], train.label(i)});
  std::vector<int> tally;
  return nearest.vote(train.data().class_count, tally);
}

/// Accuracy on `test` using all of `train` as the neighbour pool. Does not
/// touch any evaluation budget.
inline double test_accuracy(const DatasetView& train, const DatasetView& test, const BinaryMask& mask, int k) {
  if (mask.empty() || test.size() == 0) return 0.0;
  if (k < 1 || static_cast<std::size_t>(k) > train.size())
    throw ContractError("test_accuracy: k must lie in [1, |train|]");
  const auto selected = mask.indices();
  detail::NearestK nearest(static_cast<std::size_t>(k));
  std::vector<int> tally;
  std::size_t correct = 0;
  for (std::size_t q = 0; q < test.size(); ++q) {
    nearest.clear();
    const auto query = test.features(q);
    for (std::size_t i = 0; i < train.size(); ++i)
      nearest.offer({detail::masked_sq_distance(train.features(i), query, selected), train.rows[i], train.label(i)});
    if (nearest.vote(train.data().class_count, tally) == test.label(q)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

struct EvaluatorOptions {
  int k = 3;
  bool cache = true;
  std::size_t workers = 1;
  /// Reference path: one masked distance per (query, candidate) over the
  /// row-major data. Slower; returns identical values.
  bool direct_scan = false;
};

/// Cross-validated KNN accuracy over a fold-assigned training view, with a
/// monotone evaluation counter (FES).
///
/// Every call to cv_accuracy() counts as one evaluation, including cache hits
/// and the empty mask (which scores 0.0). Accuracy is micro-averaged: total
/// correct predictions over all folds divided by the number of rows.
class FitnessEvaluator {
 public:
  explicit FitnessEvaluator(const DatasetView& train, EvaluatorOptions opts = {}) : opts_(opts) {
    if (!train.has_folds()) throw ContractError("FitnessEvaluator: training view has no fold assignment");
    if (opts_.k < 1) throw ContractError("FitnessEvaluator: k must be positive");
    n_ = train.size();
    d_ = train.data().cols;
    class_count_ = train.data().class_count;

    std::vector<std::size_t> order(n_);
    for (std::size_t i = 0; i < n_; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return train.folds[a] != train.folds[b] ? train.folds[a] < train.folds[b] : train.rows[a] < train.rows[b];
    });
    x_.resize(n_ * d_);
    columns_.resize(n_ * d_);
    label_.resize(n_);
    fold_.resize(n_);
    source_.resize(n_);
    const auto folds = static_cast<std::size_t>(train.fold_count);
    fold_begin_.assign(folds + 1, 0);
    for (std::size_t i = 0; i < n_; ++i) {
      const auto src = order[i];
      const auto f = train.features(src);
      std::copy(f.begin(), f.end(), x_.begin() + static_cast<std::ptrdiff_t>(i * d_));
      for (std::size_t j = 0; j < d_; ++j) columns_[j * n_ + i] = f[j];
      label_[i] = train.label(src);
      fold_[i] = train.folds[src];
      source_[i] = train.rows[src];
      ++fold_begin_[static_cast<std::size_t>(fold_[i]) + 1];
    }
    for (std::size_t f = 0; f < folds; ++f) {
      if (n_ - fold_begin_[f + 1] < static_cast<std::size_t>(opts_.k))
        throw ContractError("FitnessEvaluator: a fold leaves fewer than k neighbours");
      fold_begin_[f + 1] += fold_begin_[f];
    }
  }

  FitnessEvaluator(const FitnessEvaluator&) = delete;
  FitnessEvaluator& operator=(const FitnessEvaluator&) = delete;

  double cv_accuracy(const BinaryMask& mask) {
    if (mask.size() != d_) throw ContractError("cv_accuracy: mask length does not match feature count");
    fes_.fetch_add(1, std::memory_order_relaxed);
    if (mask.empty()) return 0.0;
    if (opts_.cache) {
      std::lock_guard lock(cache_mutex_);
      if (auto it = cache_.find(mask.to_string()); it != cache_.end()) {
        ++cache_hits_;
        return it->second;
      }
    }
    const double acc = compute(mask);
    if (opts_.cache) {
      std::lock_guard lock(cache_mutex_);
      cache_.emplace(mask.to_string(), acc);
    }
    return acc;
  }

  /// Evaluates a batch, spreading work over `workers` threads. Results are in
  /// input order and do not depend on the worker count.
  std::vector<double> evaluate(std::span<const BinaryMask> masks) {
    std::vector<double> out(masks.size());
    const std::size_t workers = std::min(opts_.workers, masks.size());
    if (workers <= 1) {
      for (std::size_t i = 0; i < masks.size(); ++i) out[i] = cv_accuracy(masks[i]);
      return out;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
          try {
            for (std::size_t i; (i = next.fetch_add(1)) < masks.size();) out[i] = cv_accuracy(masks[i]);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
    return out;
  }

  std::uint64_t fes() const { return fes_.load(std::memory_order_relaxed); }
  std::size_t dimension() const { return d_; }
  std::size_t rows() const { return n_; }
  int k() const { return opts_.k; }
  bool direct_scan() const { return opts_.direct_scan; }
  std::uint64_t cache_hits() const {
    std::lock_guard lock(cache_mutex_);
    return cache_hits_;
  }

 private:
  /// dist[c] = sum over t of (vq[t] - packed[t][c])^2 for c in [begin, end),
  /// summed in ascending t. Candidates are processed in register-sized tiles.
  __attribute__((target_clones("avx2", "default"))) void accumulate(const double* packed, const double* vq, std::size_t s, std::size_t begin, std::size_t end,
                  double* dist) const {
    constexpr std::size_t tile = 8;
    std::size_t c = begin;
    for (; c + tile <= end; c += tile) {
      double acc[tile] = {};
      for (std::size_t t = 0; t < s; ++t) {
        const double* col = packed + t * n_ + c;
        for (std::size_t u = 0; u < tile; ++u) {
          const double diff = vq[t] - col[u];
          acc[u] += diff * diff;
        }
      }
      for (std::size_t u = 0; u < tile; ++u) dist[c + u] = acc[u];
    }
    for (; c < end; ++c) {
      double acc = 0.0;
      for (std::size_t t = 0; t < s; ++t) {
        const double diff = vq[t] - packed[t * n_ + c];
        acc += diff * diff;
      }
      dist[c] = acc;
    }
  }

  void offer_range(detail::NearestK& nearest, const double* dist, std::size_t begin, std::size_t end) const {
    double bound = std::numeric_limits<double>::infinity();
    for (std::size_t c = begin; c < end; ++c) {
      if (dist[c] > bound) continue;
      nearest.offer({dist[c], source_[c], label_[c]});
      bound = nearest.bound();
    }
  }

  double compute(const BinaryMask& mask) const {
    const auto selected = mask.indices();
    detail::NearestK nearest(static_cast<std::size_t>(opts_.k));
    std::vector<int> tally;
    std::size_t correct = 0;

    if (opts_.direct_scan) {
      for (std::size_t q = 0; q < n_; ++q) {
        nearest.clear();
        const std::span<const double> xq(x_.data() + q * d_, d_);
        for (std::size_t c = 0; c < n_; ++c) {
          if (fold_[c] == fold_[q]) continue;
          const std::span<const double> xc(x_.data() + c * d_, d_);
          nearest.offer({detail::masked_sq_distance(xq, xc, selected), source_[c], label_[c]});
        }
        if (nearest.vote(class_count_, tally) == label_[q]) ++correct;
      }
      return static_cast<double>(correct) / static_cast<double>(n_);
    }

    // Selected columns packed feature-major so each query sweeps contiguous
    // memory; features are still accumulated in ascending index order.
    thread_local std::vector<double> packed, dist;
    const std::size_t s = selected.size();
    packed.resize(s * n_);
    for (std::size_t t = 0; t < s; ++t)
      std::copy_n(columns_.data() + selected[t] * n_, n_, packed.data() + t * n_);
    dist.resize(n_);

    std::vector<double> vq(s);
    for (std::size_t q = 0; q < n_; ++q) {
      const auto f = static_cast<std::size_t>(fold_[q]);
      const std::size_t lo = fold_begin_[f], hi = fold_begin_[f + 1];
      for (std::size_t t = 0; t < s; ++t) vq[t] = packed[t * n_ + q];
      accumulate(packed.data(), vq.data(), s, 0, lo, dist.data());
      accumulate(packed.data(), vq.data(), s, hi, n_, dist.data());
      nearest.clear();
      offer_range(nearest, dist.data(), 0, lo);
      offer_range(nearest, dist.data(), hi, n_);
      if (nearest.vote(class_count_, tally) == label_[q]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(n_);
  }

  EvaluatorOptions opts_;
  std::size_t n_ = 0;
  std::size_t d_ = 0;
  int class_count_ = 0;
  std::vector<double> x_;        // row-major
  std::vector<double> columns_;  // feature-major copy of x_
  std::vector<int> label_;
  std::vector<int> fold_;
  std::vector<std::size_t> fold_begin_;  // rows are grouped by fold
  std::vector<std::size_t> source_;

  std::atomic<std::uint64_t> fes_{0};
  mutable std::mutex cache_mutex_;
  std::unordered_map<std::string, double> cache_;
  std::uint64_t cache_hits_ = 0;
};

}  // namespace sawde
