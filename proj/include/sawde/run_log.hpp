#pragma once

// Line-delimited JSON run log. One object per line, each with a "type" field:
//
//   run_start   configuration and dataset shape
//   init        state after the initial population is evaluated
//   reward      a strategy was rewarded and forced on a sub-population
//   select      strategy chosen for a sub-population
//   pass        one scenario applied to one sub-population
//   elite       features tallied from a sub-population's elites
//   search      prefix-subset search result
//   inject      worst individual replaced by the search result
//   generation  per-generation trace row with counter snapshots
//   end         final result
//
// Records never contain wall-clock or thread-count information, so a log is a
// pure function of configuration, data and seed.

#include <ostream>
#include <string>

#include <json.hpp>

namespace sawde {

using Json = nlohmann::ordered_json;

class RunLog {
 public:
  RunLog() = default;
  explicit RunLog(std::ostream* out) : out_(out) {}

  bool enabled() const { return out_ != nullptr; }

  void emit(const Json& record) {
    if (out_) *out_ << record.dump() << '\n';
  }

 private:
  std::ostream* out_ = nullptr;
};

}  // namespace sawde
