#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "coordfree/core_model.hpp"
#include "coordfree/simulation.hpp"

namespace coordfree {

struct TraceHeader {
  std::string scenario;
  std::string mode;    ///< delay | selftrig | coordinated
  std::string policy;
  std::uint64_t seed = 0;
  std::size_t runs = 0;
  std::size_t horizon_steps = 0;
  std::size_t delay_steps = 0;
  double tau = 0.0;
  std::optional<std::size_t> fixed_point;
  UniformGrid grid;
};

struct TraceRun {
  std::size_t run = 0;
  Trace trace;
  std::string verdict;  ///< "safe", "unsafe", "unsafe-blocked"
  std::optional<std::size_t> violation_step;
  std::string error;    ///< non-empty when the run aborted
};

/// JSON lines: one "header" record, then per run one "step" record per time
/// step followed by a "verdict" record.
class TraceWriter {
 public:
  TraceWriter(std::ostream& out, const TraceHeader& header);
  void write(const TraceRun& run);

 private:
  std::ostream& out_;
  UniformGrid grid_;
};

struct TraceFile {
  TraceHeader header;
  std::vector<TraceRun> runs;
};

TraceFile read_traces(const std::filesystem::path& path);

}  // namespace coordfree
