#pragma once

#include <string>
#include <vector>

#include "coordfree/artifacts.hpp"
#include "coordfree/parallel.hpp"

namespace coordfree {

struct CheckResult {
  std::string name;
  bool passed = false;
  bool skipped = false;
  std::string detail;
};

struct VerifyOptions {
  ExecutionOptions exec;
  /// Systems up to this many states get the oracle on every (x, d); larger
  /// ones on a deterministic sample around layer boundaries.
  std::size_t exhaustive_oracle_states = 2000;
  std::size_t oracle_samples = 200;
  std::size_t oracle_budget = 20'000'000;
};

/// Recomputes everything derivable from the system and compares it with the
/// stored controller and layer map, then cross-checks the chain against the
/// adversarial oracle.
std::vector<CheckResult> verify_pipeline(const SystemArtifact& sys, const ControllerArtifact& ctrl,
                                         const LayersArtifact& layers, const VerifyOptions& options = {});

bool all_passed(const std::vector<CheckResult>& results);

}  // namespace coordfree
