#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace frameflow {

/// One invariant check: `value` is the measured quantity compared against `tolerance`.
struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

/// Fast invariant suite over the compiled-in presets; a few seconds at most.
std::vector<CheckResult> run_selftest(std::uint64_t seed = 1);

}  // namespace frameflow
