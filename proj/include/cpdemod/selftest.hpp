#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "cpdemod/random.hpp"

namespace cpdemod {

struct SelftestOptions {
  Seed seed = 0;
  /// Added to the quantile rank under test. Nonzero values are a mutation
  /// used to confirm the checks can fail.
  std::ptrdiff_t quantile_rank_offset = 0;
  std::size_t coverage_trials = 100000;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Largest coordinate-wise |analytic - central difference| / (|analytic| + 1e-8)
/// for a randomly initialised network on a random dataset.
double gradient_check_error(Seed seed, double h = 1e-5);

/// Fraction of trials where an exchangeable test score is covered by the
/// validation-quantile rule at (n_val, alpha).
double exchangeable_coverage(std::size_t n_val, double alpha, std::size_t trials, Seed seed,
                             std::ptrdiff_t rank_offset = 0);

std::vector<CheckResult> run_selftest(const SelftestOptions& options);

/// Prints one "PASS|FAIL name detail" line per check; returns true if all pass.
bool report(const std::vector<CheckResult>& results, std::ostream& os);

}  // namespace cpdemod
