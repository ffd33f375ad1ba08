#pragma once

// The acceptance suite: nine property and oracle checks shared by the
// `validate` subcommand and the acceptance test binary.

#include <cstdint>
#include <string>
#include <vector>

namespace fpb {

struct CheckMetric {
  std::string name;
  double value = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  std::string rule;  // "+-" |value - expected| <= tolerance, "<=" value <= expected, ">=" value >= expected
  bool pass = false;
};

struct CheckResult {
  int id = 0;
  std::string name;
  std::vector<CheckMetric> metrics;
  bool pass = false;
  double seconds = 0.0;
  double budget = 0.0;  // runtime limit in seconds, informational
  std::string error;    // set when the check threw
};

struct ValidationReport {
  std::vector<CheckResult> checks;
  std::uint64_t seed = 0;
  double seconds = 0.0;

  bool pass() const;
};

struct ValidationConfig {
  std::uint64_t seed = 20240917;
  int threads = 0;
  std::size_t walkers = 100000;
  // Multiplies sigma in the lattice -> continuum map; anything but 1 is a
  // deliberate fault that the boundary checks must catch.
  double sigma_map_fault = 1.0;
  std::vector<int> only;  // check ids to run, empty: all
};

CheckMetric metric_near(std::string name, double value, double expected, double tolerance);
CheckMetric metric_at_most(std::string name, double value, double bound);
CheckMetric metric_at_least(std::string name, double value, double bound);

CheckResult check_basis_identity(const ValidationConfig& cfg);
CheckResult check_kernel(const ValidationConfig& cfg);
CheckResult check_generating_functions(const ValidationConfig& cfg);
CheckResult check_walk_vs_exact(const ValidationConfig& cfg);
CheckResult check_sqrt_scaling(const ValidationConfig& cfg);
CheckResult check_singular_moments(const ValidationConfig& cfg);
CheckResult check_pde_oracles(const ValidationConfig& cfg);
CheckResult check_pde_vs_walk(const ValidationConfig& cfg);
CheckResult check_backward_residual(const ValidationConfig& cfg);

/// Runs the selected checks in order. Exceptions inside a check mark it
/// failed with the message in `error`.
ValidationReport run_validation(const ValidationConfig& cfg);

std::string format_table(const ValidationReport& report);

}  // namespace fpb
