#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"

namespace fpb::cli {

enum ExitCode { kOk = 0, kValidationFailed = 1, kConfigError = 2, kNumericalError = 3 };

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  int threads = 0;
  std::string fault;     // validate only: "sigma-map"
  std::vector<int> only;  // validate only
};

std::filesystem::path output_dir(const ExperimentConfig& cfg, const RunOptions& opt);

int cmd_basis(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& out);
int cmd_walk(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& out);
int cmd_evolve(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& out);
int cmd_kernel(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& out);
int cmd_solve(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& out);
int cmd_validate(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& out);

/// Full command line: parses flags, loads the config, dispatches, and maps
/// exceptions to exit codes. Diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fpb::cli
