#pragma once

// Experiment configuration read from a sectioned key = value file.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fpb/fp_solver.hpp"
#include "fpb/lattice_walk.hpp"
#include "fpb/singularity_analysis.hpp"
#include "fpb/tensor_geometry.hpp"

namespace fpb::cli {

struct LatticeBlock {
  double tau_a = 1e-4;
  std::size_t walkers = 10000;
  std::int64_t steps = 1000;
  int n0 = 0;
  std::uint64_t seed = 1;
  SurfaceJumpMode jump_mode = SurfaceJumpMode::Auto;
};

struct SolverBlock {
  double depth = 0.0;
  double width = 0.0;  // 2D only
  double dz = 0.0;
  double dx = 0.0;     // 0: same as dz
  double T = 0.0;
  double dt = 0.0;
  Vector start;        // (x, z) in 2D, (z) in 1D
  SourceShape source = SourceShape::Spread;
  int ledger_every = 0;
  bool compare_walk = false;
};

struct ExperimentConfig {
  std::optional<DiffusionModel> model;
  std::optional<BoundaryCoefficients> boundary;
  std::optional<LatticeBlock> lattice;
  std::optional<SolverBlock> solver;
  std::vector<double> tau;   // [sweep] tau, ascending
  std::vector<double> zeta;  // [sweep] zeta, kernel offsets
  std::vector<double> s;     // [sweep] s, transform points
  std::filesystem::path out_dir = "out";
};

/// Throws fpb::Error(ConfigError) naming the offending key.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Accessors that throw ConfigError when the block is missing.
const DiffusionModel& require_model(const ExperimentConfig& cfg);
const BoundaryCoefficients& require_boundary(const ExperimentConfig& cfg);
const LatticeBlock& require_lattice(const ExperimentConfig& cfg);
const SolverBlock& require_solver(const ExperimentConfig& cfg);

}  // namespace fpb::cli
