#pragma once

// Exact evolution of the lattice walk distribution and the generating
// function machinery used to cross-check the Monte Carlo engine.
//
// Time is counted in hops, lengths in lattice spacings. Lateral wave vectors
// k have M-1 components.

#include <complex>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fpb/lattice_walk.hpp"

namespace fpb {

using Complex = std::complex<double>;

/// Occupation probabilities on layers 0..layers-1 and lateral offsets
/// -half_width..half_width per axis, plus the trap mass per boundary site.
struct ProbabilityGrid {
  int dim = 0;
  int layers = 0;
  int half_width = 0;
  std::int64_t t = 0;
  std::vector<double> P;      // index layer * lateral_size() + lateral_index
  std::vector<double> traps;  // lateral_index

  int width() const { return 2 * half_width + 1; }
  std::size_t lateral_size() const;
  std::size_t lateral_index(const std::int64_t* m) const;  // m has dim-1 entries
  double node_mass() const;
  double trap_mass() const;
  /// Mass on the outermost layer and lateral rim.
  double edge_mass() const;
};

struct MomentSeries {
  int dim = 0;
  int n0 = 0;
  std::vector<double> R;
  std::vector<Vector> U;  // b-basis order: lateral axes, then normal
  std::vector<Matrix> L;
  std::vector<double> mass;  // node mass, excluding traps

  std::size_t size() const { return R.size(); }
};

struct EvolveOptions {
  int layers = 0;       // 0: sized from T
  int half_width = 0;   // 0: sized from T and g
  double edge_tol = 1e-10;
  std::vector<std::int64_t> snapshots;  // steps whose grids are kept
  std::function<void(const ProbabilityGrid&)> observer;  // called for t = 0..T
};

struct EvolveResult {
  std::vector<ProbabilityGrid> snapshots;
  MomentSeries moments;
  double max_edge_mass = 0.0;
  double max_mass_error = 0.0;
};

/// Default truncation depth and lateral half-width for a run of T steps.
int default_layers(const LatticeSpec& spec, int n0, std::int64_t T);
int default_half_width(const LatticeSpec& spec, std::int64_t T);

/// Full-grid evolution for M in {2, 3}. Throws TruncationBreach when the edge
/// mass exceeds options.edge_tol and DimensionMismatch for other M.
EvolveResult evolve(const LatticeSpec& spec, int n0, std::int64_t T, const EvolveOptions& options = {});

/// Exact moment series from a recursion on layer marginals: per layer the
/// mass and the first two lateral moments. Needs no lateral truncation and
/// works for any M.
MomentSeries evolve_moments(const LatticeSpec& spec, int n0, std::int64_t T, int layers = 0,
                            double edge_tol = 1e-10);

/// Lattice-unit moments of a single grid.
void discrete_moments(const ProbabilityGrid& grid, int n0, double& R, Vector& U, Matrix& L);
MomentSeries discrete_moments(const std::vector<ProbabilityGrid>& history, int n0);

struct LaplaceValue {
  double value = 0.0;
  double tail = 0.0;  // extrapolated contribution beyond the last sample
};

/// sum_t e^{-st} x_t with a linear extrapolation of the series beyond its
/// end. Throws SeriesTooShort for fewer than two samples or when the tail
/// exceeds rel_tol of the value.
LaplaceValue discrete_laplace(const std::vector<double>& series, double s, double rel_tol = 1e-6);

struct TransformMoments {
  double s = 0.0;
  double R = 0.0;
  Vector U;
  Matrix L;
  double K_a = 0.0;
  double varpi = 0.0;
  double max_tail = 0.0;
  std::string warning;
};

TransformMoments discrete_laplace(const MomentSeries& series, double s, double rel_tol = 1e-6);

Complex phi_internal(const LatticeSpec& spec, Complex p, const Vector& k);
Complex phi_boundary(const LatticeSpec& spec, Complex p, const Vector& k);

/// Root of Phi(varpi, k) = e^s with Re varpi > 0. Throws RootNotFound.
Complex solve_varpi(const LatticeSpec& spec, double s, const Vector& k);

/// Closed-form generating functions. Throws ConvergenceStrip for Re p < 0.
Complex generation_function(const LatticeSpec& spec, double s, Complex p, const Vector& k, int n0);
Complex boundary_generation_function(const LatticeSpec& spec, double s, const Vector& k, int n0);

struct AsymptoticWindow {
  double s_min = 1e-4;
  double s_max = 1e-2;
  bool strict = false;  // throw OutOfAsymptoticRange instead of warning
};

/// Small-s transforms of R, U and L in lattice units, built on K_a(s, n0).
TransformMoments closed_form_transforms(const LatticeSpec& spec, double s, int n0,
                                        const AsymptoticWindow& window = {});

}  // namespace fpb
