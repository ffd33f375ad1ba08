#pragma once

// Explicit finite-volume forward Fokker-Planck solver on the half-space
// x_M > 0 with the absorbing / surface-transport wall condition, and a
// residual check of the backward boundary condition.
//
// Cells are indexed z * nx + x with the normal axis z last. The lateral axis
// (2D only) is periodic, the far normal face is reflecting.

#include <cstdint>
#include <functional>
#include <vector>

#include "fpb/singularity_analysis.hpp"
#include "fpb/tensor_geometry.hpp"

namespace fpb {

struct FpGrid {
  int dim = 1;      // 1 or 2
  int nz = 0;       // cells along the normal
  int nx = 1;       // lateral cells, 1 in 1D
  double dz = 0.0;
  double dx = 1.0;  // lateral cell size; the wall face area in 2D

  std::size_t size() const { return static_cast<std::size_t>(nz) * nx; }
  double cell_volume() const { return dim == 2 ? dz * dx : dz; }
  double face_area() const { return dim == 2 ? dx : 1.0; }
  double z_center(int i) const { return (i + 0.5) * dz; }
  double x_center(int j) const { return (j + 0.5) * dx; }
  double lateral_extent() const { return nx * dx; }
};

FpGrid make_grid(int dim, double depth, double dz, double width = 0.0, double dx = 0.0);

/// Wall coefficients in grid coordinates.
struct BoundarySpec {
  double sigma = 0.0;
  double l_upsilon = 0.0;
  double surface_D = 0.0;  // the surface tensor restricted to the lateral axis
  double v_surface = 0.0;  // lateral surface drift
};

/// Requires the wall normal along the last axis and a Euclidean metric.
BoundarySpec make_boundary_spec(const DiffusionModel& model, const BoundaryCoefficients& coeffs);

struct Field {
  FpGrid grid;
  std::vector<double> G;         // cell averages
  std::vector<double> absorbed;  // per wall face, mass per face area
  double t = 0.0;

  double bulk_mass() const;
  double absorbed_mass() const;
  double total_mass() const { return bulk_mass() + absorbed_mass(); }
};

struct FaceFlux {
  std::vector<double> normal;   // (nz + 1) * nx; face i sits below cell i
  std::vector<double> lateral;  // nz * nx; face j sits left of cell j
};

/// Face fluxes J = -div(D G) + v G: central diffusion, upwind drift. The
/// mixed-derivative part is carried on the lateral faces. The wall faces carry
/// -sigma G + div_s(l D_s grad_s G - l v_s G) with the wall value of G taken from the first cell;
/// the far face carries zero.
FaceFlux flux(const Field& field, const DiffusionModel& model, const BoundarySpec& bspec);

/// Largest stable explicit step.
double stable_dt(const FpGrid& grid, const DiffusionModel& model, const BoundarySpec& bspec);

/// One explicit step. Throws UnstableStep above stable_dt and NegativeDensity
/// when min G < -negative_tol * max G.
void step(Field& field, const DiffusionModel& model, const BoundarySpec& bspec, double dt,
          double negative_tol = 1e-6);

enum class SourceShape { Spread, Cell };

/// Unit mass at r0 = (x, z) in 2D or (z) in 1D. Spread uses the 3-cell
/// quadratic spline per axis, mirrored at the wall; Cell puts everything into
/// the containing cell.
Field point_source(const FpGrid& grid, const Vector& r0, SourceShape shape = SourceShape::Spread);

struct Diagnostic {
  double t = 0.0;
  double bulk = 0.0;
  double absorbed = 0.0;
  double mass_error = 0.0;  // bulk + absorbed - 1
};

struct SolveOptions {
  std::vector<double> times;  // snapshot times, sorted; T is always kept
  double dt = 0.0;            // 0: 0.9 of stable_dt
  SourceShape source = SourceShape::Spread;
  double negative_tol = 1e-6;
  int ledger_every = 0;  // steps between diagnostics rows, 0: snapshots only
};

struct SolveResult {
  std::vector<Field> snapshots;
  std::vector<Diagnostic> ledger;
  double max_mass_error = 0.0;
  std::int64_t steps = 0;
};

SolveResult solve(const DiffusionModel& model, const BoundarySpec& bspec, const FpGrid& grid, const Vector& r0,
                  double T, const SolveOptions& options = {});

/// Second lateral moment sum G (x - x0)^2 / 2 dV and the mean normal offset
/// over the surviving mass only, like the walker estimates. 1D fields give
/// zero lateral moment.
double lateral_second_moment(const Field& field, double x0);
double normal_first_moment(const Field& field, double z0);

// Backward check. u(r0, tau) = int f(r) G(r, tau | r0) dr is computed by one
// forward solve per normal start offset z0_j = dz/2 + j h; lateral neighbours
// come from shifting f, since the problem is invariant under lateral shifts.

struct BackwardProbe {
  std::function<double(double x, double z)> test;  // f, periodic in x
  double tau = 0.0;
  double dtau = 0.0;  // half-width of the central time difference
  double h = 0.0;     // start-point spacing, a multiple of the cell sizes
  int points = 5;     // normal start points
};

struct ResidualNorms {
  double h = 0.0;
  double bulk_max = 0.0;
  double bulk_l2 = 0.0;
  double boundary_max = 0.0;
  double boundary_l2 = 0.0;
  double scale = 0.0;  // max |u| over the probe, for context
};

/// One run per normal start point, in order, each holding snapshots at
/// tau - dtau, tau and tau + dtau. Throws InsufficientResolution for fewer
/// than 3 runs or when h is not a multiple of the cells.
ResidualNorms backward_residual(const std::vector<SolveResult>& runs, const DiffusionModel& model,
                                const BoundarySpec& bspec, const BackwardProbe& probe);

struct ConvergenceStudy {
  std::vector<ResidualNorms> levels;
  double bulk_order = 0.0;      // worst observed order between consecutive levels
  double boundary_order = 0.0;
};

/// Runs backward_residual for each h in hs with cells of size h / cells_per_h.
ConvergenceStudy backward_convergence(const DiffusionModel& model, const BoundarySpec& bspec, int dim,
                                      double depth, double width, BackwardProbe probe,
                                      const std::vector<double>& hs, int cells_per_h = 4);

}  // namespace fpb
