#include "fpb/fp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fpb/error.hpp"

namespace fpb {

FpGrid make_grid(int dim, double depth, double dz, double width, double dx) {
  if (dim != 1 && dim != 2) throw Error(ErrorCode::DimensionMismatch, "the solver handles 1D and 2D only");
  if (!(dz > 0.0) || !(depth > 0.0)) throw Error(ErrorCode::DomainError, "depth and dz must be positive");
  FpGrid g;
  g.dim = dim;
  g.dz = dz;
  g.nz = static_cast<int>(std::lround(depth / dz));
  if (dim == 2) {
    if (!(dx > 0.0) || !(width > 0.0)) throw Error(ErrorCode::DomainError, "width and dx must be positive");
    g.dx = dx;
    g.nx = static_cast<int>(std::lround(width / dx));
  }
  if (g.nz < 3 || g.nx < (dim == 2 ? 3 : 1)) throw Error(ErrorCode::InsufficientResolution, "grid too small");
  return g;
}

namespace {

void check_model(const DiffusionModel& model, int dim) {
  if (model.dim() != dim) throw Error(ErrorCode::DimensionMismatch, "model and grid dimensions differ");
}

double vz_of(const DiffusionModel& m) { return m.v.size() ? m.v(m.dim() - 1) : 0.0; }
double vx_of(const DiffusionModel& m) { return m.v.size() && m.dim() == 2 ? m.v(0) : 0.0; }

// Absorption applied to the first cell. Matching -sigma G_w to the diffusive
// flux over the half cell gives G_w = G_0 / (1 + sigma dz / (2 D_zz)).
double wall_rate(const FpGrid& g, const DiffusionModel& m, const BoundarySpec& b) {
  return b.sigma / (1.0 + b.sigma * g.dz / (2.0 * m.D(g.dim - 1, g.dim - 1)));
}

}  // namespace

BoundarySpec make_boundary_spec(const DiffusionModel& model, const BoundaryCoefficients& coeffs) {
  const int m = model.dim();
  if (m < 1 || m > 2) throw Error(ErrorCode::DimensionMismatch, "the solver handles 1D and 2D only");
  if (coeffs.sigma < 0.0 || coeffs.l_upsilon < 0.0) throw Error(ErrorCode::DomainError, "negative wall coefficient");
  BoundarySpec b;
  b.sigma = coeffs.sigma;
  b.l_upsilon = coeffs.l_upsilon;
  if (m == 1) {
    if (!(model.D(0, 0) > 0.0)) throw Error(ErrorCode::NotPositiveDefinite, "D must be positive");
    if (model.n.size() == 1 && !(model.n(0) > 0.0)) throw Error(ErrorCode::DomainError, "the wall normal must be +e_M");
  } else {
    const auto checked = validate_model(model).model;
    if (!checked.g.isIdentity(1e-12)) throw Error(ErrorCode::DomainError, "the solver needs a Euclidean metric");
    const Vector n = checked.n.normalized();
    if (std::abs(n(m - 1) - 1.0) > 1e-12) throw Error(ErrorCode::DomainError, "the wall normal must be +e_M");
    b.surface_D = surface_diffusion_tensor(checked)(0, 0);
    if (coeffs.v_surface.size() == 2) b.v_surface = coeffs.v_surface(0);
  }
  return b;
}

double Field::bulk_mass() const {
  double s = 0.0;
  for (double g : G) s += g;
  return s * grid.cell_volume();
}

double Field::absorbed_mass() const {
  double s = 0.0;
  for (double a : absorbed) s += a;
  return s * grid.face_area();
}

namespace {

void flux_into(const Field& field, const DiffusionModel& model, const BoundarySpec& bspec, FaceFlux& f,
               std::vector<double>& surf) {
  const FpGrid& g = field.grid;
  check_model(model, g.dim);
  const int nz = g.nz, nx = g.nx;
  const bool two = g.dim == 2;
  const double dzz = model.D(g.dim - 1, g.dim - 1);
  const double dxz = two ? model.D(0, 1) : 0.0;
  const double dxx = two ? model.D(0, 0) : 0.0;
  const double vz = vz_of(model), vx = vx_of(model);
  const double* G = field.G.data();

  f.normal.assign(static_cast<std::size_t>(nz + 1) * nx, 0.0);
  f.lateral.assign(static_cast<std::size_t>(nz) * nx, 0.0);

  for (int i = 1; i < nz; ++i) {
    const double* lo = G + static_cast<std::size_t>(i - 1) * nx;
    const double* hi = lo + nx;
    double* out = &f.normal[static_cast<std::size_t>(i) * nx];
    for (int j = 0; j < nx; ++j) out[j] = -dzz * (hi[j] - lo[j]) / g.dz + vz * (vz > 0.0 ? lo[j] : hi[j]);
    // Mixed derivative: backward lateral difference of the lower cell for
    // dxz > 0, of the upper cell for dxz < 0. Together with the lateral faces
    // below this gives a monotone stencil when D is diagonally dominant.
    if (two && dxz != 0.0) {
      const double* src = dxz > 0.0 ? lo : hi;
      out[0] -= dxz * (src[0] - src[nx - 1]) / g.dx;
      for (int j = 1; j < nx; ++j) out[j] -= dxz * (src[j] - src[j - 1]) / g.dx;
    }
  }

  // wall
  surf.assign(nx + 1, 0.0);
  if (two && bspec.l_upsilon > 0.0) {
    for (int j = 0; j <= nx; ++j) {
      const double left = G[(j + nx - 1) % nx], right = G[j % nx];
      surf[j] = bspec.l_upsilon *
                (bspec.surface_D * (right - left) / g.dx - bspec.v_surface * (bspec.v_surface > 0.0 ? left : right));
    }
  }
  const double sigma = wall_rate(g, model, bspec);
  for (int j = 0; j < nx; ++j) f.normal[j] = -sigma * G[j] + (surf[j + 1] - surf[j]) / g.dx;

  if (two) {
    // forward normal difference of the right cell for dxz > 0, backward for
    // dxz < 0; dropped where it would leave the domain
    const bool pos = dxz > 0.0;
    for (int i = 0; i < nz; ++i) {
      const double* row = G + static_cast<std::size_t>(i) * nx;
      const double* other = pos ? (i + 1 < nz ? row + nx : nullptr) : (i > 0 ? row - nx : nullptr);
      double* out = &f.lateral[static_cast<std::size_t>(i) * nx];
      for (int j = 0; j < nx; ++j) {
        const double left = row[j == 0 ? nx - 1 : j - 1], right = row[j];
        double J = -dxx * (right - left) / g.dx + vx * (vx > 0.0 ? left : right);
        if (dxz != 0.0 && other) J -= dxz * (pos ? other[j] - right : right - other[j]) / g.dz;
        out[j] = J;
      }
    }
  }
}

}  // namespace

FaceFlux flux(const Field& field, const DiffusionModel& model, const BoundarySpec& bspec) {
  FaceFlux f;
  std::vector<double> surf;
  flux_into(field, model, bspec, f, surf);
  return f;
}

double stable_dt(const FpGrid& g, const DiffusionModel& model, const BoundarySpec& bspec) {
  check_model(model, g.dim);
  const double dzz = model.D(g.dim - 1, g.dim - 1);
  double rate = 2.0 * dzz / (g.dz * g.dz) + std::abs(vz_of(model)) / g.dz + bspec.sigma / g.dz;
  if (g.dim == 2) {
    rate += 2.0 * model.D(0, 0) / (g.dx * g.dx) + 2.0 * std::abs(model.D(0, 1)) / (g.dx * g.dz) +
            std::abs(vx_of(model)) / g.dx;
    rate += bspec.l_upsilon * (2.0 * bspec.surface_D / (g.dx * g.dx) + std::abs(bspec.v_surface) / g.dx) / g.dz;
  }
  return 0.4 / rate;
}

void step(Field& field, const DiffusionModel& model, const BoundarySpec& bspec, double dt, double negative_tol) {
  const FpGrid& g = field.grid;
  const double bound = stable_dt(g, model, bspec);
  if (!(dt > 0.0) || dt > bound * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "dt=" << dt << " exceeds the stable bound " << bound;
    throw Error(ErrorCode::UnstableStep, msg.str());
  }
  thread_local FaceFlux f;
  thread_local std::vector<double> surf;
  flux_into(field, model, bspec, f, surf);
  const int nz = g.nz, nx = g.nx;
  const double sigma = wall_rate(g, model, bspec);
  for (int j = 0; j < nx; ++j) field.absorbed[j] += sigma * field.G[j] * dt;
  double gmax = 0.0, gmin = 0.0;
  for (int i = 0; i < nz; ++i) {
    for (int j = 0; j < nx; ++j) {
      const std::size_t c = static_cast<std::size_t>(i) * nx + j;
      double div = (f.normal[c + nx] - f.normal[c]) / g.dz;
      if (g.dim == 2) div += (f.lateral[j + 1 < nx ? c + 1 : c + 1 - nx] - f.lateral[c]) / g.dx;
      field.G[c] -= dt * div;
      gmax = std::max(gmax, field.G[c]);
      gmin = std::min(gmin, field.G[c]);
    }
  }
  field.t += dt;
  if (gmin < -negative_tol * gmax) {
    std::ostringstream msg;
    msg << "density " << gmin << " against max " << gmax << " at t=" << field.t;
    throw Error(ErrorCode::NegativeDensity, msg.str());
  }
}

namespace {

// Weights of the quadratic spline on cells c-1, c, c+1 for offset d in
// [-1/2, 1/2] from the centre of cell c.
void spline_weights(double d, double w[3]) {
  w[0] = 0.5 * (0.5 - d) * (0.5 - d);
  w[1] = 0.75 - d * d;
  w[2] = 0.5 * (0.5 + d) * (0.5 + d);
}

}  // namespace

Field point_source(const FpGrid& grid, const Vector& r0, SourceShape shape) {
  if (r0.size() != grid.dim) throw Error(ErrorCode::DimensionMismatch, "r0 has wrong length");
  const double z = r0(grid.dim - 1);
  if (!(z >= 0.0) || z >= grid.nz * grid.dz) throw Error(ErrorCode::DomainError, "source outside the domain");
  Field f;
  f.grid = grid;
  f.G.assign(grid.size(), 0.0);
  f.absorbed.assign(grid.nx, 0.0);

  const int ci = std::min(grid.nz - 1, static_cast<int>(z / grid.dz));
  int cj = 0;
  double x = 0.0;
  if (grid.dim == 2) {
    const double L = grid.lateral_extent();
    x = std::fmod(std::fmod(r0(0), L) + L, L);
    cj = std::min(grid.nx - 1, static_cast<int>(x / grid.dx));
  }
  const double vol = grid.cell_volume();
  if (shape == SourceShape::Cell) {
    f.G[static_cast<std::size_t>(ci) * grid.nx + cj] = 1.0 / vol;
    return f;
  }
  double wz[3], wx[3] = {0.0, 1.0, 0.0};
  spline_weights(z / grid.dz - (ci + 0.5), wz);
  if (grid.dim == 2) spline_weights(x / grid.dx - (cj + 0.5), wx);
  for (int a = 0; a < 3; ++a) {
    int i = ci + a - 1;
    if (i < 0) i = -i - 1;  // mirror at the wall
    if (i >= grid.nz) i = 2 * grid.nz - i - 1;
    for (int b = 0; b < 3; ++b) {
      if (wx[b] == 0.0) continue;
      const int j = ((cj + b - 1) % grid.nx + grid.nx) % grid.nx;
      f.G[static_cast<std::size_t>(i) * grid.nx + j] += wz[a] * wx[b] / vol;
    }
  }
  return f;
}

SolveResult solve(const DiffusionModel& model, const BoundarySpec& bspec, const FpGrid& grid, const Vector& r0,
                  double T, const SolveOptions& options) {
  if (!(T >= 0.0)) throw Error(ErrorCode::DomainError, "T must be non-negative");
  const double bound = stable_dt(grid, model, bspec);
  const double dt_max = options.dt > 0.0 ? options.dt : 0.9 * bound;

  std::vector<double> stops;
  for (double t : options.times) {
    if (t < 0.0 || t > T) throw Error(ErrorCode::DomainError, "snapshot time outside [0, T]");
    stops.push_back(t);
  }
  stops.push_back(T);
  std::sort(stops.begin(), stops.end());
  stops.erase(std::unique(stops.begin(), stops.end()), stops.end());

  SolveResult res;
  Field field = point_source(grid, r0, options.source);
  auto audit = [&] {
    Diagnostic d;
    d.t = field.t;
    d.bulk = field.bulk_mass();
    d.absorbed = field.absorbed_mass();
    d.mass_error = d.bulk + d.absorbed - 1.0;
    res.max_mass_error = std::max(res.max_mass_error, std::abs(d.mass_error));
    res.ledger.push_back(d);
  };
  audit();
  double t0 = 0.0;
  for (double stop : stops) {
    const double span = stop - t0;
    if (span > 0.0) {
      const auto n = static_cast<std::int64_t>(std::ceil(span / dt_max * (1.0 - 1e-12)));
      const double dt = span / static_cast<double>(n);
      for (std::int64_t k = 0; k < n; ++k) {
        step(field, model, bspec, dt, options.negative_tol);
        ++res.steps;
        if (options.ledger_every > 0 && res.steps % options.ledger_every == 0) audit();
      }
      field.t = stop;
    }
    if (res.ledger.back().t != field.t) audit();
    if (stop == T || std::binary_search(options.times.begin(), options.times.end(), stop)) {
      res.snapshots.push_back(field);
    }
    t0 = stop;
  }
  return res;
}

double lateral_second_moment(const Field& field, double x0) {
  const FpGrid& g = field.grid;
  if (g.dim != 2) return 0.0;
  const double L = g.lateral_extent();
  double s = 0.0;
  for (int i = 0; i < g.nz; ++i) {
    for (int j = 0; j < g.nx; ++j) {
      double d = g.x_center(j) - x0;
      d -= L * std::round(d / L);  // nearest periodic image
      s += field.G[static_cast<std::size_t>(i) * g.nx + j] * d * d;
    }
  }
  return 0.5 * s * g.cell_volume();
}

double normal_first_moment(const Field& field, double z0) {
  const FpGrid& g = field.grid;
  double s = 0.0;
  for (int i = 0; i < g.nz; ++i) {
    double row = 0.0;
    for (int j = 0; j < g.nx; ++j) row += field.G[static_cast<std::size_t>(i) * g.nx + j];
    s += row * (g.z_center(i) - z0);
  }
  return s * g.cell_volume();
}

namespace {

bool is_multiple(double h, double d) {
  const double r = h / d;
  return std::abs(r - std::round(r)) < 1e-9 && std::round(r) >= 1.0;
}

// u at lateral start offset shift * dx from the actual source.
double functional(const Field& f, const std::function<double(double, double)>& test, int shift) {
  const FpGrid& g = f.grid;
  const double L = g.lateral_extent();
  double s = 0.0;
  for (int i = 0; i < g.nz; ++i) {
    const double z = g.z_center(i);
    for (int j = 0; j < g.nx; ++j) {
      const double p = f.G[static_cast<std::size_t>(i) * g.nx + j];
      if (p == 0.0) continue;
      double x = g.dim == 2 ? g.x_center(j) + shift * g.dx : 0.0;
      if (g.dim == 2) x = std::fmod(std::fmod(x, L) + L, L);
      s += p * test(x, z);
    }
  }
  return s * g.cell_volume();
}

const Field& snapshot_at(const SolveResult& r, double t) {
  for (const auto& f : r.snapshots) {
    if (std::abs(f.t - t) <= 1e-12 * std::max(1.0, t)) return f;
  }
  throw Error(ErrorCode::InsufficientResolution, "missing snapshot at t=" + std::to_string(t));
}

}  // namespace

ResidualNorms backward_residual(const std::vector<SolveResult>& runs, const DiffusionModel& model,
                                const BoundarySpec& bspec, const BackwardProbe& probe) {
  if (runs.size() < 3) throw Error(ErrorCode::InsufficientResolution, "need at least 3 start points");
  if (!probe.test) throw Error(ErrorCode::DomainError, "probe has no test function");
  if (!(probe.dtau > 0.0) || !(probe.tau > probe.dtau)) throw Error(ErrorCode::DomainError, "bad probe times");
  const FpGrid& g = runs.front().snapshots.front().grid;
  const int dim = g.dim;
  check_model(model, dim);
  if (!is_multiple(probe.h, g.dz) || (dim == 2 && !is_multiple(probe.h, g.dx))) {
    throw Error(ErrorCode::InsufficientResolution, "h must be a multiple of the cell sizes");
  }
  const int sx = dim == 2 ? static_cast<int>(std::lround(probe.h / g.dx)) : 0;
  const int nshift = dim == 2 ? 3 : 1;
  const std::size_t J = runs.size();
  const double h = probe.h;

  // u[j][k], k over lateral shifts -h, 0, +h; ut is the time derivative at tau
  std::vector<std::vector<double>> u(J, std::vector<double>(nshift)), ut = u;
  double scale = 0.0;
  for (std::size_t j = 0; j < J; ++j) {
    const Field& lo = snapshot_at(runs[j], probe.tau - probe.dtau);
    const Field& mid = snapshot_at(runs[j], probe.tau);
    const Field& hi = snapshot_at(runs[j], probe.tau + probe.dtau);
    for (int k = 0; k < nshift; ++k) {
      const int shift = dim == 2 ? (k - 1) * sx : 0;
      u[j][k] = functional(mid, probe.test, shift);
      ut[j][k] = (functional(hi, probe.test, shift) - functional(lo, probe.test, shift)) / (2.0 * probe.dtau);
      scale = std::max(scale, std::abs(u[j][k]));
    }
  }

  const int c = dim == 2 ? 1 : 0;
  const double dzz = model.D(dim - 1, dim - 1);
  const double dxx = dim == 2 ? model.D(0, 0) : 0.0, dxz = dim == 2 ? model.D(0, 1) : 0.0;
  const double vz = vz_of(model), vx = vx_of(model);

  ResidualNorms out;
  out.h = h;
  out.scale = scale;
  std::size_t nb = 0;
  for (std::size_t j = 1; j + 1 < J; ++j) {
    const double uz = (u[j + 1][c] - u[j - 1][c]) / (2.0 * h);
    const double uzz = (u[j + 1][c] - 2.0 * u[j][c] + u[j - 1][c]) / (h * h);
    double gen = vz * uz + dzz * uzz;
    if (dim == 2) {
      const double ux = (u[j][2] - u[j][0]) / (2.0 * h);
      const double uxx = (u[j][2] - 2.0 * u[j][1] + u[j][0]) / (h * h);
      const double uxz = (u[j + 1][2] - u[j + 1][0] - u[j - 1][2] + u[j - 1][0]) / (4.0 * h * h);
      gen += vx * ux + dxx * uxx + 2.0 * dxz * uxz;
    }
    const double r = ut[j][c] - gen;
    out.bulk_max = std::max(out.bulk_max, std::abs(r));
    out.bulk_l2 += r * r;
    ++nb;
  }
  out.bulk_l2 = nb ? std::sqrt(out.bulk_l2 / nb) : 0.0;

  // Start points sit at z0 = dz/2 + j h; extrapolate value and slope to the
  // wall with the cubic through the first four (quadratic with three).
  const int np = static_cast<int>(std::min<std::size_t>(J, 4));
  std::vector<double> lv(np), ld(np);
  for (int a = 0; a < np; ++a) {
    const double za = 0.5 * g.dz + a * h;
    double den = 1.0, val = 1.0, der = 0.0;
    for (int b = 0; b < np; ++b) {
      if (b == a) continue;
      const double zb = 0.5 * g.dz + b * h;
      den *= za - zb;
      // derivative of prod (z - zb) at z = 0
      der = der * (0.0 - zb) + val;
      val *= 0.0 - zb;
    }
    lv[a] = val / den;
    ld[a] = der / den;
  }
  double wall[3], wall_z[3];
  for (int k = 0; k < nshift; ++k) {
    wall[k] = wall_z[k] = 0.0;
    for (int a = 0; a < np; ++a) {
      wall[k] += lv[a] * u[a][k];
      wall_z[k] += ld[a] * u[a][k];
    }
  }
  double r = dzz * wall_z[c] - bspec.sigma * wall[c];
  if (dim == 2) {
    const double ux = (wall[2] - wall[0]) / (2.0 * h);
    const double uxx = (wall[2] - 2.0 * wall[1] + wall[0]) / (h * h);
    r += dxz * ux + bspec.l_upsilon * (bspec.surface_D * uxx + bspec.v_surface * ux);
  }
  out.boundary_max = std::abs(r);
  out.boundary_l2 = std::abs(r);
  return out;
}

ConvergenceStudy backward_convergence(const DiffusionModel& model, const BoundarySpec& bspec, int dim, double depth,
                                      double width, BackwardProbe probe, const std::vector<double>& hs,
                                      int cells_per_h) {
  if (hs.size() < 2) throw Error(ErrorCode::InsufficientResolution, "need at least two levels");
  ConvergenceStudy study;
  const double dtau0 = probe.dtau;
  for (double h : hs) {
    const double d = h / cells_per_h;
    const FpGrid grid = make_grid(dim, depth, d, width, d);
    probe.h = h;
    probe.dtau = dtau0 * h / hs.front();
    SolveOptions opt;
    opt.source = SourceShape::Cell;
    opt.times = {probe.tau - probe.dtau, probe.tau, probe.tau + probe.dtau};
    std::vector<SolveResult> runs;
    for (int j = 0; j < probe.points; ++j) {
      Vector r0 = Vector::Zero(dim);
      r0(dim - 1) = 0.5 * d + j * h;
      if (dim == 2) r0(0) = grid.x_center(grid.nx / 2);
      runs.push_back(solve(model, bspec, grid, r0, probe.tau + probe.dtau, opt));
    }
    study.levels.push_back(backward_residual(runs, model, bspec, probe));
  }
  study.bulk_order = study.boundary_order = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < study.levels.size(); ++i) {
    const auto& a = study.levels[i - 1];
    const auto& b = study.levels[i];
    const double ratio = std::log(a.h / b.h);
    study.bulk_order = std::min(study.bulk_order, std::log(a.bulk_max / b.bulk_max) / ratio);
    study.boundary_order = std::min(study.boundary_order, std::log(a.boundary_max / b.boundary_max) / ratio);
  }
  return study;
}

}  // namespace fpb
