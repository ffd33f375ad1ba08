#include "fpb/validation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "fpb/error.hpp"
#include "fpb/fp_solver.hpp"
#include "fpb/lattice_walk.hpp"
#include "fpb/master_equation.hpp"
#include "fpb/singularity_analysis.hpp"
#include "fpb/tensor_geometry.hpp"

namespace fpb {

namespace {

DiffusionModel reference_model() {
  DiffusionModel m;
  m.D.resize(2, 2);
  m.D << 2.0, 1.0, 1.0, 3.0;
  m.n = Vector::Unit(2, 1);
  return validate_model(m).model;
}

DiffusionModel line_model(double D) {
  DiffusionModel m;
  m.D = Matrix::Constant(1, 1, D);
  m.v = Vector::Zero(1);
  m.n = Vector::Ones(1);
  return m;
}

WalkOptions walk_options(const ValidationConfig& cfg) {
  WalkOptions o;
  o.threads = cfg.threads;
  o.jump_mode = SurfaceJumpMode::Exact;
  return o;
}

BoundaryCoefficients mapped(const ValidationConfig& cfg, const LatticeSpec& spec, double D_M) {
  auto c = continuum_from_lattice(spec.sigma_a, spec.g_fold, spec.tau_a, D_M, spec.dim);
  c.sigma *= cfg.sigma_map_fault;
  return c;
}

// Lattice-unit b-basis vector to a model-coordinate displacement.
Vector to_model(const LatticeSpec& spec, const Vector& u) {
  return spec.zeta_to_model * spec.spacing.cwiseProduct(u);
}

// Statistical comparison: 3 standard errors, capped at 10% relative when
// that is the tighter of the two.
CheckMetric metric_stat(std::string name, double value, double expected, double err) {
  return metric_near(std::move(name), value, expected, std::min(3.0 * err, 0.1 * std::abs(expected)));
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

bool ValidationReport::pass() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
}

CheckMetric metric_near(std::string name, double value, double expected, double tolerance) {
  CheckMetric m{std::move(name), value, expected, tolerance, "+-", false};
  m.pass = std::abs(value - expected) <= tolerance;
  return m;
}

CheckMetric metric_at_most(std::string name, double value, double bound) {
  CheckMetric m{std::move(name), value, bound, 0.0, "<=", false};
  m.pass = value <= bound;
  return m;
}

CheckMetric metric_at_least(std::string name, double value, double bound) {
  CheckMetric m{std::move(name), value, bound, 0.0, ">=", false};
  m.pass = value >= bound;
  return m;
}

// 1
CheckResult check_basis_identity(const ValidationConfig& cfg) {
  CheckResult r;
  r.name = "basis identity";
  r.budget = 5;
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> nd;
  auto spd = [&](int m, double floor) {
    Matrix a(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) a(i, j) = nd(rng);
    return Matrix(a * a.transpose() + floor * Matrix::Identity(m, m));
  };
  double worst_identity = 0.0, worst_trip = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int m = 2 + trial % 5;
    DiffusionModel model;
    model.D = spd(m, 0.3);
    if (trial % 2) model.g = spd(m, 1.0);
    model.n = Vector(m);
    for (int i = 0; i < m; ++i) model.n(i) = nd(rng);
    model = validate_model(model).model;
    auto basis = build_boundary_basis(model);
    worst_identity = std::max(worst_identity, basis.identity_residual);
    Vector x(m);
    for (int i = 0; i < m; ++i) x(i) = nd(rng);
    const Vector back = from_boundary_coords(basis, to_boundary_coords(basis, x));
    worst_trip = std::max(worst_trip, (back - x).norm() / x.norm());
  }
  r.metrics.push_back(metric_at_most("max identity residual", worst_identity, 1e-10));
  r.metrics.push_back(metric_at_most("max round-trip error", worst_trip, 1e-12));
  return r;
}

// 2
CheckResult check_kernel(const ValidationConfig&) {
  CheckResult r;
  r.name = "kernel cross-check";
  r.budget = 10;
  const double D = 0.7;
  double worst = 0.0, worst_origin = 0.0;
  for (int i = 0; i < 20; ++i) {
    const double tau = std::pow(10.0, -4.0 + 4.0 * i / 19.0);
    for (int j = 0; j < 20; ++j) {
      const double ratio = j == 0 ? 0.0 : std::pow(10.0, -3.0 + 4.0 * (j - 1) / 18.0);
      const double zeta = ratio * std::sqrt(D * tau);
      const double q = kernel_K(tau, zeta, D), c = kernel_K_closed(tau, zeta, D);
      worst = std::max(worst, std::abs(q - c) / c);
    }
    worst_origin = std::max(worst_origin, std::abs(kernel_K(tau, 0.0, D) - 2.0 * std::sqrt(tau / std::numbers::pi)));
  }
  r.metrics.push_back(metric_at_most("quadrature vs erfc, max rel", worst, 1e-10));
  r.metrics.push_back(metric_at_most("K(tau,0) vs 2 sqrt(tau/pi)", worst_origin, 1e-12));

  boost::math::quadrature::exp_sinh<double> integrator;
  const double zeta0 = 0.4;
  for (double s : {0.1, 1.0, 10.0}) {
    auto f = [&](double t) { return t <= 0.0 ? 0.0 : std::exp(-s * t) * kernel_K_closed(t, zeta0, D); };
    const double numeric = integrator.integrate(f, 0.0, std::numeric_limits<double>::infinity());
    const double exact = kernel_K_laplace(s, zeta0, D);
    r.metrics.push_back(metric_at_most("Laplace rel error s=" + fmt(s), std::abs(numeric - exact) / exact, 1e-6));
  }
  return r;
}

// 3
CheckResult check_generating_functions(const ValidationConfig& cfg) {
  CheckResult r;
  r.name = "generating functions";
  r.budget = 120;

  LatticeSpec generic;
  generic.dim = 2;
  generic.tau_a = 1.0;
  generic.spacing = Vector::Ones(2);
  generic.eps = Vector(2);
  generic.eps << 0.05, -0.03;
  generic.eps_surface = Vector::Constant(1, 0.1);
  generic.sigma_a = 0.3;
  generic.g_fold = 4;
  generic.zeta_to_model = Matrix::Identity(2, 2);

  std::mt19937_64 rng(cfg.seed + 3);
  std::uniform_real_distribution<double> us(1e-3, 1.5), up(0.0, 2.0), ui(-2.0, 2.0), uk(-3.0, 3.0);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const int n0 = i % 4;
    const double s = us(rng);
    const Complex p(up(rng), ui(rng));
    const Vector k = Vector::Constant(1, uk(rng));
    const Complex G = generation_function(generic, s, p, k, n0);
    const Complex gb = boundary_generation_function(generic, s, k, n0);
    const Complex Phi = phi_internal(generic, p, k), phi = phi_boundary(generic, p, k);
    const Complex lhs = (std::exp(s) - Phi) * G;
    const Complex rhs = std::exp(s) - std::exp(p * double(n0)) * (Phi - phi) * gb;
    worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
  }
  r.metrics.push_back(metric_at_most("functional equation residual", worst, 1e-10));

  // weak absorption, surface drift only, so the small-s forms apply. The
  // surface terms carry g-1 where the walk has g, so g is large; g*eps
  // stays small or the squared surface drift swamps L_11.
  LatticeSpec spec = generic;
  spec.eps = Vector::Zero(2);
  spec.eps_surface = Vector::Constant(1, 0.005);
  spec.sigma_a = 2e-4;
  spec.g_fold = 40;
  const char* names[] = {"R", "U_1", "U_M", "L_11", "L_MM"};
  for (int n0 : {0, 2}) {
    auto series = evolve_moments(spec, n0, 100000);
    for (double s : {1e-4, 1e-3, 1e-2}) {
      auto exact = discrete_laplace(series, s, 1e-3);
      auto cf = closed_form_transforms(spec, s, n0);
      const double e[] = {exact.R, exact.U(0), exact.U(1), exact.L(0, 0), exact.L(1, 1)};
      const double c[] = {cf.R, cf.U(0), cf.U(1), cf.L(0, 0), cf.L(1, 1)};
      for (int q = 0; q < 5; ++q) {
        r.metrics.push_back(metric_at_most(std::string(names[q]) + " rel error n0=" + std::to_string(n0) +
                                               " s=" + fmt(s),
                                           std::abs(c[q] - e[q]) / std::abs(e[q]), 0.05));
      }
    }
  }
  return r;
}

// 4
CheckResult check_walk_vs_exact(const ValidationConfig& cfg) {
  CheckResult r;
  r.name = "walk vs exact evolution";
  r.budget = 60;
  auto model = reference_model();
  auto basis = build_boundary_basis(model);
  Vector v(2), vs(2);
  v << 0.5, 0.3;
  vs << 1.0, 0.0;
  auto spec = make_lattice(basis, v, vs, 0.0, 0.0, 1e-3);
  spec.sigma_a = 0.1;
  spec.g_fold = 10;

  const int n0 = 2;
  const std::vector<std::int64_t> cps = {50, 100, 200};
  auto exact = evolve_moments(spec, n0, cps.back());
  auto mc = simulate_moments(spec, n0, cps, cfg.walkers, cfg.seed + 4, walk_options(cfg));
  for (std::size_t c = 0; c < cps.size(); ++c) {
    const auto t = static_cast<std::size_t>(cps[c]);
    const auto& e = mc[c];
    const std::string at = " t=" + std::to_string(cps[c]);
    r.metrics.push_back(metric_near("R" + at, e.R, exact.R[t], 3.0 * e.R_err));
    for (int i = 0; i < 2; ++i) {
      r.metrics.push_back(
          metric_near("U_" + std::to_string(i + 1) + at, e.U_lattice(i), exact.U[t](i), 3.0 * e.U_lattice_err(i)));
    }
    for (int i = 0; i < 2; ++i) {
      for (int j = i; j < 2; ++j) {
        r.metrics.push_back(metric_near("L_" + std::to_string(i + 1) + std::to_string(j + 1) + at,
                                        e.L_lattice(i, j), exact.L[t](i, j), 3.0 * e.L_lattice_err(i, j)));
      }
    }
  }
  return r;
}

// 5
CheckResult check_sqrt_scaling(const ValidationConfig&) {
  CheckResult r;
  r.name = "sqrt(tau) boundary scaling";
  r.budget = 120;
  auto model = reference_model();
  model.v = Vector(2);
  model.v << 0.0, 0.1;
  auto basis = build_boundary_basis(model);
  auto spec = make_lattice(basis, model.v, Vector(), 0.3, 0.05, 1e-4);

  const std::int64_t T = 2000;
  std::vector<std::int64_t> steps;
  for (int k = 0; k < 10; ++k) steps.push_back(std::llround(200.0 * std::pow(10.0, k / 9.0)));
  auto fit_for = [&](int n0) {
    auto series = evolve_moments(spec, n0, T);
    std::vector<ScalingSample> samples;
    for (auto t : steps) {
      const double u = to_model(spec, series.U[static_cast<std::size_t>(t)])(1);
      samples.push_back({t * spec.tau_a, u, 0.0});
    }
    return fit_tau_scaling(samples);
  };
  r.metrics.push_back(metric_near("boundary-start exponent", fit_for(0).exponent, 0.5, 0.05));
  r.metrics.push_back(metric_near("bulk-start exponent", fit_for(400).exponent, 1.0, 0.1));
  return r;
}

// 6
CheckResult check_singular_moments(const ValidationConfig& cfg) {
  CheckResult r;
  r.name = "singular moment amplitudes";
  r.budget = 300;
  auto model = reference_model();
  auto basis = build_boundary_basis(model);
  // g = 200, l = 0.05. The moment run keeps sigma small so the higher
  // order terms stay well under the walker noise; with so little absorption
  // R is taken from a second run with sigma = 3, 4x the walkers.
  const double l = 0.05, g = 200;
  const double tau_a = l * l / (g * g * basis.normal_D);
  const std::vector<std::int64_t> cps = {400, 800, 1600, 3200};
  const double a1 = make_lattice(basis, Vector(), Vector(), 0.0, l, tau_a).spacing(0);

  for (double sigma : {0.3, 3.0}) {
    auto spec = make_lattice(basis, Vector(), Vector(), sigma, l, tau_a);
    auto coeffs = mapped(cfg, spec, basis.normal_D);
    const std::string tag = " sigma=" + fmt(sigma);
    r.metrics.push_back(metric_near("mapped sigma" + tag, coeffs.sigma, sigma, 1e-9));
    r.metrics.push_back(metric_near("mapped l" + tag, coeffs.l_upsilon, l, 1e-9));
    const bool absorbing = sigma > 1.0;
    const std::size_t walkers = absorbing ? 4 * cfg.walkers : cfg.walkers;
    auto mc = simulate_moments(spec, 0, cps, walkers, cfg.seed + (absorbing ? 16 : 6), walk_options(cfg));
    for (std::size_t c = 0; c < cps.size(); ++c) {
      const auto& e = mc[c];
      const double tau = cps[c] * tau_a;
      auto sm = singular_moments(model, basis, coeffs, tau, 0.0);
      const std::string at = " t=" + std::to_string(cps[c]) + tag;
      if (absorbing) {
        r.metrics.push_back(metric_stat("R" + at, e.R, sm.R, e.R_err));
        continue;
      }
      // no bulk drift: the whole first moment is singular
      r.metrics.push_back(metric_stat("U^1" + at, e.U(0), sm.U(0), e.U_err(0)));
      r.metrics.push_back(metric_stat("U^2" + at, e.U(1), sm.U(1), e.U_err(1)));
      const double lb = e.L_lattice(0, 0) * a1 * a1 - basis.eigenvalues(0) * tau;
      r.metrics.push_back(metric_stat("L^11 (b-basis)" + at, lb, sm.L_b(0, 0), e.L_lattice_err(0, 0) * a1 * a1));
    }
  }
  return r;
}

// 7
CheckResult check_pde_oracles(const ValidationConfig&) {
  CheckResult r;
  r.name = "PDE conservation and oracles";
  r.budget = 60;
  double drift = 0.0;

  {
    const double D = 1.0, v = 2.0, depth = 4.0, T = 8.0;
    std::vector<double> errors;
    for (double dz : {0.02, 0.01}) {
      auto g = make_grid(1, depth, dz);
      BoundarySpec wall;
      DiffusionModel m = line_model(D);
      m.v(0) = -v;
      auto res = solve(m, wall, g, Vector::Constant(1, 1.0), T);
      drift = std::max(drift, res.max_mass_error);
      const Field& f = res.snapshots.back();
      const double norm = (D / v) * (1.0 - std::exp(-v * depth / D));
      double num = 0.0, den = 0.0;
      for (int i = 0; i < g.nz; ++i) {
        const double a = g.z_center(i) - 0.5 * dz, b = a + dz;
        const double exact = (D / v) * (std::exp(-v * a / D) - std::exp(-v * b / D)) / dz / norm;
        num += std::pow(f.G[i] - exact, 2);
        den += exact * exact;
      }
      errors.push_back(std::sqrt(num / den));
    }
    r.metrics.push_back(metric_at_most("stationary profile L2, refined", errors[1], 0.01));
    r.metrics.push_back(metric_at_most("refinement ratio", errors[1] / errors[0], 1.0));
  }

  {
    auto m = reference_model();
    const double h = 0.025, T = 0.03, c = 2.5;
    auto g = make_grid(2, 5.0, h, 5.0, h);
    Vector r0(2);
    r0 << c, c;
    auto res = solve(m, BoundarySpec{}, g, r0, T);
    drift = std::max(drift, res.max_mass_error);
    const Field& f = res.snapshots.back();
    double vxx = 0, vzz = 0, vxz = 0;
    for (int i = 0; i < g.nz; ++i)
      for (int j = 0; j < g.nx; ++j) {
        const double p = f.G[static_cast<std::size_t>(i) * g.nx + j] * g.cell_volume();
        const double x = g.x_center(j) - c, z = g.z_center(i) - c;
        vxx += p * x * x;
        vzz += p * z * z;
        vxz += p * x * z;
      }
    // the initial spline adds h^2 / 4 per axis
    const double spline = 0.25 * h * h;
    r.metrics.push_back(metric_at_most("Gaussian var_xx rel error", std::abs(vxx - spline - 4 * T) / (4 * T), 0.01));
    r.metrics.push_back(metric_at_most("Gaussian var_zz rel error", std::abs(vzz - spline - 6 * T) / (6 * T), 0.01));
    r.metrics.push_back(metric_at_most("Gaussian cov_xz rel error", std::abs(vxz - 2 * T) / (2 * T), 0.01));
  }

  {
    auto m = reference_model();
    BoundaryCoefficients bc;
    bc.sigma = 1.0;
    bc.l_upsilon = 0.2;
    bc.v_surface = Vector::Unit(2, 0);
    auto g = make_grid(2, 2.0, 0.04, 2.0, 0.04);
    Vector r0(2);
    r0 << 1.0, 0.2;
    auto res = solve(m, make_boundary_spec(m, bc), g, r0, 0.1);
    drift = std::max(drift, res.max_mass_error);
  }
  r.metrics.push_back(metric_at_most("max mass drift", drift, 1e-10));
  return r;
}

// 8
CheckResult check_pde_vs_walk(const ValidationConfig& cfg) {
  CheckResult r;
  r.name = "PDE vs walk boundary condition";
  r.budget = 600;
  const double T = 0.1;
  auto sweep = [&](double tau_a) {
    std::vector<std::int64_t> cps;
    for (int k = 1; k <= 10; ++k) cps.push_back(std::llround(T * k / 10.0 / tau_a));
    return cps;
  };
  auto times = [](const std::vector<std::int64_t>& cps, double tau_a) {
    SolveOptions o;
    for (auto c : cps) o.times.push_back(c * tau_a);
    return o;
  };

  {
    // Robin wall in 1D, walked on an isotropic 2D lattice
    DiffusionModel iso;
    iso.D = Matrix::Identity(2, 2);
    iso.n = Vector::Unit(2, 1);
    iso = validate_model(iso).model;
    auto basis = build_boundary_basis(iso);
    const double tau_a = 1e-5;
    const int n0 = 16;
    auto spec = make_lattice(basis, Vector(), Vector(), 1.0, 0.0, tau_a);
    auto cps = sweep(tau_a);
    auto mc = simulate_moments(spec, n0, cps, cfg.walkers, cfg.seed + 8, walk_options(cfg));
    BoundarySpec wall;
    wall.sigma = mapped(cfg, spec, 1.0).sigma;
    const double z0 = n0 * spec.spacing(1);
    auto g = make_grid(1, 1.0 + 8.0 * std::sqrt(T), 0.005);
    auto res = solve(line_model(1.0), wall, g, Vector::Constant(1, z0), T, times(cps, tau_a));
    for (std::size_t k = 0; k < cps.size(); ++k) {
      r.metrics.push_back(metric_near("1D R tau=" + fmt(cps[k] * tau_a), res.snapshots[k].absorbed_mass(), mc[k].R,
                                      3.0 * mc[k].R_err));
    }
  }

  {
    auto model = reference_model();
    auto basis = build_boundary_basis(model);
    const double tau_a = 2.5e-6;
    const int n0 = 16;
    auto spec = make_lattice(basis, Vector(), Vector(), 1.0, 0.05, tau_a);
    auto cps = sweep(tau_a);
    auto mc = simulate_moments(spec, n0, cps, cfg.walkers, cfg.seed + 9, walk_options(cfg));
    auto coeffs = mapped(cfg, spec, basis.normal_D);
    const Vector start = to_model(spec, Vector::Unit(2, 1) * n0);
    const double W = 12.0 * std::sqrt(2.0 * T) + 1.0, depth = 1.0 + 8.0 * std::sqrt(3.0 * T);
    auto g = make_grid(2, depth, 0.02, W, 0.02);
    Vector r0(2);
    r0 << 0.5 * W + start(0), start(1);
    auto res = solve(model, make_boundary_spec(model, coeffs), g, r0, T, times(cps, tau_a));
    for (std::size_t k = 0; k < cps.size(); ++k) {
      const std::string at = " tau=" + fmt(cps[k] * tau_a);
      const Field& f = res.snapshots[k];
      r.metrics.push_back(metric_near("2D R" + at, f.absorbed_mass(), mc[k].R, 3.0 * mc[k].R_err));
      r.metrics.push_back(
          metric_near("2D L^11" + at, lateral_second_moment(f, r0(0)), mc[k].L(0, 0), 3.0 * mc[k].L_err(0, 0)));
    }
  }
  return r;
}

// 9
CheckResult check_backward_residual(const ValidationConfig&) {
  CheckResult r;
  r.name = "backward boundary residual";
  r.budget = 300;
  {
    DiffusionModel m = line_model(1.0);
    m.v(0) = -0.5;
    BackwardProbe probe;
    probe.test = [](double, double z) { return std::exp(-0.5 * (z - 0.8) * (z - 0.8) / 0.1); };
    probe.tau = 0.1;
    probe.dtau = 0.01;
    BoundarySpec wall;
    wall.sigma = 2.0;
    auto study = backward_convergence(m, wall, 1, 3.0, 0.0, probe, {0.08, 0.04, 0.02});
    r.metrics.push_back(metric_at_least("1D bulk order", study.bulk_order, 1.0));
    r.metrics.push_back(metric_at_least("1D boundary order", study.boundary_order, 1.0));
  }
  {
    DiffusionModel m;
    m.D.resize(2, 2);
    m.D << 1.0, 0.3, 0.3, 0.8;
    m.v.resize(2);
    m.v << 0.2, -0.3;
    m.n = Vector::Unit(2, 1);
    m = validate_model(m).model;
    const double W = 1.6;
    BackwardProbe probe;
    probe.test = [W](double x, double z) {
      return (1.0 + 0.5 * std::cos(2 * std::numbers::pi * x / W)) * std::exp(-0.5 * (z - 0.8) * (z - 0.8) / 0.1);
    };
    probe.tau = 0.2;
    probe.dtau = 0.02;
    BoundaryCoefficients bc;
    bc.sigma = 1.0;
    bc.l_upsilon = 0.2;
    bc.v_surface = Vector::Unit(2, 0) * 0.5;
    auto study = backward_convergence(m, make_boundary_spec(m, bc), 2, 1.6, W, probe, {0.16, 0.08, 0.04}, 2);
    r.metrics.push_back(metric_at_least("2D bulk order", study.bulk_order, 1.0));
    r.metrics.push_back(metric_at_least("2D boundary order", study.boundary_order, 1.0));
  }
  return r;
}

ValidationReport run_validation(const ValidationConfig& cfg) {
  using Check = std::function<CheckResult(const ValidationConfig&)>;
  const std::vector<Check> all = {check_basis_identity,  check_kernel,           check_generating_functions,
                                  check_walk_vs_exact,   check_sqrt_scaling,     check_singular_moments,
                                  check_pde_oracles,     check_pde_vs_walk,      check_backward_residual};
  ValidationReport report;
  report.seed = cfg.seed;
  const auto start = std::chrono::steady_clock::now();
  for (int id = 1; id <= static_cast<int>(all.size()); ++id) {
    if (!cfg.only.empty() && std::find(cfg.only.begin(), cfg.only.end(), id) == cfg.only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    CheckResult res;
    try {
      res = all[id - 1](cfg);
      res.pass = !res.metrics.empty() &&
                 std::all_of(res.metrics.begin(), res.metrics.end(), [](const auto& m) { return m.pass; });
    } catch (const std::exception& e) {
      res.pass = false;
      res.error = e.what();
    }
    res.id = id;
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.checks.push_back(std::move(res));
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::string format_table(const ValidationReport& report) {
  std::ostringstream out;
  char line[256];
  for (const auto& c : report.checks) {
    std::snprintf(line, sizeof line, "[%d] %-34s %s  %.1fs\n", c.id, c.name.c_str(), c.pass ? "PASS" : "FAIL",
                  c.seconds);
    out << line;
    if (!c.error.empty()) out << "    error: " << c.error << "\n";
    for (const auto& m : c.metrics) {
      if (m.rule == "+-") {
        std::snprintf(line, sizeof line, "    %-4s %-36s %-14.6g expected %.6g +- %.3g\n", m.pass ? "ok" : "FAIL",
                      m.name.c_str(), m.value, m.expected, m.tolerance);
      } else {
        std::snprintf(line, sizeof line, "    %-4s %-36s %-14.6g %s %.3g\n", m.pass ? "ok" : "FAIL", m.name.c_str(),
                      m.value, m.rule.c_str(), m.expected);
      }
      out << line;
    }
  }
  std::snprintf(line, sizeof line, "overall %s  (seed %llu, %.1fs)\n", report.pass() ? "PASS" : "FAIL",
                static_cast<unsigned long long>(report.seed), report.seconds);
  out << line;
  return out.str();
}

}  // namespace fpb
