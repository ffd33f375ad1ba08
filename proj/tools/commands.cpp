#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fpb/error.hpp"
#include "fpb/fp_solver.hpp"
#include "fpb/lattice_walk.hpp"
#include "fpb/master_equation.hpp"
#include "fpb/singularity_analysis.hpp"
#include "fpb/tensor_geometry.hpp"
#include "fpb/validation.hpp"

namespace fpb::cli {

using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json to_json(const Matrix& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(m.cols()));
    for (int j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(r);
  }
  return rows;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::ConfigError, "cannot write " + path.string());
  return f;
}

void write_json(const std::filesystem::path& path, const json& j) { open_out(path) << j.dump(2) << "\n"; }

std::uint64_t seed_of(const ExperimentConfig& cfg, const RunOptions& opt) {
  if (opt.seed) return *opt.seed;
  return cfg.lattice ? cfg.lattice->seed : 1;
}

BoundaryCoefficients boundary_or_reflecting(const ExperimentConfig& cfg) {
  return cfg.boundary ? *cfg.boundary : BoundaryCoefficients{};
}

LatticeSpec lattice_for(const ExperimentConfig& cfg) {
  const auto& model = require_model(cfg);
  const auto& lat = require_lattice(cfg);
  if (model.dim() < 2) throw Error(ErrorCode::ConfigError, "[model] the lattice walk needs dim >= 2");
  const auto b = boundary_or_reflecting(cfg);
  return make_lattice(build_boundary_basis(model), model.v, b.v_surface, b.sigma, b.l_upsilon, lat.tau_a);
}

std::vector<std::int64_t> checkpoints(const ExperimentConfig& cfg) {
  const auto& lat = require_lattice(cfg);
  if (cfg.tau.empty()) return {lat.steps};
  std::vector<std::int64_t> out;
  for (double t : cfg.tau) out.push_back(std::llround(t / lat.tau_a));
  return out;
}

// Header pieces for model-coordinate moment columns.
std::string moment_header(int m, const std::string& suffix) {
  std::string h = "R" + suffix;
  for (int i = 0; i < m; ++i) h += ",U_" + std::to_string(i + 1) + suffix;
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) h += ",L_" + std::to_string(i + 1) + std::to_string(j + 1) + suffix;
  return h;
}

std::string moment_row(double R, const Vector& U, const Matrix& L) {
  std::string s = num(R);
  for (int i = 0; i < U.size(); ++i) s += "," + num(U(i));
  for (int i = 0; i < L.rows(); ++i)
    for (int j = i; j < L.cols(); ++j) s += "," + num(L(i, j));
  return s;
}

void print_lattice(std::ostream& out, const LatticeSpec& spec, const DiffusionModel& model) {
  const auto c = continuum_from_lattice(spec.sigma_a, spec.g_fold, spec.tau_a, normal_diffusivity(model), spec.dim);
  out << "lattice: sigma_a = " << num(spec.sigma_a) << ", g = " << spec.g_fold << " (sigma = " << num(c.sigma)
      << ", l = " << num(c.l_upsilon) << ")\n";
}

}  // namespace

std::filesystem::path output_dir(const ExperimentConfig& cfg, const RunOptions& opt) {
  return opt.out ? *opt.out : cfg.out_dir;
}

int cmd_basis(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& out) {
  const auto& model = require_model(cfg);
  if (model.dim() < 2) throw Error(ErrorCode::ConfigError, "[model] the boundary basis needs dim >= 2");
  const auto basis = build_boundary_basis(model);
  const Vector b = boundary_singularity_vector(model);
  const Matrix surf = surface_diffusion_tensor(model);

  json j;
  j["dim"] = model.dim();
  j["b"] = to_json(b);
  j["omega"] = basis.omega;
  j["b_M"] = to_json(basis.b_M);
  j["surface_tensor"] = to_json(surf);
  j["eigenvalues"] = to_json(basis.eigenvalues);
  j["normal_D"] = basis.normal_D;
  j["frame"] = to_json(basis.frame);
  j["surface_basis"] = to_json(basis.surface_basis);
  j["identity_residual"] = basis.identity_residual;
  write_json(output_dir(cfg, opt) / "basis.json", j);

  out << "b = " << to_json(b).dump() << "\n"
      << "omega = " << num(basis.omega) << "\n"
      << "normal D = " << num(basis.normal_D) << "\n"
      << "surface tensor = " << to_json(surf).dump() << "\n"
      << "eigenvalues = " << to_json(basis.eigenvalues).dump() << "\n"
      << "identity residual = " << num(basis.identity_residual) << "\n";
  return kOk;
}

int cmd_walk(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& out) {
  const auto& model = require_model(cfg);
  const auto& lat = require_lattice(cfg);
  const auto spec = lattice_for(cfg);
  const auto cps = checkpoints(cfg);
  WalkOptions wo;
  wo.threads = opt.threads;
  wo.jump_mode = lat.jump_mode;
  const auto est = simulate_moments(spec, lat.n0, cps, lat.walkers, seed_of(cfg, opt), wo);

  const int m = spec.dim;
  auto f = open_out(output_dir(cfg, opt) / "walk.csv");
  f << "tau,steps," << moment_header(m, "") << "," << moment_header(m, "_err") << "\n";
  bool breach = false;
  for (const auto& e : est) {
    f << num(e.tau) << "," << e.steps << "," << moment_row(e.R, e.U, e.L) << ","
      << moment_row(e.R_err, e.U_err, e.L_err) << "\n";
    breach = breach || e.truncation_breach;
  }
  print_lattice(out, spec, model);
  out << "walkers = " << lat.walkers << ", checkpoints = " << cps.size() << "\n";
  if (breach) out << "warning: truncation breach flagged\n";

  // the boundary-start normal moment should grow like sqrt(tau)
  std::vector<ScalingSample> samples;
  for (const auto& e : est) {
    if (e.tau > 0.0 && e.U(m - 1) != 0.0) samples.push_back({e.tau, e.U(m - 1), e.U_err(m - 1)});
  }
  try {
    const auto fit = fit_tau_scaling(samples);
    out << "normal first moment exponent = " << num(fit.exponent) << " +- " << num(fit.exponent_err) << "\n";
  } catch (const Error& e) {
    if (e.code() != ErrorCode::InsufficientData) throw;
    out << "no exponent fit: " << e.what() << "\n";
  }
  return kOk;
}

int cmd_evolve(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& out) {
  const auto& model = require_model(cfg);
  const auto& lat = require_lattice(cfg);
  const auto spec = lattice_for(cfg);
  std::vector<std::int64_t> cps;
  if (cfg.tau.empty()) {
    for (std::int64_t t = 0; t <= lat.steps; ++t) cps.push_back(t);
  } else {
    cps = checkpoints(cfg);
  }
  std::int64_t T = cps.empty() ? 0 : cps.back();
  if (!cfg.s.empty()) {
    // the discrete transform needs the series out to a few 1/s
    const double s_min = *std::min_element(cfg.s.begin(), cfg.s.end());
    T = std::max({T, lat.steps, static_cast<std::int64_t>(std::ceil(20.0 / s_min))});
  }
  const auto series = evolve_moments(spec, lat.n0, T);

  const int m = spec.dim;
  const Matrix A = spec.zeta_to_model * spec.spacing.asDiagonal();
  auto f = open_out(output_dir(cfg, opt) / "evolve.csv");
  f << "tau,steps," << moment_header(m, "") << ",mass\n";
  for (auto t : cps) {
    const auto k = static_cast<std::size_t>(t);
    f << num(t * spec.tau_a) << "," << t << ","
      << moment_row(series.R[k], A * series.U[k], A * series.L[k] * A.transpose()) << "," << num(series.mass[k])
      << "\n";
  }
  print_lattice(out, spec, model);
  out << "exact evolution to " << T << " steps\n";

  if (!cfg.s.empty()) {
    // lattice units, b-basis, as the small-s forms are written
    auto g = open_out(output_dir(cfg, opt) / "transforms.csv");
    g << "s," << moment_header(m, "_exact") << "," << moment_header(m, "_closed") << ",tail\n";
    for (double s : cfg.s) {
      const auto ex = discrete_laplace(series, s, 1e-3);
      const auto cf = closed_form_transforms(spec, s, lat.n0);
      g << num(s) << "," << moment_row(ex.R, ex.U, ex.L) << "," << moment_row(cf.R, cf.U, cf.L) << ","
        << num(ex.max_tail) << "\n";
      if (!cf.warning.empty()) out << "warning: " << cf.warning << "\n";
    }
  }
  return kOk;
}

int cmd_kernel(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& out) {
  const auto& model = require_model(cfg);
  const double D = normal_diffusivity(model);
  if (cfg.tau.empty()) throw Error(ErrorCode::ConfigError, "missing key [sweep] tau");
  for (double t : cfg.tau)
    if (!(t > 0.0)) throw Error(ErrorCode::ConfigError, "[sweep] tau must be positive for the kernel");
  const std::vector<double> zetas = cfg.zeta.empty() ? std::vector<double>{0.0} : cfg.zeta;

  auto f = open_out(output_dir(cfg, opt) / "kernel.csv");
  f << "tau,zeta,K,K_closed\n";
  double worst = 0.0;
  for (double t : cfg.tau) {
    for (double z : zetas) {
      const double q = kernel_K(t, z, D), c = kernel_K_closed(t, z, D);
      f << num(t) << "," << num(z) << "," << num(q) << "," << num(c) << "\n";
      if (c > 0.0) worst = std::max(worst, std::abs(q - c) / c);
    }
  }
  if (!cfg.s.empty()) {
    auto g = open_out(output_dir(cfg, opt) / "kernel_laplace.csv");
    g << "s,zeta,K_hat\n";
    for (double s : cfg.s)
      for (double z : zetas) g << num(s) << "," << num(z) << "," << num(kernel_K_laplace(s, z, D)) << "\n";
  }
  out << "D_M = " << num(D) << ", max relative quadrature deviation = " << num(worst) << "\n";
  return kOk;
}

int cmd_solve(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& out) {
  const auto& model = require_model(cfg);
  const auto& sv = require_solver(cfg);
  const int dim = model.dim();
  if (dim > 2) throw Error(ErrorCode::ConfigError, "[model] the solver handles dim 1 or 2");
  if (sv.start.size() != dim) {
    throw Error(ErrorCode::ConfigError, "[solver] start needs " + std::to_string(dim) + " entries");
  }
  BoundaryCoefficients coeffs = boundary_or_reflecting(cfg);
  Vector r0 = sv.start;
  std::vector<double> times = cfg.tau;

  // walk comparison: the wall coefficients and the start come from the lattice
  LatticeSpec spec;
  const LatticeBlock* lat = nullptr;
  std::vector<std::int64_t> cps;
  if (sv.compare_walk) {
    lat = &require_lattice(cfg);
    DiffusionModel walk_model = model;
    if (dim == 1) {
      walk_model.D = Matrix::Identity(2, 2) * model.D(0, 0);
      walk_model.g = Matrix();
      walk_model.v = Vector::Unit(2, 1) * model.v(0);
      walk_model.n = Vector::Unit(2, 1);
      walk_model = validate_model(walk_model).model;
    }
    const auto basis = build_boundary_basis(walk_model);
    spec = make_lattice(basis, walk_model.v, coeffs.v_surface, coeffs.sigma, coeffs.l_upsilon, lat->tau_a);
    const auto mapped = continuum_from_lattice(spec.sigma_a, spec.g_fold, spec.tau_a, basis.normal_D, 2);
    coeffs.sigma = mapped.sigma;
    coeffs.l_upsilon = mapped.l_upsilon;
    const Vector start = spec.zeta_to_model * spec.spacing.cwiseProduct(Vector::Unit(2, 1)) * lat->n0;
    if (dim == 1) {
      r0(0) = start(1);
    } else {
      r0(0) += start(0);
      r0(1) = start(1);
    }
    if (times.empty()) times = {sv.T};
    times.erase(std::remove_if(times.begin(), times.end(), [&](double t) { return t > sv.T; }), times.end());
    for (double& t : times) {
      cps.push_back(std::llround(t / lat->tau_a));
      t = cps.back() * lat->tau_a;
    }
    out << "walk start on the lattice: r0 = " << to_json(r0).dump() << "\n";
    print_lattice(out, spec, walk_model);
  }

  const auto bspec = make_boundary_spec(model, coeffs);
  const auto grid = dim == 1 ? make_grid(1, sv.depth, sv.dz)
                             : make_grid(2, sv.depth, sv.dz, sv.width, sv.dx > 0.0 ? sv.dx : sv.dz);
  SolveOptions so;
  so.times = times;
  so.dt = sv.dt;
  so.source = sv.source;
  so.ledger_every = sv.ledger_every;
  const auto res = solve(model, bspec, grid, r0, sv.T, so);
  const auto dir = output_dir(cfg, opt);

  json ledger = json::array();
  for (const auto& d : res.ledger) {
    ledger.push_back({{"t", d.t}, {"bulk", d.bulk}, {"absorbed", d.absorbed}, {"mass_error", d.mass_error}});
  }
  json j;
  j["steps"] = res.steps;
  j["stable_dt"] = stable_dt(grid, model, bspec);
  j["max_mass_error"] = res.max_mass_error;
  j["ledger"] = ledger;
  write_json(dir / "solve_ledger.json", j);

  auto f = open_out(dir / "solve.csv");
  f << "t,bulk,absorbed,mass_error,normal_first_moment,lateral_second_moment\n";
  for (std::size_t k = 0; k < res.snapshots.size(); ++k) {
    const Field& fld = res.snapshots[k];
    f << num(fld.t) << "," << num(fld.bulk_mass()) << "," << num(fld.absorbed_mass()) << ","
      << num(fld.total_mass() - 1.0) << "," << num(normal_first_moment(fld, r0(dim - 1))) << ","
      << num(lateral_second_moment(fld, dim == 2 ? r0(0) : 0.0)) << "\n";

    char name[32];
    std::snprintf(name, sizeof name, "field_%03zu.csv", k);
    auto g = open_out(dir / name);
    g << "z";
    for (int jx = 0; jx < grid.nx; ++jx) g << "," << (dim == 2 ? num(grid.x_center(jx)) : std::string("G"));
    g << "\n";
    for (int i = 0; i < grid.nz; ++i) {
      g << num(grid.z_center(i));
      for (int jx = 0; jx < grid.nx; ++jx) g << "," << num(fld.G[static_cast<std::size_t>(i) * grid.nx + jx]);
      g << "\n";
    }
  }

  if (sv.compare_walk) {
    WalkOptions wo;
    wo.threads = opt.threads;
    wo.jump_mode = lat->jump_mode;
    const auto est = simulate_moments(spec, lat->n0, cps, lat->walkers, seed_of(cfg, opt), wo);
    auto g = open_out(dir / "survival.csv");
    g << "tau,pde_absorbed,pde_survival,walk_R,walk_R_err,walk_survival\n";
    for (std::size_t k = 0; k < cps.size(); ++k) {
      const double a = res.snapshots[k].absorbed_mass();
      g << num(times[k]) << "," << num(a) << "," << num(1.0 - a) << "," << num(est[k].R) << "," << num(est[k].R_err)
        << "," << num(1.0 - est[k].R) << "\n";
    }
  }
  out << "steps = " << res.steps << ", snapshots = " << res.snapshots.size()
      << ", max mass error = " << num(res.max_mass_error) << "\n";
  return kOk;
}

int cmd_validate(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& out) {
  ValidationConfig vc;
  if (opt.seed) {
    vc.seed = *opt.seed;
  } else if (cfg.lattice) {
    vc.seed = cfg.lattice->seed;
  }
  vc.threads = opt.threads;
  vc.only = opt.only;
  if (opt.fault == "sigma-map") {
    vc.sigma_map_fault = std::sqrt(2.0);
  } else if (!opt.fault.empty()) {
    throw Error(ErrorCode::ConfigError, "unknown fault '" + opt.fault + "'");
  }
  const auto report = run_validation(vc);

  json checks = json::array();
  for (const auto& c : report.checks) {
    json metrics = json::array();
    for (const auto& m : c.metrics) {
      metrics.push_back({{"name", m.name},
                         {"value", m.value},
                         {"expected", m.expected},
                         {"tolerance", m.tolerance},
                         {"rule", m.rule},
                         {"pass", m.pass}});
    }
    json jc = {{"id", c.id},        {"name", c.name},       {"pass", c.pass},
               {"seconds", c.seconds}, {"budget", c.budget}, {"metrics", metrics}};
    if (!c.error.empty()) jc["error"] = c.error;
    checks.push_back(jc);
  }
  json j = {{"pass", report.pass()}, {"seed", report.seed}, {"seconds", report.seconds}, {"checks", checks}};
  write_json(output_dir(cfg, opt) / "validation.json", j);
  out << format_table(report);
  return report.pass() ? kOk : kValidationFailed;
}

namespace {

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::ConfigError:
    case ErrorCode::NonSymmetric:
    case ErrorCode::NotPositiveDefinite:
    case ErrorCode::ZeroNormal:
    case ErrorCode::DegenerateNormalDirection:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::DriftTooLarge:
    case ErrorCode::AbsorptionTooLarge:
    case ErrorCode::DomainError:
      return kConfigError;
    default:
      return kNumericalError;
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Half-space diffusion with boundary singularities"};
  app.require_subcommand(1);

  std::string config_path;
  RunOptions opt;
  std::uint64_t seed = 0;
  std::string out_dir;

  struct Sub {
    const char* name;
    const char* help;
    int (*fn)(const ExperimentConfig&, const RunOptions&, std::ostream&);
  };
  const Sub subs[] = {
      {"basis", "boundary basis report", cmd_basis},
      {"walk", "Monte Carlo moments over the tau sweep", cmd_walk},
      {"evolve", "exact lattice evolution and transforms", cmd_evolve},
      {"kernel", "wall kernel K(tau, zeta)", cmd_kernel},
      {"solve", "finite-volume Fokker-Planck run", cmd_solve},
      {"validate", "acceptance suite", cmd_validate},
  };
  std::vector<std::pair<CLI::App*, const Sub*>> cmds;
  for (const auto& s : subs) {
    auto* sc = app.add_subcommand(s.name, s.help);
    auto* cfg_opt = sc->add_option("--config", config_path, "config file")->check(CLI::ExistingFile);
    if (std::string(s.name) != "validate") cfg_opt->required();
    sc->add_option("--seed", seed, "seed override");
    sc->add_option("--out", out_dir, "output directory");
    sc->add_option("--threads", opt.threads, "worker threads (default FPB_THREADS)");
    if (std::string(s.name) == "validate") {
      sc->add_option("--inject-fault", opt.fault, "deliberate fault: sigma-map");
      sc->add_option("--only", opt.only, "check ids to run")->delimiter(',');
    }
    cmds.emplace_back(sc, &s);
  }

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }

  for (const auto& [sc, s] : cmds) {
    if (!sc->parsed()) continue;
    if (sc->count("--seed")) opt.seed = seed;
    if (!out_dir.empty()) opt.out = out_dir;
    try {
      const ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
      return s->fn(cfg, opt, out);
    } catch (const Error& e) {
      err << "error: " << e.what() << "\n";
      return exit_code(e.code());
    } catch (const std::filesystem::filesystem_error& e) {
      err << "error: " << e.what() << "\n";
      return kConfigError;
    }
  }
  return kConfigError;
}

}  // namespace fpb::cli
