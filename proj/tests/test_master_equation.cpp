#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <tuple>

#include "fpb/error.hpp"
#include "fpb/master_equation.hpp"

using namespace fpb;

namespace {

LatticeSpec spec2(double sigma_a, int g, double eps_lat = 0.0, double eps_norm = 0.0, double eps_surf = 0.0) {
  LatticeSpec s;
  s.dim = 2;
  s.tau_a = 1.0;
  s.spacing = Vector::Ones(2);
  s.eps = Vector(2);
  s.eps << eps_lat, eps_norm;
  s.eps_surface = Vector::Constant(1, eps_surf);
  s.sigma_a = sigma_a;
  s.g_fold = g;
  s.zeta_to_model = Matrix::Identity(2, 2);
  return s;
}

LatticeSpec spec3(double sigma_a, int g) {
  LatticeSpec s;
  s.dim = 3;
  s.tau_a = 1.0;
  s.spacing = Vector::Ones(3);
  s.eps = Vector(3);
  s.eps << 0.05, -0.03, 0.02;
  s.eps_surface = Vector(2);
  s.eps_surface << 0.1, 0.04;
  s.sigma_a = sigma_a;
  s.g_fold = g;
  s.zeta_to_model = Matrix::Identity(3, 3);
  return s;
}

// Path enumeration for M = 2, g = 1, zero drift: (lateral, layer) -> mass.
std::map<std::pair<int, int>, double> enumerate_paths(double sigma_a, int n0, int steps, double& trapped) {
  std::map<std::pair<int, int>, double> dist{{{0, n0}, 1.0}};
  trapped = 0.0;
  for (int t = 0; t < steps; ++t) {
    std::map<std::pair<int, int>, double> next;
    for (auto [node, p] : dist) {
      auto [x, n] = node;
      if (n == 0) {
        next[{x, 1}] += p * (1 - sigma_a) / 2;
        trapped += p * sigma_a / 2;
        next[{x + 1, 0}] += p * 0.25;
        next[{x - 1, 0}] += p * 0.25;
      } else {
        for (auto [dx, dn] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) next[{x + dx, n + dn}] += p * 0.25;
      }
    }
    dist = next;
  }
  return dist;
}

double grid_at(const ProbabilityGrid& g, int x, int n) {
  std::int64_t m[1] = {x};
  return g.P[n * g.lateral_size() + g.lateral_index(m)];
}

}  // namespace

TEST(Evolve, InitialDelta) {
  EvolveOptions opt;
  opt.snapshots = {0};
  auto res = evolve(spec2(0.1, 3), 4, 0, opt);
  ASSERT_EQ(res.snapshots.size(), 1u);
  const auto& g = res.snapshots[0];
  EXPECT_EQ(grid_at(g, 0, 4), 1.0);
  EXPECT_EQ(g.node_mass(), 1.0);
  EXPECT_EQ(g.trap_mass(), 0.0);
}

TEST(Evolve, NoTrapsWithoutAbsorption) {
  auto res = evolve(spec2(0.0, 4, 0.01, 0.02, 0.05), 0, 300);
  for (double r : res.moments.R) EXPECT_EQ(r, 0.0);
  EXPECT_LT(res.max_mass_error, 1e-12);
}

TEST(Evolve, TwoStepsMatchPathEnumeration) {
  EvolveOptions opt;
  opt.snapshots = {2};
  opt.layers = 6;
  opt.half_width = 4;
  auto res = evolve(spec2(0.2, 1), 0, 2, opt);
  double trapped;
  auto exact = enumerate_paths(0.2, 0, 2, trapped);
  const auto& g = res.snapshots.at(0);
  double total = 0.0;
  for (int n = 0; n < g.layers; ++n) {
    for (int x = -4; x <= 4; ++x) {
      auto it = exact.find({x, n});
      const double want = it == exact.end() ? 0.0 : it->second;
      EXPECT_NEAR(grid_at(g, x, n), want, 1e-16) << x << "," << n;
      total += want;
    }
  }
  EXPECT_NEAR(g.trap_mass(), trapped, 1e-16);
  EXPECT_NEAR(total + trapped, 1.0, 1e-15);
}

TEST(Evolve, ConservationAndTrapMonotonicity) {
  for (auto spec : {spec2(0.3, 5, 0.02, -0.04, 0.1), spec3(0.25, 3)}) {
    EvolveOptions opt;
    std::vector<double> traps;
    opt.observer = [&](const ProbabilityGrid& g) { traps.push_back(g.trap_mass()); };
    auto res = evolve(spec, 1, 120, opt);
    EXPECT_LT(res.max_mass_error, 1e-12);
    for (std::size_t t = 1; t < traps.size(); ++t) {
      EXPECT_GE(traps[t], traps[t - 1]);
      EXPECT_EQ(traps[t], res.moments.R[t]);
    }
  }
}

TEST(Evolve, TruncationIsMonitored) {
  EvolveOptions opt;
  opt.layers = 5;
  opt.half_width = 50;
  try {
    evolve(spec2(0.0, 1), 0, 100, opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TruncationBreach);
  }
}

TEST(Evolve, RejectsHigherDimensions) {
  LatticeSpec s = spec3(0.1, 1);
  s.dim = 4;
  s.eps = Vector::Zero(4);
  s.eps_surface = Vector::Zero(3);
  EXPECT_THROW(evolve(s, 0, 3), Error);
}

TEST(DiscreteMoments, InitialAndOneStep) {
  EvolveOptions opt;
  opt.snapshots = {0, 1};
  auto res = evolve(spec2(0.0, 1), 10, 1, opt);
  auto series = discrete_moments(res.snapshots, 10);
  EXPECT_EQ(series.R[0], 0.0);
  EXPECT_EQ(series.U[0].norm(), 0.0);
  EXPECT_EQ(series.L[0].norm(), 0.0);
  EXPECT_DOUBLE_EQ(series.L[1](0, 0), 0.25);
  EXPECT_DOUBLE_EQ(series.L[1](1, 1), 0.25);
  EXPECT_DOUBLE_EQ(series.L[1](0, 1), 0.0);
}

TEST(EvolveMoments, AgreesWithFullGrid) {
  for (auto spec : {spec2(0.3, 5, 0.02, -0.04, 0.1), spec2(0.0, 1), spec3(0.25, 3)}) {
    for (int n0 : {0, 3}) {
      EvolveOptions opt;
      if (spec.dim == 3) opt.half_width = 85;
      auto full = evolve(spec, n0, 120, opt).moments;
      auto fast = evolve_moments(spec, n0, 120);
      ASSERT_EQ(full.size(), fast.size());
      for (std::size_t t = 0; t < full.size(); ++t) {
        EXPECT_NEAR(full.R[t], fast.R[t], 1e-13);
        EXPECT_LT((full.U[t] - fast.U[t]).norm(), 1e-11 * (1.0 + full.U[t].norm()));
        EXPECT_LT((full.L[t] - fast.L[t]).norm(), 1e-11 * (1.0 + full.L[t].norm()));
        EXPECT_NEAR(full.mass[t], fast.mass[t], 1e-12);
      }
    }
  }
}

TEST(DiscreteLaplace, ConstantAndDelta) {
  const double s = 0.3;
  auto c = discrete_laplace(std::vector<double>(40, 2.5), s, 1e-4);
  EXPECT_NEAR(c.value, 2.5 / (1 - std::exp(-s)), 1e-13);
  std::vector<double> delta(200, 0.0);
  delta[0] = 1.0;
  EXPECT_NEAR(discrete_laplace(delta, s).value, 1.0, 1e-15);
}

TEST(DiscreteLaplace, LinearSeriesIsSummedExactly) {
  const double s = 0.2, q = std::exp(-s);
  std::vector<double> lin(30);
  for (std::size_t t = 0; t < lin.size(); ++t) lin[t] = 1.0 + 0.5 * t;
  // sum (1 + t/2) q^t = 1/(1-q) + (q/2)/(1-q)^2
  const double exact = 1 / (1 - q) + 0.5 * q / ((1 - q) * (1 - q));
  EXPECT_NEAR(discrete_laplace(lin, s, 1.0).value, exact, 1e-12);
}

TEST(DiscreteLaplace, ShortSeriesRejected) {
  std::vector<double> grow(10);
  for (std::size_t t = 0; t < grow.size(); ++t) grow[t] = std::sqrt(double(t));
  try {
    discrete_laplace(grow, 0.01);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SeriesTooShort);
  }
  EXPECT_THROW(discrete_laplace(std::vector<double>{1.0}, 0.1), Error);
}

TEST(GeneratingFunctions, ValuesAtOrigin) {
  auto spec = spec2(0.17, 4, 0.03, 0.02, 0.05);
  const Vector k0 = Vector::Zero(1);
  EXPECT_NEAR(std::abs(phi_internal(spec, 0.0, k0) - 1.0), 0.0, 1e-16);
  EXPECT_NEAR(std::abs(phi_boundary(spec, 0.0, k0) - (1.0 - 0.17 / 2)), 0.0, 1e-16);
}

// Second-order Taylor coefficients by Richardson-extrapolated central
// differences, compared with the analytic expansion.
TEST(GeneratingFunctions, TaylorCoefficients) {
  for (int m : {2, 3}) {
    LatticeSpec spec = m == 2 ? spec2(0.0, 6, 0.07, -0.05, 0.12) : spec3(0.0, 6);
    const int lat = m - 1;
    const double g = spec.g_fold;
    auto d1 = [](auto f, double h) {
      auto c = [&](double hh) { return (f(hh) - f(-hh)) / (2 * hh); };
      return (4.0 * c(h / 2) - c(h)) / 3.0;
    };
    auto d2 = [](auto f, double h) {
      auto c = [&](double hh) { return (f(hh) - 2.0 * f(0.0) + f(-hh)) / (hh * hh); };
      return (4.0 * c(h / 2) - c(h)) / 3.0;
    };
    const double h = 1e-2;
    const Vector k0 = Vector::Zero(lat);
    auto Phi_p = [&](double p) { return phi_internal(spec, p, k0); };
    auto phi_p = [&](double p) { return phi_boundary(spec, p, k0); };
    EXPECT_NEAR(std::abs(d1(Phi_p, h) - (-spec.eps(m - 1) / m)), 0.0, 1e-8);
    EXPECT_NEAR(std::abs(d2(Phi_p, h) - 1.0 / m), 0.0, 1e-8);
    EXPECT_NEAR(std::abs(d1(phi_p, h) - (-1.0 / m)), 0.0, 1e-8);
    EXPECT_NEAR(std::abs(d2(phi_p, h) - 1.0 / m), 0.0, 1e-8);
    for (int a = 0; a < lat; ++a) {
      auto Phi_k = [&](double x) { return phi_internal(spec, 0.0, x * Vector::Unit(lat, a)); };
      auto phi_k = [&](double x) { return phi_boundary(spec, 0.0, x * Vector::Unit(lat, a)); };
      const double ea = spec.eps_surface(a);
      EXPECT_NEAR(std::abs(d1(Phi_k, h) - Complex(0, spec.eps(a) / m)), 0.0, 1e-8);
      EXPECT_NEAR(std::abs(d2(Phi_k, h) - (-1.0 / m)), 0.0, 1e-8);
      EXPECT_NEAR(std::abs(d1(phi_k, h) - Complex(0, g * ea / m)), 0.0, 1e-8);
      EXPECT_NEAR(std::abs(d2(phi_k, h) - (-g / m * (1.0 + (g - 1) * ea * ea / lat))), 0.0, 1e-8);
    }
  }
}

// k = 0 root in closed form: cosh p - eps sinh p = C gives
// p = atanh(eps) + acosh(C / sqrt(1 - eps^2)).
TEST(SolveVarpi, MatchesClosedFormRoot) {
  for (double eps : {0.0, 0.03, -0.2}) {
    for (double s : {1e-6, 1e-4, 0.01, 0.5, 3.0}) {
      auto spec = spec2(0.1, 2, 0.0, eps);
      const double C = 1.0 + 2.0 * (std::exp(s) - 1.0);
      const double exact = std::atanh(eps) + std::acosh(C / std::sqrt(1 - eps * eps));
      const Complex w = solve_varpi(spec, s, Vector::Zero(1));
      EXPECT_NEAR(w.real(), exact, 1e-10 * std::max(1.0, exact)) << eps << " " << s;
      EXPECT_EQ(w.imag(), 0.0);
    }
  }
}

TEST(SolveVarpi, SmallSAsymptote) {
  auto spec = spec2(0.0, 1);
  EXPECT_NEAR(solve_varpi(spec, 1e-4, Vector::Zero(1)).real(), 0.02, 0.02 * 0.01);
  EXPECT_LT(solve_varpi(spec, 1e-12, Vector::Zero(1)).real(), 1e-5);
  const Complex w = solve_varpi(spec, 0.5, Vector::Zero(1));
  EXPECT_LT(std::abs(phi_internal(spec, w, Vector::Zero(1)) - std::exp(0.5)), 1e-12);
}

TEST(SolveVarpi, ComplexWaveVectors) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ud(-3.0, 3.0), us(1e-3, 2.0);
  for (int i = 0; i < 200; ++i) {
    auto spec = i % 2 ? spec2(0.1, 3, 0.05, 0.04, 0.1) : spec3(0.1, 2);
    const int lat = spec.dim - 1;
    Vector k(lat);
    for (int a = 0; a < lat; ++a) k(a) = ud(rng);
    const double s = us(rng);
    const Complex w = solve_varpi(spec, s, k);
    EXPECT_GT(w.real(), 0.0);
    EXPECT_LT(std::abs(phi_internal(spec, w, k) - std::exp(s)), 1e-12 * std::exp(s));
  }
}

TEST(GenerationFunction, SatisfiesFunctionalEquation) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> us(1e-3, 1.5), up(0.0, 2.0), ui(-2.0, 2.0), uk(-3.0, 3.0);
  for (int i = 0; i < 50; ++i) {
    auto spec = i % 2 ? spec2(0.3, 4, 0.05, -0.03, 0.1) : spec3(0.2, 3);
    const int lat = spec.dim - 1;
    const int n0 = i % 4;
    const double s = us(rng);
    const Complex p(up(rng), ui(rng));
    Vector k(lat);
    for (int a = 0; a < lat; ++a) k(a) = uk(rng);
    const Complex G = generation_function(spec, s, p, k, n0);
    const Complex gb = boundary_generation_function(spec, s, k, n0);
    const Complex Phi = phi_internal(spec, p, k), phi = phi_boundary(spec, p, k);
    const Complex lhs = (std::exp(s) - Phi) * G;
    const Complex rhs = std::exp(s) - std::exp(p * double(n0)) * (Phi - phi) * gb;
    EXPECT_LT(std::abs(lhs - rhs), 1e-10 * std::max(1.0, std::abs(lhs)));
  }
}

TEST(GenerationFunction, NegativeRealPartRejected) {
  try {
    generation_function(spec2(0.1, 1), 0.1, Complex(-0.5, 0), Vector::Zero(1), 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConvergenceStrip);
  }
}

TEST(GenerationFunction, NormalisationWithTrappedMass) {
  auto spec = spec2(0.25, 3, 0.0, 0.02, 0.05);
  for (int n0 : {0, 2}) {
    for (double s : {0.05, 0.2}) {
      auto series = evolve_moments(spec, n0, static_cast<std::int64_t>(40.0 / s));
      const double R = discrete_laplace(series, s).R;
      const Complex G = generation_function(spec, s, 0.0, Vector::Zero(1), n0);
      EXPECT_NEAR(G.real() + R, 1.0 / (1.0 - std::exp(-s)), 1e-9);
      EXPECT_NEAR(G.imag(), 0.0, 1e-12);
    }
  }
}

// G accumulated directly from the evolving distribution.
TEST(GenerationFunction, MatchesTransformOfEvolution) {
  auto spec = spec2(0.2, 3, 0.03, -0.02, 0.08);
  const double s = 0.05;
  const int n0 = 2;
  std::vector<std::tuple<Complex, double>> points = {{0.0, 0.0}, {0.3, 0.7}, {Complex(0.1, 0.4), -1.2}, {1.0, 2.5}};
  std::vector<Complex> acc(points.size(), 0.0);
  EvolveOptions opt;
  opt.observer = [&](const ProbabilityGrid& g) {
    const std::size_t lat = g.lateral_size();
    const double w = std::exp(-s * double(g.t));
    for (std::size_t i = 0; i < points.size(); ++i) {
      auto [p, k] = points[i];
      Complex sum = 0.0;
      std::vector<Complex> phase(lat);
      for (std::size_t l = 0; l < lat; ++l) phase[l] = std::exp(Complex(0, k * (double(l) - g.half_width)));
      for (int n = 0; n < g.layers; ++n) {
        Complex row = 0.0;
        for (std::size_t l = 0; l < lat; ++l) {
          const double mass = g.P[n * lat + l];
          if (mass != 0.0) row += mass * phase[l];
        }
        sum += row * std::exp(-p * double(n - n0));
      }
      acc[i] += w * sum;
    }
  };
  evolve(spec, n0, 800, opt);
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto [p, k] = points[i];
    const Complex closed = generation_function(spec, s, p, Vector::Constant(1, k), n0);
    EXPECT_LT(std::abs(closed - acc[i]) / std::abs(acc[i]), 1e-3) << i;
    EXPECT_LT(std::abs(closed - acc[i]) / std::abs(acc[i]), 1e-9) << i;
  }
}

TEST(ClosedForm, Examples) {
  auto inert = spec2(0.0, 1);
  auto cf = closed_form_transforms(inert, 0.01, 0);
  EXPECT_EQ(cf.R, 0.0);
  EXPECT_DOUBLE_EQ(cf.L(1, 1), 1.0 / (2 * 2 * 1e-4));
  EXPECT_TRUE(cf.warning.empty());
  EXPECT_FALSE(closed_form_transforms(inert, 0.5, 0).warning.empty());
  AsymptoticWindow strict;
  strict.strict = true;
  EXPECT_THROW(closed_form_transforms(inert, 0.5, 0, strict), Error);
}

TEST(ClosedForm, NormalFirstMomentAgainstEvolution) {
  auto spec = spec2(0.0, 1);
  const double s = 0.01;
  auto exact = discrete_laplace(evolve_moments(spec, 0, 3000), s);
  auto cf = closed_form_transforms(spec, s, 0);
  EXPECT_LT(std::abs(cf.U(1) - exact.U(1)) / exact.U(1), 0.05);
}
