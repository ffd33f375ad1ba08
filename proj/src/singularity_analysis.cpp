#include "fpb/singularity_analysis.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>
#include <sstream>

#include "fpb/error.hpp"

namespace fpb {

BoundaryCoefficients continuum_from_lattice(double sigma_a, int g_fold, double tau_a, double D_MM, int M) {
  BoundaryCoefficients c;
  c.sigma = sigma_a * std::sqrt(D_MM / (2.0 * M * tau_a));
  c.l_upsilon = g_fold * std::sqrt(M * D_MM * tau_a / 2.0);
  return c;
}

LatticeBoundary lattice_from_continuum(double sigma, double l_upsilon, double tau_a, double D_MM, int M) {
  if (!(tau_a > 0.0) || !(D_MM > 0.0)) throw Error(ErrorCode::DomainError, "tau_a and D_MM must be positive");
  LatticeBoundary b;
  b.sigma_a = sigma * std::sqrt(2.0 * M * tau_a / D_MM);
  const double g = l_upsilon * std::sqrt(2.0 / (M * D_MM * tau_a));
  b.g_fold = static_cast<int>(std::max(1.0, std::round(g)));
  return b;
}

namespace {

void check_kernel_args(double tau, double zeta, double D_M) {
  if (!(tau > 0.0)) throw Error(ErrorCode::DomainError, "tau must be positive");
  if (!(D_M > 0.0)) throw Error(ErrorCode::DomainError, "D_M must be positive");
  if (!(zeta >= 0.0)) throw Error(ErrorCode::DomainError, "zeta must be non-negative");
}

}  // namespace

double kernel_K(double tau, double zeta, double D_M) {
  check_kernel_args(tau, zeta, D_M);
  const double a = zeta * zeta / (4.0 * D_M * tau);
  // z = w^2 turns z^{-1/2} dz into 2 dw.
  auto f = [a](double w) { return w == 0.0 ? 0.0 : 2.0 * std::exp(-a / (w * w)); };
  const double integral = a == 0.0
                              ? 2.0
                              : boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, 0.0, 1.0, 15, 1e-13);
  return std::sqrt(tau / std::numbers::pi) * integral;
}

double kernel_K_closed(double tau, double zeta, double D_M) {
  check_kernel_args(tau, zeta, D_M);
  const double a = zeta * zeta / (4.0 * D_M * tau);
  return 2.0 * std::sqrt(tau / std::numbers::pi) * std::exp(-a) - zeta / std::sqrt(D_M) * std::erfc(std::sqrt(a));
}

double kernel_K_laplace(double s, double zeta0, double D_M) {
  if (!(s > 0.0)) throw Error(ErrorCode::DomainError, "s must be positive");
  if (!(D_M > 0.0)) throw Error(ErrorCode::DomainError, "D_M must be positive");
  if (!(zeta0 >= 0.0)) throw Error(ErrorCode::DomainError, "zeta0 must be non-negative");
  return std::pow(s, -1.5) * std::exp(-zeta0 * std::sqrt(s / D_M));
}

namespace {

double wall_kernel(const BoundaryBasis& basis, double tau, double x_normal) {
  if (!(x_normal >= 0.0)) throw Error(ErrorCode::DomainError, "x_normal must be non-negative");
  const double zeta = basis.omega * x_normal / basis.normal_D;
  return kernel_K(tau, zeta, basis.eigenvalues(basis.dim - 1));
}

Vector surface_drift(const BoundaryBasis& basis, const BoundaryCoefficients& c) {
  if (c.v_surface.size() == 0) return Vector::Zero(basis.dim);
  if (c.v_surface.size() != basis.dim) throw Error(ErrorCode::DimensionMismatch, "v_surface has wrong length");
  return tangential_part(basis, c.v_surface);
}

}  // namespace

SingularMoments singular_moments(const DiffusionModel& model, const BoundaryBasis& basis,
                                 const BoundaryCoefficients& coeffs, double tau, double x_normal) {
  SingularMoments out;
  out.K = wall_kernel(basis, tau, x_normal);
  const double scale = out.K / std::sqrt(basis.normal_D);
  const Vector b = boundary_singularity_vector(model);
  out.R = coeffs.sigma * scale;
  out.U = (b + coeffs.l_upsilon * surface_drift(basis, coeffs)) * scale;
  out.L = coeffs.l_upsilon * surface_diffusion_tensor(model) * scale;

  const Matrix ainv = basis.zeta_to_model().inverse();
  out.U_b = ainv * out.U;
  out.L_b = ainv * out.L * ainv.transpose();
  return out;
}

SingularMoments singular_moments_via_b(const BoundaryBasis& basis, const BoundaryCoefficients& coeffs,
                                       double tau, double x_normal) {
  const int m = basis.dim;
  SingularMoments out;
  out.K = wall_kernel(basis, tau, x_normal);
  const double scale = out.K / std::sqrt(basis.normal_D);
  out.R = coeffs.sigma * scale;

  Vector vs = to_boundary_coords(basis, surface_drift(basis, coeffs));
  vs(m - 1) = 0.0;
  out.U_b = (basis.omega * Vector::Unit(m, m - 1) + coeffs.l_upsilon * vs) * scale;
  Vector diag = basis.eigenvalues;
  diag(m - 1) = 0.0;
  out.L_b = coeffs.l_upsilon * scale * Matrix(diag.asDiagonal());

  const Matrix a = basis.zeta_to_model();
  out.U = a * out.U_b;
  out.L = a * out.L_b * a.transpose();
  return out;
}

ScalingFit fit_tau_scaling(const std::vector<ScalingSample>& samples) {
  const std::size_t n = samples.size();
  if (n < 5) throw Error(ErrorCode::InsufficientData, "need at least 5 samples, got " + std::to_string(n));
  double tmin = samples.front().tau, tmax = tmin;
  bool weighted = true;
  for (const auto& s : samples) {
    if (!(s.tau > 0.0) || s.value == 0.0 || !std::isfinite(s.value)) {
      throw Error(ErrorCode::InsufficientData, "samples need positive tau and nonzero values");
    }
    tmin = std::min(tmin, s.tau);
    tmax = std::max(tmax, s.tau);
    weighted = weighted && s.err > 0.0;
  }
  if (tmax < 10.0 * tmin * (1.0 - 1e-12)) {
    throw Error(ErrorCode::InsufficientData, "tau samples span less than one decade");
  }

  Eigen::MatrixX2d X(n, 2);
  Vector y(n), w(n);
  for (std::size_t i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = std::log(samples[i].tau);
    y(i) = std::log(std::abs(samples[i].value));
    // d log|v| = err / |v|
    w(i) = weighted ? std::pow(samples[i].value / samples[i].err, 2) : 1.0;
  }
  const Eigen::Matrix2d normal = X.transpose() * w.asDiagonal() * X;
  const Eigen::Vector2d beta = normal.ldlt().solve(X.transpose() * w.asDiagonal() * y);
  Eigen::Matrix2d cov = normal.inverse();
  if (!weighted) {
    const Vector r = y - X * beta;
    cov *= r.squaredNorm() / static_cast<double>(n - 2);
  }

  ScalingFit fit;
  fit.points = n;
  fit.log_amplitude = beta(0);
  fit.exponent = beta(1);
  fit.log_amplitude_err = std::sqrt(cov(0, 0));
  fit.exponent_err = std::sqrt(cov(1, 1));
  fit.amplitude = std::exp(beta(0));
  return fit;
}

std::string check_validity_window(const ValidityWindow& window, double tau, double tau_a, double D_M,
                                  double v_normal, double extent) {
  std::ostringstream msg;
  if (tau < window.min_tau_over_tau_a * tau_a) {
    msg << "tau=" << tau << " is not large against tau_a=" << tau_a;
    return msg.str();
  }
  double limit = std::numeric_limits<double>::infinity();
  if (v_normal != 0.0) limit = std::min(limit, D_M / (v_normal * v_normal));
  if (extent > 0.0) limit = std::min(limit, extent * extent / D_M);
  if (tau > window.max_tau_fraction * limit) {
    msg << "tau=" << tau << " exceeds " << window.max_tau_fraction << " of the drift/domain time " << limit;
  }
  return msg.str();
}

}  // namespace fpb
