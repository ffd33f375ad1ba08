#pragma once

// Continuum side of the boundary singularities: the kernel K(tau, zeta),
// its Laplace image, singular moments and the lattice <-> continuum map of
// the boundary coefficients.

#include <string>
#include <vector>

#include "fpb/tensor_geometry.hpp"

namespace fpb {

struct BoundaryCoefficients {
  double sigma = 0.0;      // surface absorption rate, length/time
  double l_upsilon = 0.0;  // surface diffusion length
  Vector v_surface;        // tangential boundary drift, model coordinates; empty = zero
};

struct LatticeBoundary {
  double sigma_a = 0.0;
  int g_fold = 1;
};

/// sigma = sigma_a sqrt(D_MM / (2 M tau_a)), l = g sqrt(M D_MM tau_a / 2).
BoundaryCoefficients continuum_from_lattice(double sigma_a, int g_fold, double tau_a, double D_MM, int M);

/// Inverse map; g is rounded to the nearest integer and clamped to >= 1.
LatticeBoundary lattice_from_continuum(double sigma, double l_upsilon, double tau_a, double D_MM, int M);

/// K(tau, zeta) = sqrt(tau/pi) int_0^1 z^{-1/2} exp(-zeta^2 / (4 D_M tau z)) dz,
/// by adaptive quadrature after z = w^2. Throws DomainError for tau <= 0,
/// D_M <= 0 or zeta < 0.
double kernel_K(double tau, double zeta, double D_M);

/// Same kernel through 2 sqrt(tau/pi) e^{-a} - zeta/sqrt(D_M) erfc(sqrt(a)),
/// a = zeta^2 / (4 D_M tau).
double kernel_K_closed(double tau, double zeta, double D_M);

/// s^{-3/2} exp(-zeta0 sqrt(s / D_M)).
double kernel_K_laplace(double s, double zeta0, double D_M);

struct SingularMoments {
  double K = 0.0;
  double R = 0.0;
  Vector U;    // model coordinates
  Matrix L;
  Vector U_b;  // b-basis components
  Matrix L_b;
};

/// Singular parts of R, U and L for a walker started at normal distance
/// x_normal from the wall after time tau.
SingularMoments singular_moments(const DiffusionModel& model, const BoundaryBasis& basis,
                                 const BoundaryCoefficients& coeffs, double tau, double x_normal);

/// The same moments assembled from the b-basis forms and mapped back to model
/// coordinates. Agrees with singular_moments to rounding.
SingularMoments singular_moments_via_b(const BoundaryBasis& basis, const BoundaryCoefficients& coeffs,
                                       double tau, double x_normal);

struct ScalingSample {
  double tau = 0.0;
  double value = 0.0;
  double err = 0.0;  // optional absolute standard error; 0 for unweighted
};

struct ScalingFit {
  double exponent = 0.0;
  double exponent_err = 0.0;
  double log_amplitude = 0.0;
  double log_amplitude_err = 0.0;
  double amplitude = 0.0;
  std::size_t points = 0;
};

/// Least-squares fit of log|value| = log A + p log tau. Uses inverse-variance
/// weights when every sample carries an error. Throws InsufficientData for
/// fewer than 5 points, a tau span below one decade or a zero value.
ScalingFit fit_tau_scaling(const std::vector<ScalingSample>& samples);

struct ValidityWindow {
  double min_tau_over_tau_a = 10.0;
  double max_tau_fraction = 0.1;  // tau <= fraction * min(D_M / v_M^2, extent^2 / D_M)
};

/// Empty when tau lies inside the window, otherwise a human-readable warning.
std::string check_validity_window(const ValidityWindow& window, double tau, double tau_a, double D_M,
                                  double v_normal, double extent);

}  // namespace fpb
