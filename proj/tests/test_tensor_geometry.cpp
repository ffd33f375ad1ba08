#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "fpb/error.hpp"
#include "fpb/tensor_geometry.hpp"

using namespace fpb;

namespace {

DiffusionModel make2(double d11, double d12, double d22, double n1, double n2) {
  DiffusionModel m;
  m.D.resize(2, 2);
  m.D << d11, d12, d12, d22;
  m.n.resize(2);
  m.n << n1, n2;
  return validate_model(m).model;
}

Matrix random_spd(std::mt19937_64& rng, int m, double floor) {
  std::normal_distribution<double> nd;
  Matrix a(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) a(i, j) = nd(rng);
  return a * a.transpose() + floor * Matrix::Identity(m, m);
}

DiffusionModel random_model(std::mt19937_64& rng, int m, bool with_metric) {
  std::normal_distribution<double> nd;
  DiffusionModel model;
  model.D = random_spd(rng, m, 0.3);
  if (with_metric) model.g = random_spd(rng, m, 1.0);
  model.n = Vector(m);
  for (int i = 0; i < m; ++i) model.n(i) = nd(rng);
  return validate_model(model).model;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no exception";
  return ErrorCode::ConfigError;
}

}  // namespace

TEST(ValidateModel, IdentityIsValid) {
  auto m = make2(1, 0, 1, 0, 1);
  EXPECT_TRUE(m.g.isIdentity());
  EXPECT_DOUBLE_EQ(m.n(1), 1.0);
}

TEST(ValidateModel, IndefiniteRejected) {
  DiffusionModel m;
  m.D.resize(2, 2);
  m.D << 1, 2, 2, 1;
  m.n = Vector::Unit(2, 1);
  EXPECT_EQ(code_of([&] { validate_model(m); }), ErrorCode::NotPositiveDefinite);
}

TEST(ValidateModel, AnisotropicAccepted) {
  EXPECT_NO_THROW(make2(2, 1, 3, 0, 1));
}

TEST(ValidateModel, AsymmetryAndNormal) {
  DiffusionModel m;
  m.D.resize(2, 2);
  m.D << 2, 1, 1.1, 3;
  m.n = Vector::Unit(2, 1);
  EXPECT_EQ(code_of([&] { validate_model(m); }), ErrorCode::NonSymmetric);

  m.D << 2, 1, 1 + 1e-13, 3;
  auto checked = validate_model(m);
  EXPECT_GT(checked.max_asymmetry, 0.0);
  EXPECT_EQ(checked.model.D(0, 1), checked.model.D(1, 0));

  m.n = Vector::Zero(2);
  EXPECT_EQ(code_of([&] { validate_model(m); }), ErrorCode::ZeroNormal);

  m.n = Vector::Constant(2, 3.0);
  auto renorm = validate_model(m).model;
  EXPECT_NEAR(renorm.n.norm(), 1.0, 1e-15);
}

TEST(ValidateModel, DimensionLimits) {
  DiffusionModel m;
  m.D = Matrix::Identity(1, 1);
  m.n = Vector::Ones(1);
  EXPECT_EQ(code_of([&] { validate_model(m); }), ErrorCode::DimensionMismatch);
  m.D = Matrix::Identity(17, 17);
  m.n = Vector::Unit(17, 0);
  EXPECT_EQ(code_of([&] { validate_model(m); }), ErrorCode::DimensionMismatch);
}

TEST(BoundaryVector, Examples) {
  DiffusionModel id;
  id.D = Matrix::Identity(3, 3);
  id.n = Vector::Unit(3, 2);
  id = validate_model(id).model;
  EXPECT_TRUE(boundary_singularity_vector(id).isApprox(Vector::Unit(3, 2)));

  auto diag = make2(4, 0, 9, 1, 0);
  Vector b = boundary_singularity_vector(diag);
  EXPECT_DOUBLE_EQ(b(0), 4.0);
  EXPECT_DOUBLE_EQ(b(1), 0.0);
  EXPECT_DOUBLE_EQ(normalization_omega(diag), 4.0);

  auto aniso = make2(2, 1, 3, 0, 1);
  b = boundary_singularity_vector(aniso);
  EXPECT_DOUBLE_EQ(b(0), 1.0);
  EXPECT_DOUBLE_EQ(b(1), 3.0);
  EXPECT_NEAR(normalization_omega(aniso), std::sqrt(10.0), 1e-15);
  EXPECT_DOUBLE_EQ(normalization_omega(make2(1, 0, 1, 0.6, 0.8)), 1.0);
}

TEST(SurfaceTensor, AnisotropicComponents) {
  Matrix s = surface_diffusion_tensor(make2(2, 1, 3, 0, 1));
  EXPECT_NEAR(s(0, 0), 5.0 / 3.0, 1e-15);
  EXPECT_NEAR(s(0, 1), 0.0, 1e-15);
  EXPECT_NEAR(s(1, 1), 0.0, 1e-15);
}

TEST(SurfaceTensor, IsotropicProjection) {
  DiffusionModel m;
  m.D = 2.5 * Matrix::Identity(3, 3);
  m.n = Vector(3);
  m.n << 1, 2, 2;
  m = validate_model(m).model;
  Matrix expect = 2.5 * (Matrix::Identity(3, 3) - m.n * m.n.transpose());
  EXPECT_LT((surface_diffusion_tensor(m) - expect).norm(), 1e-14);
}

TEST(SurfaceTensor, AnnihilatesNormalForRandomModels) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    auto m = random_model(rng, 2 + trial % 5, trial % 2 == 1);
    Matrix s = surface_diffusion_tensor(m);
    EXPECT_LT((s * m.g * m.n).norm(), 1e-12 * s.norm());
  }
}

TEST(BoundaryBasis, IdentityModel) {
  auto basis = build_boundary_basis(make2(1, 0, 1, 0, 1));
  EXPECT_TRUE(basis.frame.isIdentity(1e-15));
  EXPECT_TRUE(basis.surface_basis.isApprox(Vector::Unit(2, 0)));
  EXPECT_TRUE(basis.b_M.isApprox(Vector::Unit(2, 1)));
  EXPECT_DOUBLE_EQ(basis.eigenvalues(0), 1.0);
  EXPECT_DOUBLE_EQ(basis.eigenvalues(1), 1.0);
  EXPECT_EQ(basis.identity_residual, 0.0);
}

TEST(BoundaryBasis, AnisotropicModel) {
  auto basis = build_boundary_basis(make2(2, 1, 3, 0, 1));
  const double r10 = std::sqrt(10.0);
  EXPECT_NEAR(basis.b_M(0), 1.0 / r10, 1e-15);
  EXPECT_NEAR(basis.b_M(1), 3.0 / r10, 1e-15);
  EXPECT_NEAR(basis.eigenvalues(0), 5.0 / 3.0, 1e-14);
  EXPECT_NEAR(basis.eigenvalues(1), 10.0 / 3.0, 1e-14);
  EXPECT_NEAR(basis.omega, r10, 1e-15);
  EXPECT_DOUBLE_EQ(basis.normal_D, 3.0);
}

TEST(BoundaryBasis, DegenerateNormalRejected) {
  DiffusionModel m;
  m.D.resize(2, 2);
  m.D << 1, 0, 0, 1e-13;
  m.n = Vector::Unit(2, 1);
  m = validate_model(m).model;
  EXPECT_EQ(code_of([&] { build_boundary_basis(m); }), ErrorCode::DegenerateNormalDirection);
}

TEST(BoundaryBasis, IsotropicReduction) {
  DiffusionModel m;
  m.D = 0.7 * Matrix::Identity(4, 4);
  m.n = Vector(4);
  m.n << 0.1, -0.4, 0.3, 0.9;
  m = validate_model(m).model;
  auto basis = build_boundary_basis(m);
  EXPECT_LT((basis.b_M - m.n).norm(), 1e-14);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(basis.eigenvalues(i), 0.7, 1e-14);
}

// Randomised property sweep. The reference side recomputes every quantity
// with plain loops over the model components.
TEST(BoundaryBasis, RandomModelsSatisfyDiagonalisationIdentity) {
  std::mt19937_64 rng(20240501);
  std::uniform_real_distribution<double> ud(-3, 3);
  for (int trial = 0; trial < 100; ++trial) {
    const int m = 2 + trial % 5;
    auto model = random_model(rng, m, trial % 3 == 0);
    auto basis = build_boundary_basis(model);

    // Frame components of D by explicit sums: D'^{ab} = sum f_{ai} D^{ij} f_{bj},
    // with f = frame^T g.
    Matrix f = Matrix::Zero(m, m);
    for (int a = 0; a < m; ++a)
      for (int i = 0; i < m; ++i)
        for (int k = 0; k < m; ++k) f(a, i) += basis.frame(k, a) * model.g(k, i);
    Matrix dp = Matrix::Zero(m, m);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b)
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < m; ++j) dp(a, b) += f(a, i) * model.D(i, j) * f(b, j);

    double res2 = 0.0;
    for (int a = 0; a < m - 1; ++a) {
      for (int b = 0; b < m - 1; ++b) {
        double lhs = 0.0;
        for (int c = 0; c < m - 1; ++c) lhs += basis.u_inv(a, c) * basis.u_inv(b, c) * basis.eigenvalues(c);
        const double rhs = dp(a, b) - dp(a, m - 1) * dp(b, m - 1) / dp(m - 1, m - 1);
        res2 += (lhs - rhs) * (lhs - rhs);
      }
    }
    EXPECT_LT(std::sqrt(res2), 1e-10) << "trial " << trial;
    EXPECT_LT((basis.u * basis.u_inv - Matrix::Identity(m - 1, m - 1)).norm(), 1e-12);

    // Frame orthonormality and b_M against b / omega.
    EXPECT_LT((basis.frame.transpose() * model.g * basis.frame - Matrix::Identity(m, m)).norm(), 1e-12);
    Vector b = model.D * model.g * model.n;
    EXPECT_LT((basis.omega * basis.b_M - b).cwiseAbs().maxCoeff(), 1e-12 * b.norm());
    EXPECT_NEAR(std::sqrt(basis.b_M.dot(model.g * basis.b_M)), 1.0, 1e-12);
    for (int i = 0; i < m; ++i) EXPECT_GT(basis.eigenvalues(i), 0.0);

    Vector x(m);
    for (int i = 0; i < m; ++i) x(i) = ud(rng);
    Vector back = from_boundary_coords(basis, to_boundary_coords(basis, x));
    EXPECT_LT((back - x).norm(), 1e-12 * std::max(1.0, x.norm()));
  }
}

// In b-coordinates the diffusion tensor is diag(D_1..D_M).
TEST(BoundaryBasis, ZetaCoordinatesDiagonaliseD) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 30; ++trial) {
    const int m = 2 + trial % 4;
    auto model = random_model(rng, m, false);
    auto basis = build_boundary_basis(model);
    Matrix ainv = basis.zeta_to_model().inverse();
    Matrix dz = ainv * model.D * ainv.transpose();
    Matrix expect = basis.eigenvalues.asDiagonal();
    EXPECT_LT((dz - expect).norm(), 1e-10 * expect.norm()) << "trial " << trial;
  }
}

TEST(Coordinates, Examples) {
  auto id = build_boundary_basis(make2(1, 0, 1, 0, 1));
  Vector x(2);
  x << 0.3, -1.7;
  EXPECT_LT((to_boundary_coords(id, x) - x).norm(), 1e-15);
  EXPECT_EQ(to_boundary_coords(id, Vector::Zero(2)).norm(), 0.0);

  auto basis = build_boundary_basis(make2(2, 1, 3, 0, 1));
  Vector zeta = to_boundary_coords(basis, Vector::Unit(2, 1));
  EXPECT_NEAR(zeta(0), -1.0 / 3.0, 1e-15);
  EXPECT_NEAR(zeta(1), std::sqrt(10.0) / 3.0, 1e-15);
  EXPECT_LT((from_boundary_coords(basis, zeta) - Vector::Unit(2, 1)).norm(), 1e-15);
}
