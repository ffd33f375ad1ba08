#include "fpb/tensor_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "fpb/error.hpp"

namespace fpb {
namespace {

double relative_asymmetry(const Matrix& a) {
  const double scale = a.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  return (a - a.transpose()).cwiseAbs().maxCoeff() / scale;
}

double min_eigenvalue(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::EigenFailure, "symmetric eigenvalue iteration did not converge");
  }
  return solver.eigenvalues().minCoeff();
}

// g-orthonormal frame whose last column is n. Coordinate axes are taken in
// order of increasing alignment with n, so an axis-aligned normal keeps the
// remaining axes untouched.
Matrix adapted_frame(const Matrix& g, const Vector& n) {
  const int m = static_cast<int>(n.size());
  const Vector gn = g * n;
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(gn(a)) / std::sqrt(g(a, a)) < std::abs(gn(b)) / std::sqrt(g(b, b));
  });

  Matrix frame(m, m);
  frame.col(m - 1) = n;
  int filled = 0;
  for (int axis : order) {
    if (filled == m - 1) break;
    Vector e = Vector::Unit(m, axis);
    // Two Gram-Schmidt passes under g.
    for (int pass = 0; pass < 2; ++pass) {
      e -= n * n.dot(g * e);
      for (int c = 0; c < filled; ++c) e -= frame.col(c) * frame.col(c).dot(g * e);
    }
    const double norm = std::sqrt(e.dot(g * e));
    if (norm < 1e-8) continue;
    frame.col(filled++) = e / norm;
  }
  return frame;
}

void require_dim(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::DimensionMismatch, what);
}

}  // namespace

ModelCheck validate_model(const DiffusionModel& model, double symmetry_tol) {
  const auto m = model.D.rows();
  require_dim(model.D.cols() == m, "D must be square");
  require_dim(m >= 2 && m <= kMaxDim, "dimension must lie in [2, 16], got " + std::to_string(m));
  require_dim(model.n.size() == m, "normal has wrong length");

  ModelCheck out;
  DiffusionModel& checked = out.model;
  checked.g = model.g.size() == 0 ? Matrix::Identity(m, m) : model.g;
  require_dim(checked.g.rows() == m && checked.g.cols() == m, "metric has wrong shape");
  checked.v = model.v.size() == 0 ? Vector::Zero(m) : model.v;
  require_dim(checked.v.size() == m, "drift has wrong length");

  const double asym = std::max(relative_asymmetry(model.D), relative_asymmetry(checked.g));
  out.max_asymmetry = asym;
  if (asym > symmetry_tol) {
    throw Error(ErrorCode::NonSymmetric, "relative asymmetry " + std::to_string(asym));
  }
  checked.D = 0.5 * (model.D + model.D.transpose());
  checked.g = 0.5 * (checked.g + checked.g.transpose());

  if (!checked.D.allFinite() || min_eigenvalue(checked.D) <= 0.0) {
    throw Error(ErrorCode::NotPositiveDefinite, "diffusion tensor is not positive definite");
  }
  if (!checked.g.allFinite() || min_eigenvalue(checked.g) <= 0.0) {
    throw Error(ErrorCode::NotPositiveDefinite, "metric tensor is not positive definite");
  }

  const double norm2 = model.n.dot(checked.g * model.n);
  if (!std::isfinite(norm2) || norm2 <= 1e-300) {
    throw Error(ErrorCode::ZeroNormal, "boundary normal has zero length");
  }
  checked.n = model.n / std::sqrt(norm2);
  return out;
}

Matrix mixed_tensor(const DiffusionModel& model) { return model.D * model.g; }

Vector boundary_singularity_vector(const DiffusionModel& model) {
  return mixed_tensor(model) * model.n;
}

double normal_diffusivity(const DiffusionModel& model) {
  const Vector gn = model.g * model.n;
  return gn.dot(model.D * gn);
}

double normalization_omega(const DiffusionModel& model) {
  const Vector b = boundary_singularity_vector(model);
  const double omega = std::sqrt(b.dot(model.g * b));
  if (!(omega > 0.0)) {
    throw Error(ErrorCode::DegenerateNormalDirection, "boundary singularity vector vanishes");
  }
  return omega;
}

Matrix surface_diffusion_tensor(const DiffusionModel& model) {
  const Vector b = boundary_singularity_vector(model);
  const double dnn = normal_diffusivity(model);
  if (!(dnn > 0.0)) {
    throw Error(ErrorCode::DegenerateNormalDirection, "D_nn vanishes");
  }
  return model.D - b * b.transpose() / dnn;
}

Matrix BoundaryBasis::zeta_to_frame() const {
  const int m = dim;
  Matrix a = Matrix::Zero(m, m);
  a.topLeftCorner(m - 1, m - 1) = u_inv;
  a.col(m - 1).head(m - 1) = frame_D.col(m - 1).head(m - 1) / omega;
  a(m - 1, m - 1) = normal_D / omega;
  return a;
}

Matrix BoundaryBasis::zeta_to_model() const { return frame * zeta_to_frame(); }

BoundaryBasis build_boundary_basis(const DiffusionModel& model) {
  const int m = model.dim();
  BoundaryBasis basis;
  basis.dim = m;

  const double trace = mixed_tensor(model).trace();
  const double dnn = normal_diffusivity(model);
  if (!(dnn > 1e-10 * trace)) {
    throw Error(ErrorCode::DegenerateNormalDirection,
                "D_nn = " + std::to_string(dnn) + " below 1e-10 * trace(D)");
  }

  basis.frame = adapted_frame(model.g, model.n);
  basis.frame_inv = basis.frame.transpose() * model.g;
  basis.frame_D = basis.frame_inv * model.D * basis.frame_inv.transpose();
  basis.normal_D = basis.frame_D(m - 1, m - 1);
  basis.omega = normalization_omega(model);
  basis.b_M = boundary_singularity_vector(model) / basis.omega;

  const Matrix& fd = basis.frame_D;
  const Vector cross = fd.col(m - 1).head(m - 1);
  const Matrix surface = fd.topLeftCorner(m - 1, m - 1) - cross * cross.transpose() / basis.normal_D;

  Eigen::SelfAdjointEigenSolver<Matrix> solver(surface);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::EigenFailure, "surface eigensolve did not converge");
  }
  Matrix vecs = solver.eigenvectors();
  for (int c = 0; c < m - 1; ++c) {
    Eigen::Index arg = 0;
    vecs.col(c).cwiseAbs().maxCoeff(&arg);
    if (vecs(arg, c) < 0.0) vecs.col(c) = -vecs.col(c);
  }
  const Vector lambda = solver.eigenvalues();
  if (lambda.minCoeff() <= 0.0) {
    throw Error(ErrorCode::NotPositiveDefinite, "surface diffusion tensor is not positive definite");
  }

  basis.u_inv = vecs;
  basis.u = vecs.transpose();
  basis.surface_basis = basis.frame.leftCols(m - 1) * vecs;
  basis.eigenvalues.resize(m);
  basis.eigenvalues.head(m - 1) = lambda;
  basis.eigenvalues(m - 1) = basis.omega * basis.omega / dnn;

  const Matrix rebuilt = basis.u_inv * lambda.asDiagonal() * basis.u_inv.transpose();
  basis.identity_residual = (rebuilt - surface).norm();
  if (basis.identity_residual > 1e-11 * std::max(1.0, fd.norm())) {
    throw Error(ErrorCode::EigenFailure,
                "diagonalisation residual " + std::to_string(basis.identity_residual));
  }
  return basis;
}

Vector to_frame(const BoundaryBasis& basis, const Vector& x) { return basis.frame_inv * x; }

Vector tangential_part(const BoundaryBasis& basis, const Vector& x) {
  Vector xf = to_frame(basis, x);
  xf(basis.dim - 1) = 0.0;
  return basis.frame * xf;
}

Vector to_boundary_coords(const BoundaryBasis& basis, const Vector& x) {
  const int m = basis.dim;
  if (x.size() != m) throw Error(ErrorCode::DimensionMismatch, "point has wrong length");
  const Vector xf = to_frame(basis, x);
  const double xm = xf(m - 1);
  const Vector shifted = xf.head(m - 1) - basis.frame_D.col(m - 1).head(m - 1) * (xm / basis.normal_D);
  Vector zeta(m);
  zeta.head(m - 1) = basis.u * shifted;
  zeta(m - 1) = basis.omega * xm / basis.normal_D;
  return zeta;
}

Vector from_boundary_coords(const BoundaryBasis& basis, const Vector& zeta) {
  if (zeta.size() != basis.dim) throw Error(ErrorCode::DimensionMismatch, "point has wrong length");
  return basis.frame * (basis.zeta_to_frame() * zeta);
}

}  // namespace fpb
