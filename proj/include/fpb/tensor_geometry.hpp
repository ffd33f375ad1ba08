#pragma once

// Diffusion/metric tensor checks and the boundary-adapted basis of a
// homogeneous half-space {r : r.n >= 0}.
//
// Index conventions: D holds the contravariant components D^{ij}, g the
// metric g_{ij}. Vectors (v, n, b) are contravariant. When g is the identity
// D^{ij}, D^i_j and D_{ij} coincide.

#include <Eigen/Dense>

namespace fpb {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr int kMaxDim = 16;

struct DiffusionModel {
  Matrix D;  // D^{ij}, length^2/time
  Matrix g;  // g_{ij}; identity when left empty before validation
  Vector v;  // drift v^i, length/time; zero when left empty
  Vector n;  // inward unit normal n^i

  int dim() const { return static_cast<int>(D.rows()); }
};

struct ModelCheck {
  DiffusionModel model;
  double max_asymmetry = 0.0;  // relative, over D and g
};

/// Enforces symmetry, positive definiteness and |n|_g = 1.
///
/// Throws Error{NonSymmetric} when the relative asymmetry of D or g exceeds
/// `symmetry_tol`, Error{NotPositiveDefinite} for any eigenvalue <= 0,
/// Error{ZeroNormal} for a vanishing normal and Error{DimensionMismatch} for
/// inconsistent shapes or a dimension outside [2, kMaxDim].
ModelCheck validate_model(const DiffusionModel& model, double symmetry_tol = 1e-10);

/// D^i_j = sum_k D^{ik} g_{kj}.
Matrix mixed_tensor(const DiffusionModel& model);

/// b^i = D^i_j n^j.
Vector boundary_singularity_vector(const DiffusionModel& model);

/// sum_{ij} D_{ij} n^i n^j, the normal-normal component of the lowered tensor.
double normal_diffusivity(const DiffusionModel& model);

/// omega = |b|_g. Throws DegenerateNormalDirection when it vanishes.
double normalization_omega(const DiffusionModel& model);

/// Surface tensor D^{ij} - b^i b^j / (D_{pk} n^p n^k). Its contraction with
/// g n vanishes identically.
Matrix surface_diffusion_tensor(const DiffusionModel& model);

struct BoundaryBasis {
  int dim = 0;
  // Columns e_1..e_{M-1}, n: a g-orthonormal frame adapted to the boundary,
  // components in the model's coordinates.
  Matrix frame;
  Matrix frame_inv;  // frame^T g
  // D^{ij} expressed in `frame`.
  Matrix frame_D;
  // M x (M-1); columns are the orthonormal surface eigenvectors b_alpha.
  Matrix surface_basis;
  Vector b_M;           // unit singular direction, b / omega
  double omega = 0.0;   // |b|_g
  double normal_D = 0.0;  // D_{ij} n^i n^j (equals frame_D(M-1, M-1))
  Vector eigenvalues;   // D_1..D_{M-1}, D_M
  Matrix u;             // maps b_Upsilon onto e_Upsilon
  Matrix u_inv;         // inverse of u
  double identity_residual = 0.0;  // Frobenius residual of the u_inv/D identity

  /// Linear map taking b-basis coordinates zeta to frame coordinates.
  Matrix zeta_to_frame() const;
  /// Linear map taking b-basis coordinates zeta to model coordinates.
  Matrix zeta_to_model() const;
};

/// Builds the boundary-adapted basis. Throws DegenerateNormalDirection when
/// D_{nn} <= 1e-10 * trace(D^i_j), EigenFailure if the surface eigensolve
/// fails or violates the diagonalisation identity.
BoundaryBasis build_boundary_basis(const DiffusionModel& model);

/// Model coordinates x -> b-basis coordinates zeta.
Vector to_boundary_coords(const BoundaryBasis& basis, const Vector& x);
/// b-basis coordinates zeta -> model coordinates x.
Vector from_boundary_coords(const BoundaryBasis& basis, const Vector& zeta);

/// Components of an M-vector in `frame` (x' = frame^{-1} x).
Vector to_frame(const BoundaryBasis& basis, const Vector& x);

/// g-orthogonal projection onto the boundary plane.
Vector tangential_part(const BoundaryBasis& basis, const Vector& x);

}  // namespace fpb
