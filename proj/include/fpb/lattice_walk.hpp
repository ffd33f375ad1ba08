#pragma once

// Lattice random walk near a flat boundary. Nodes carry integer coordinates
// (n^1..n^{M-1}, n) in the boundary-adapted basis; n = 0 is the boundary
// layer, which holds traps and supports g-fold jumps along the surface.

#include <cstdint>
#include <vector>

#include "fpb/rng.hpp"
#include "fpb/tensor_geometry.hpp"

namespace fpb {

inline constexpr int kExactJumpThreshold = 8;

enum class SurfaceJumpMode {
  Auto,      // exact hop chain for g <= kExactJumpThreshold, Gaussian above
  Exact,     // exact law for every g (multinomial sampling for long chains)
  Gaussian,  // rounded Gaussian for every g
};

struct LatticeSpec {
  int dim = 0;
  double tau_a = 0.0;
  Vector spacing;      // a_1..a_M along b_1..b_M
  Vector eps;          // internal drift parameters, b-basis
  double sigma_a = 0.0;
  int g_fold = 1;
  Vector eps_surface;  // M-1 boundary drift parameters
  // Truncation for the exact evolver; zero means unbounded.
  int layers = 0;
  int lateral_half_width = 0;
  Matrix zeta_to_model;  // maps b-basis displacements to model coordinates
};

/// Builds the lattice for a basis, bulk drift v, tangential boundary drift
/// v_surface (model coordinates), absorption rate sigma and surface
/// diffusion length l_upsilon.
///
/// Throws DriftTooLarge when any |eps| >= 0.5 and AbsorptionTooLarge when
/// sigma_a >= 1.
LatticeSpec make_lattice(const BoundaryBasis& basis, const Vector& v, const Vector& v_surface,
                         double sigma, double l_upsilon, double tau_a);

enum class NodeKind { Internal, Boundary };

struct HopMove {
  enum Kind { Step, Trap, SurfaceJump } kind = Step;
  int axis = 0;  // Step only
  int dir = 0;   // +1 or -1 for Step
  double p = 0.0;
};

/// Outgoing moves from a node. Boundary nodes list the upward step, the trap
/// and the g-fold surface jump as a single entry.
std::vector<HopMove> hop_distribution(const LatticeSpec& spec, NodeKind kind);

/// Probabilities of one elementary surface hop: index 2*alpha for +b_alpha,
/// 2*alpha+1 for -b_alpha.
std::vector<double> surface_hop_probabilities(const LatticeSpec& spec);

/// Lateral displacement (M-1 entries) of one g-fold surface jump.
void sample_surface_jump(const LatticeSpec& spec, Philox4x32& rng, SurfaceJumpMode mode,
                         std::int64_t* out);

struct WalkerEnsemble {
  int dim = 0;
  int n0 = 0;
  std::int64_t steps = 0;
  std::uint64_t seed = 0;
  std::vector<std::int64_t> positions;  // walker-major, dim entries each
  std::vector<std::uint8_t> trapped;    // trapped walkers keep their trap site in `positions`
  bool truncation_breach = false;

  std::size_t size() const { return trapped.size(); }
};

struct WalkOptions {
  SurfaceJumpMode jump_mode = SurfaceJumpMode::Auto;
  int threads = 0;  // 0: FPB_THREADS, else hardware concurrency
  std::size_t batch_size = 4096;
};

/// Evolves `walkers` independent walkers for `steps` hops from node
/// (0,..,0,n0). Walker w draws from Philox stream w of `seed`, so results do
/// not depend on the thread count.
WalkerEnsemble simulate(const LatticeSpec& spec, int n0, std::int64_t steps, std::size_t walkers,
                        std::uint64_t seed, const WalkOptions& options = {});

struct MomentEstimates {
  std::int64_t steps = 0;
  double tau = 0.0;
  std::size_t walkers = 0;
  double R = 0.0, R_err = 0.0;
  Vector U_lattice, U_lattice_err;  // lattice units, b-basis
  Matrix L_lattice, L_lattice_err;
  Vector U, U_err;                  // physical units, model coordinates
  Matrix L, L_err;
  bool truncation_breach = false;
};

/// Trapped fraction and surviving-walker displacement moments
/// U = sum d / N, L = sum d d^T / (2N). Throws EmptyEnsemble.
MomentEstimates estimate_moments(const WalkerEnsemble& ensemble, const LatticeSpec& spec);

/// Same estimators evaluated at each checkpoint (ascending step counts) of
/// a single run, without storing the ensemble.
std::vector<MomentEstimates> simulate_moments(const LatticeSpec& spec, int n0,
                                              const std::vector<std::int64_t>& checkpoints,
                                              std::size_t walkers, std::uint64_t seed,
                                              const WalkOptions& options = {});

/// Thread count resolution shared by the parallel components.
int resolve_threads(int requested);

}  // namespace fpb
