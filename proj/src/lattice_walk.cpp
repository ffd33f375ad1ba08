#include "fpb/lattice_walk.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <random>
#include <string>
#include <thread>

#include "fpb/error.hpp"
#include "fpb/singularity_analysis.hpp"

namespace fpb {

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("FPB_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

LatticeSpec make_lattice(const BoundaryBasis& basis, const Vector& v, const Vector& v_surface,
                         double sigma, double l_upsilon, double tau_a) {
  const int m = basis.dim;
  if (!(tau_a > 0.0)) throw Error(ErrorCode::DomainError, "tau_a must be positive");
  if (sigma < 0.0 || l_upsilon < 0.0) {
    throw Error(ErrorCode::DomainError, "sigma and l_upsilon must be non-negative");
  }

  LatticeSpec spec;
  spec.dim = m;
  spec.tau_a = tau_a;
  spec.spacing = (2.0 * tau_a * m * basis.eigenvalues.array()).sqrt();

  const Vector vb = v.size() == 0 ? Vector::Zero(m) : to_boundary_coords(basis, v);
  spec.eps = tau_a * m * vb.array() / spec.spacing.array();

  // Only the tangential part of v_surface enters the boundary layer.
  const Vector vs = v_surface.size() == 0 ? Vector::Zero(m)
                                          : to_boundary_coords(basis, tangential_part(basis, v_surface));
  spec.eps_surface = tau_a * m * vs.head(m - 1).array() / spec.spacing.head(m - 1).array();

  const auto lb = lattice_from_continuum(sigma, l_upsilon, tau_a, basis.normal_D, m);
  spec.sigma_a = lb.sigma_a;
  spec.g_fold = lb.g_fold;
  spec.zeta_to_model = basis.zeta_to_model();

  const double eps_max = std::max(spec.eps.cwiseAbs().maxCoeff(), spec.eps_surface.cwiseAbs().maxCoeff());
  if (eps_max >= 0.5) {
    throw Error(ErrorCode::DriftTooLarge, "|eps| = " + std::to_string(eps_max) + ", reduce tau_a");
  }
  if (spec.sigma_a >= 1.0) {
    throw Error(ErrorCode::AbsorptionTooLarge, "sigma_a = " + std::to_string(spec.sigma_a));
  }
  return spec;
}

std::vector<HopMove> hop_distribution(const LatticeSpec& spec, NodeKind kind) {
  const int m = spec.dim;
  std::vector<HopMove> moves;
  if (kind == NodeKind::Internal) {
    for (int i = 0; i < m; ++i) {
      moves.push_back({HopMove::Step, i, +1, (1.0 + spec.eps(i)) / (2.0 * m)});
      moves.push_back({HopMove::Step, i, -1, (1.0 - spec.eps(i)) / (2.0 * m)});
    }
  } else {
    moves.push_back({HopMove::Step, m - 1, +1, (1.0 - spec.sigma_a) / m});
    moves.push_back({HopMove::Trap, m - 1, 0, spec.sigma_a / m});
    moves.push_back({HopMove::SurfaceJump, 0, 0, (m - 1.0) / m});
  }
  return moves;
}

std::vector<double> surface_hop_probabilities(const LatticeSpec& spec) {
  const int lateral = spec.dim - 1;
  std::vector<double> p(2 * lateral);
  for (int a = 0; a < lateral; ++a) {
    p[2 * a] = (1.0 + spec.eps_surface(a)) / (2.0 * lateral);
    p[2 * a + 1] = (1.0 - spec.eps_surface(a)) / (2.0 * lateral);
  }
  return p;
}

namespace {

// Lateral move from one uniform draw: axis from the integer part, direction
// from the fractional part.
inline void split_draw(double u, int axes, int& axis, double& frac) {
  const double x = u * axes;
  axis = std::min(static_cast<int>(x), axes - 1);
  frac = x - axis;
}

void jump_chain(const LatticeSpec& spec, Philox4x32& rng, std::int64_t* out) {
  const int lateral = spec.dim - 1;
  for (int h = 0; h < spec.g_fold; ++h) {
    int axis;
    double frac;
    split_draw(rng.uniform(), lateral, axis, frac);
    out[axis] += frac < 0.5 * (1.0 + spec.eps_surface(axis)) ? 1 : -1;
  }
}

// Multinomial counts over the 2(M-1) elementary hops by sequential binomials.
void jump_multinomial(const LatticeSpec& spec, Philox4x32& rng, std::int64_t* out) {
  const auto p = surface_hop_probabilities(spec);
  std::int64_t left = spec.g_fold;
  double p_left = 1.0;
  for (std::size_t c = 0; c < p.size() && left > 0; ++c) {
    std::int64_t count = left;
    if (c + 1 < p.size()) {
      const double q = std::clamp(p[c] / p_left, 0.0, 1.0);
      count = std::binomial_distribution<std::int64_t>(left, q)(rng);
    }
    out[c / 2] += (c % 2 == 0) ? count : -count;
    left -= count;
    p_left -= p[c];
  }
}

void jump_gaussian(const LatticeSpec& spec, Philox4x32& rng, std::int64_t* out) {
  const int lateral = spec.dim - 1;
  const double g = spec.g_fold;
  const double sd = std::sqrt(g / lateral);
  for (int a = 0; a < lateral; ++a) {
    std::normal_distribution<double> nd(g * spec.eps_surface(a) / lateral, sd);
    out[a] += std::llround(nd(rng));
  }
}

}  // namespace

void sample_surface_jump(const LatticeSpec& spec, Philox4x32& rng, SurfaceJumpMode mode,
                         std::int64_t* out) {
  const bool small = spec.g_fold <= kExactJumpThreshold;
  switch (mode) {
    case SurfaceJumpMode::Auto:
      small ? jump_chain(spec, rng, out) : jump_gaussian(spec, rng, out);
      break;
    case SurfaceJumpMode::Exact:
      small ? jump_chain(spec, rng, out) : jump_multinomial(spec, rng, out);
      break;
    case SurfaceJumpMode::Gaussian:
      jump_gaussian(spec, rng, out);
      break;
  }
}

namespace {

struct Walker {
  std::int64_t x[kMaxDim] = {};
  bool trapped = false;
  bool breach = false;
};

class Stepper {
 public:
  Stepper(const LatticeSpec& spec, SurfaceJumpMode mode) : spec_(spec), mode_(mode), m_(spec.dim) {
    for (int i = 0; i < m_; ++i) up_[i] = 0.5 * (1.0 + spec.eps(i));
    p_up_ = (1.0 - spec.sigma_a) / m_;
    p_trap_ = p_up_ + spec.sigma_a / m_;
  }

  void step(Walker& w, Philox4x32& rng) const {
    if (w.trapped) return;
    std::int64_t& n = w.x[m_ - 1];
    const double u = rng.uniform();
    if (n > 0) {
      int axis;
      double frac;
      split_draw(u, m_, axis, frac);
      w.x[axis] += frac < up_[axis] ? 1 : -1;
    } else if (u < p_up_) {
      n = 1;
    } else if (u < p_trap_) {
      w.trapped = true;
      return;
    } else {
      sample_surface_jump(spec_, rng, mode_, w.x);
    }
    if (spec_.layers > 0 && n >= spec_.layers) w.breach = true;
    if (spec_.lateral_half_width > 0) {
      for (int a = 0; a < m_ - 1; ++a) {
        if (std::abs(w.x[a]) >= spec_.lateral_half_width) w.breach = true;
      }
    }
  }

 private:
  const LatticeSpec& spec_;
  SurfaceJumpMode mode_;
  int m_;
  double up_[kMaxDim] = {};
  double p_up_ = 0.0, p_trap_ = 0.0;
};

void check_start(const LatticeSpec& spec, int n0) {
  if (n0 < 0) throw Error(ErrorCode::DomainError, "n0 must be non-negative");
  if (spec.dim < 2 || spec.dim > kMaxDim) throw Error(ErrorCode::DimensionMismatch, "bad lattice dimension");
}

// Runs `count` work items in contiguous batches over a thread pool. Work is
// claimed dynamically; results are written per batch and never shared.
template <class F>
void parallel_batches(std::size_t batches, int threads, F&& fn) {
  threads = static_cast<int>(std::min<std::size_t>(std::max(threads, 1), std::max<std::size_t>(batches, 1)));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t b; (b = next.fetch_add(1)) < batches;) fn(b);
  };
  if (threads == 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

// Per-walker contributions: trap indicator, displacement d and d d^T / 2
// for surviving walkers, in lattice and physical units.
struct Accumulator {
  int m = 0;
  double n = 0.0;
  double r = 0.0;
  Vector u, u2, up, up2;
  Matrix l, l2, lp, lp2;
  bool breach = false;

  explicit Accumulator(int dim = 0)
      : m(dim),
        u(Vector::Zero(dim)), u2(Vector::Zero(dim)), up(Vector::Zero(dim)), up2(Vector::Zero(dim)),
        l(Matrix::Zero(dim, dim)), l2(Matrix::Zero(dim, dim)),
        lp(Matrix::Zero(dim, dim)), lp2(Matrix::Zero(dim, dim)) {}

  void add(const Walker& w, int n0, const Matrix& to_phys, const Vector& spacing) {
    n += 1.0;
    breach = breach || w.breach;
    if (w.trapped) {
      r += 1.0;
      return;
    }
    Vector d(m);
    for (int i = 0; i < m; ++i) d(i) = static_cast<double>(w.x[i]);
    d(m - 1) -= n0;
    const Vector dp = to_phys * d.cwiseProduct(spacing);
    u += d;
    u2 += d.cwiseAbs2();
    up += dp;
    up2 += dp.cwiseAbs2();
    const Matrix h = 0.5 * d * d.transpose();
    const Matrix hp = 0.5 * dp * dp.transpose();
    l += h;
    l2 += h.cwiseAbs2();
    lp += hp;
    lp2 += hp.cwiseAbs2();
  }

  void merge(const Accumulator& o) {
    n += o.n;
    r += o.r;
    u += o.u;
    u2 += o.u2;
    up += o.up;
    up2 += o.up2;
    l += o.l;
    l2 += o.l2;
    lp += o.lp;
    lp2 += o.lp2;
    breach = breach || o.breach;
  }
};

template <class T>
T standard_error(const T& sum, const T& sum2, double n) {
  // sd of the per-walker contribution over sqrt(n)
  T mean = sum / n;
  T var = (sum2 / n - mean.cwiseAbs2()).cwiseMax(0.0) * (n / std::max(n - 1.0, 1.0));
  return (var / n).cwiseSqrt();
}

MomentEstimates finish(const Accumulator& acc, const LatticeSpec& spec, std::int64_t steps) {
  if (acc.n <= 0.0) throw Error(ErrorCode::EmptyEnsemble, "no walkers");
  const double n = acc.n;
  MomentEstimates e;
  e.steps = steps;
  e.tau = steps * spec.tau_a;
  e.walkers = static_cast<std::size_t>(n);
  e.R = acc.r / n;
  e.R_err = std::sqrt(std::max(e.R * (1.0 - e.R), 0.0) / std::max(n - 1.0, 1.0));
  e.U_lattice = acc.u / n;
  e.U_lattice_err = standard_error<Vector>(acc.u, acc.u2, n);
  e.L_lattice = acc.l / n;
  e.L_lattice_err = standard_error<Matrix>(acc.l, acc.l2, n);
  e.U = acc.up / n;
  e.U_err = standard_error<Vector>(acc.up, acc.up2, n);
  e.L = acc.lp / n;
  e.L_err = standard_error<Matrix>(acc.lp, acc.lp2, n);
  e.truncation_breach = acc.breach;
  return e;
}

}  // namespace

WalkerEnsemble simulate(const LatticeSpec& spec, int n0, std::int64_t steps, std::size_t walkers,
                        std::uint64_t seed, const WalkOptions& options) {
  check_start(spec, n0);
  const int m = spec.dim;
  WalkerEnsemble ens;
  ens.dim = m;
  ens.n0 = n0;
  ens.steps = steps;
  ens.seed = seed;
  ens.positions.assign(walkers * m, 0);
  ens.trapped.assign(walkers, 0);

  const Stepper stepper(spec, options.jump_mode);
  const std::size_t bs = std::max<std::size_t>(options.batch_size, 1);
  const std::size_t batches = (walkers + bs - 1) / bs;
  std::vector<std::uint8_t> breach(batches, 0);

  parallel_batches(batches, resolve_threads(options.threads), [&](std::size_t b) {
    for (std::size_t id = b * bs; id < std::min(walkers, (b + 1) * bs); ++id) {
      Philox4x32 rng(seed, id);
      Walker w;
      w.x[m - 1] = n0;
      for (std::int64_t t = 0; t < steps && !w.trapped; ++t) stepper.step(w, rng);
      std::copy(w.x, w.x + m, ens.positions.begin() + id * m);
      ens.trapped[id] = w.trapped;
      breach[b] |= w.breach;
    }
  });
  ens.truncation_breach = std::any_of(breach.begin(), breach.end(), [](auto f) { return f != 0; });
  return ens;
}

MomentEstimates estimate_moments(const WalkerEnsemble& ensemble, const LatticeSpec& spec) {
  if (ensemble.size() == 0) throw Error(ErrorCode::EmptyEnsemble, "ensemble has no walkers");
  const int m = ensemble.dim;
  Accumulator acc(m);
  Walker w;
  for (std::size_t id = 0; id < ensemble.size(); ++id) {
    std::copy_n(ensemble.positions.begin() + id * m, m, w.x);
    w.trapped = ensemble.trapped[id] != 0;
    acc.add(w, ensemble.n0, spec.zeta_to_model, spec.spacing);
  }
  acc.breach = ensemble.truncation_breach;
  return finish(acc, spec, ensemble.steps);
}

std::vector<MomentEstimates> simulate_moments(const LatticeSpec& spec, int n0,
                                              const std::vector<std::int64_t>& checkpoints,
                                              std::size_t walkers, std::uint64_t seed,
                                              const WalkOptions& options) {
  check_start(spec, n0);
  if (walkers == 0) throw Error(ErrorCode::EmptyEnsemble, "no walkers requested");
  if (!std::is_sorted(checkpoints.begin(), checkpoints.end()) ||
      (!checkpoints.empty() && checkpoints.front() < 0)) {
    throw Error(ErrorCode::DomainError, "checkpoints must be non-negative and ascending");
  }
  const int m = spec.dim;
  const Stepper stepper(spec, options.jump_mode);
  const std::size_t bs = std::max<std::size_t>(options.batch_size, 1);
  const std::size_t batches = (walkers + bs - 1) / bs;
  const std::size_t nc = checkpoints.size();
  std::vector<std::vector<Accumulator>> partial(batches);

  parallel_batches(batches, resolve_threads(options.threads), [&](std::size_t b) {
    auto& acc = partial[b];
    acc.assign(nc, Accumulator(m));
    for (std::size_t id = b * bs; id < std::min(walkers, (b + 1) * bs); ++id) {
      Philox4x32 rng(seed, id);
      Walker w;
      w.x[m - 1] = n0;
      std::int64_t t = 0;
      for (std::size_t c = 0; c < nc; ++c) {
        for (; t < checkpoints[c] && !w.trapped; ++t) stepper.step(w, rng);
        acc[c].add(w, n0, spec.zeta_to_model, spec.spacing);
      }
    }
  });

  std::vector<MomentEstimates> out;
  out.reserve(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    Accumulator total(m);
    for (const auto& part : partial) total.merge(part[c]);
    out.push_back(finish(total, spec, checkpoints[c]));
  }
  return out;
}

}  // namespace fpb
