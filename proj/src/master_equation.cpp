#include "fpb/master_equation.hpp"

#include <algorithm>
#include <array>
#include <boost/math/tools/toms748_solve.hpp>
#include <cmath>
#include <limits>
#include <string>

#include "fpb/error.hpp"

namespace fpb {

std::size_t ProbabilityGrid::lateral_size() const {
  std::size_t n = 1;
  for (int a = 0; a < dim - 1; ++a) n *= static_cast<std::size_t>(width());
  return n;
}

std::size_t ProbabilityGrid::lateral_index(const std::int64_t* m) const {
  std::size_t idx = 0, stride = 1;
  for (int a = 0; a < dim - 1; ++a) {
    idx += static_cast<std::size_t>(m[a] + half_width) * stride;
    stride *= static_cast<std::size_t>(width());
  }
  return idx;
}

double ProbabilityGrid::node_mass() const {
  double s = 0.0;
  for (double p : P) s += p;
  return s;
}

double ProbabilityGrid::trap_mass() const {
  double s = 0.0;
  for (double p : traps) s += p;
  return s;
}

double ProbabilityGrid::edge_mass() const {
  const std::size_t lat = lateral_size();
  const int w = width();
  double s = 0.0;
  for (std::size_t l = 0; l < lat; ++l) s += P[(layers - 1) * lat + l];
  for (int n = 0; n + 1 < layers; ++n) {
    const double* row = &P[n * lat];
    if (dim == 2) {
      s += row[0] + row[w - 1];
      continue;
    }
    for (int x = 0; x < w; ++x) s += row[x] + row[(w - 1) * w + x];
    for (int y = 1; y + 1 < w; ++y) s += row[y * w] + row[y * w + w - 1];
  }
  return s;
}

int default_layers(const LatticeSpec& spec, int n0, std::int64_t T) {
  const int m = spec.dim;
  const double spread = 8.0 * std::sqrt(static_cast<double>(T) / m) + std::abs(spec.eps(m - 1)) * T / m;
  return n0 + static_cast<int>(std::ceil(spread)) + 10;
}

int default_half_width(const LatticeSpec& spec, std::int64_t T) {
  const int m = spec.dim;
  const double g = spec.g_fold;
  double drift = 0.0;
  for (int a = 0; a < m - 1; ++a) {
    drift = std::max(drift, std::abs(spec.eps(a)) / m + g * std::abs(spec.eps_surface(a)) / m);
  }
  const double spread = 8.0 * std::sqrt(static_cast<double>(T) * std::max(1.0, g) / m) + drift * T;
  return static_cast<int>(std::ceil(spread)) + spec.g_fold + 10;
}

namespace {

void require_spec(const LatticeSpec& spec, int n0) {
  if (spec.dim < 2 || spec.dim > kMaxDim) throw Error(ErrorCode::DimensionMismatch, "bad lattice dimension");
  if (n0 < 0) throw Error(ErrorCode::DomainError, "n0 must be non-negative");
}

// Law of one g-fold surface jump on a dense (2g+1)^(M-1) box, by repeated
// convolution of the single-hop law.
struct JumpKernel {
  std::vector<std::array<int, 2>> offset;
  std::vector<double> weight;
};

JumpKernel surface_kernel(const LatticeSpec& spec) {
  const int lat = spec.dim - 1;
  const int g = spec.g_fold;
  const int w = 2 * g + 1;
  const auto hop = surface_hop_probabilities(spec);
  const std::size_t size = lat == 1 ? w : static_cast<std::size_t>(w) * w;
  std::vector<double> cur(size, 0.0), next(size);
  auto at = [&](int x, int y) { return static_cast<std::size_t>(x + g) + (lat == 1 ? 0 : static_cast<std::size_t>(y + g) * w); };
  cur[at(0, 0)] = 1.0;
  for (int h = 0; h < g; ++h) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int y = (lat == 1 ? 0 : -h); y <= (lat == 1 ? 0 : h); ++y) {
      for (int x = -h; x <= h; ++x) {
        const double p = cur[at(x, y)];
        if (p == 0.0) continue;
        next[at(x + 1, y)] += p * hop[0];
        next[at(x - 1, y)] += p * hop[1];
        if (lat == 2) {
          next[at(x, y + 1)] += p * hop[2];
          next[at(x, y - 1)] += p * hop[3];
        }
      }
    }
    cur.swap(next);
  }
  JumpKernel k;
  for (int y = (lat == 1 ? 0 : -g); y <= (lat == 1 ? 0 : g); ++y) {
    for (int x = -g; x <= g; ++x) {
      const double p = cur[at(x, y)];
      if (p > 0.0) {
        k.offset.push_back({x, y});
        k.weight.push_back(p);
      }
    }
  }
  return k;
}

}  // namespace

namespace {

// Moments over layers 0..top and lateral offsets |x| <= b; returns the node mass.
double box_moments(const ProbabilityGrid& grid, int n0, int top, int b, double& R, Vector& U, Matrix& L) {
  const int m = grid.dim;
  const int w = grid.width();
  const int H = grid.half_width;
  const std::size_t lat = grid.lateral_size();
  const int by = m == 3 ? b : 0;
  double mass = 0.0, u[3] = {0, 0, 0}, l[3][3] = {};
  for (int n = 0; n <= top; ++n) {
    const double dn = n - n0;
    for (int y = -by; y <= by; ++y) {
      const double* row = &grid.P[n * lat + (m == 3 ? static_cast<std::size_t>(y + H) * w : 0) + H];
      for (int x = -b; x <= b; ++x) {
        const double p = row[x];
        if (p == 0.0) continue;
        const double d[3] = {double(x), m == 3 ? double(y) : dn, dn};
        mass += p;
        for (int i = 0; i < m; ++i) {
          u[i] += p * d[i];
          for (int j = 0; j <= i; ++j) l[i][j] += p * d[i] * d[j];
        }
      }
    }
  }
  R = grid.trap_mass();
  U.resize(m);
  L.resize(m, m);
  for (int i = 0; i < m; ++i) {
    U(i) = u[i];
    for (int j = 0; j <= i; ++j) L(i, j) = L(j, i) = 0.5 * l[i][j];
  }
  return mass;
}

}  // namespace

void discrete_moments(const ProbabilityGrid& grid, int n0, double& R, Vector& U, Matrix& L) {
  box_moments(grid, n0, grid.layers - 1, grid.half_width, R, U, L);
}

MomentSeries discrete_moments(const std::vector<ProbabilityGrid>& history, int n0) {
  MomentSeries s;
  if (history.empty()) return s;
  s.dim = history.front().dim;
  s.n0 = n0;
  for (const auto& g : history) {
    double r;
    Vector u;
    Matrix l;
    discrete_moments(g, n0, r, u, l);
    s.R.push_back(r);
    s.U.push_back(u);
    s.L.push_back(l);
    s.mass.push_back(g.node_mass());
  }
  return s;
}

EvolveResult evolve(const LatticeSpec& spec, int n0, std::int64_t T, const EvolveOptions& options) {
  require_spec(spec, n0);
  const int m = spec.dim;
  if (m > 3) throw Error(ErrorCode::DimensionMismatch, "full-grid evolution supports M = 2 or 3");

  ProbabilityGrid grid;
  grid.dim = m;
  grid.layers = options.layers > 0 ? options.layers : default_layers(spec, n0, T);
  grid.half_width = options.half_width > 0 ? options.half_width : default_half_width(spec, T);
  if (grid.layers <= n0 + 1) throw Error(ErrorCode::TruncationBreach, "too few layers for the start node");
  const std::size_t lat = grid.lateral_size();
  grid.P.assign(lat * grid.layers, 0.0);
  grid.traps.assign(lat, 0.0);
  std::int64_t origin[2] = {0, 0};
  grid.P[n0 * lat + grid.lateral_index(origin)] = 1.0;

  const JumpKernel kernel = surface_kernel(spec);
  const int w = grid.width();
  const int H = grid.half_width;
  const double p_up = (1.0 - spec.sigma_a) / m;
  const double p_trap = spec.sigma_a / m;
  const double p_jump = (m - 1.0) / m;
  double up[kMaxDim], down[kMaxDim];
  for (int i = 0; i < m; ++i) {
    up[i] = (1.0 + spec.eps(i)) / (2.0 * m);
    down[i] = (1.0 - spec.eps(i)) / (2.0 * m);
  }
  const std::size_t stride[2] = {1, static_cast<std::size_t>(w)};

  EvolveResult result;
  std::vector<double> next(grid.P.size());
  auto record = [&] {
    double r;
    Vector u;
    Matrix l;
    const int top = static_cast<int>(std::min<std::int64_t>(grid.layers - 1, n0 + grid.t));
    const int b = static_cast<int>(std::min<std::int64_t>(H, grid.t * std::max(1, spec.g_fold)));
    const double mass = box_moments(grid, n0, top, b, r, u, l);
    result.moments.R.push_back(r);
    result.moments.U.push_back(u);
    result.moments.L.push_back(l);
    result.moments.mass.push_back(mass);
    result.max_mass_error = std::max(result.max_mass_error, std::abs(mass + r - 1.0));
    const double edge = grid.edge_mass();
    result.max_edge_mass = std::max(result.max_edge_mass, edge);
    if (edge > options.edge_tol) {
      throw Error(ErrorCode::TruncationBreach,
                  "edge mass " + std::to_string(edge) + " at t=" + std::to_string(grid.t));
    }
    if (std::binary_search(options.snapshots.begin(), options.snapshots.end(), grid.t)) {
      result.snapshots.push_back(grid);
    }
    if (options.observer) options.observer(grid);
  };
  result.moments.dim = m;
  result.moments.n0 = n0;
  record();

  const int reach = std::max(1, spec.g_fold);
  for (std::int64_t t = 0; t < T; ++t) {
    // Only the reachable box can hold mass after t steps.
    const int top = static_cast<int>(std::min<std::int64_t>(grid.layers - 1, n0 + t));
    const int bx = static_cast<int>(std::min<std::int64_t>(H, t * reach));
    const int by = m == 3 ? bx : 0;
    const int ty = static_cast<int>(std::min<std::int64_t>(grid.layers - 1, n0 + t + 1));
    const int nbx = static_cast<int>(std::min<std::int64_t>(H, (t + 1) * reach));
    const int nby = m == 3 ? nbx : 0;
    for (int n = 0; n <= ty; ++n)
      for (int y = -nby; y <= nby; ++y)
        std::fill_n(&next[n * lat + static_cast<std::size_t>(y + H) * (m == 3 ? w : 0) + (H - nbx)], 2 * nbx + 1, 0.0);

    for (int n = 0; n <= top; ++n) {
      const std::size_t base = n * lat;
      for (int y = -by; y <= by; ++y) {
        const std::size_t row = base + (m == 3 ? static_cast<std::size_t>(y + H) * w : 0);
        for (int x = -bx; x <= bx; ++x) {
          const std::size_t l = row + static_cast<std::size_t>(x + H) - base;
          const double p = grid.P[base + l];
          if (p < std::numeric_limits<double>::min()) continue;  // denormals are dropped, they are very slow
          const int c[2] = {x, y};
          if (n == 0) {
            next[lat + l] += p * p_up;
            grid.traps[l] += p * p_trap;
            for (std::size_t j = 0; j < kernel.weight.size(); ++j) {
              const int xx = std::clamp(x + kernel.offset[j][0], -H, H);
              const int yy = std::clamp(y + kernel.offset[j][1], -H, H);
              next[static_cast<std::size_t>(xx + H) + (m == 3 ? static_cast<std::size_t>(yy + H) * w : 0)] +=
                  p * p_jump * kernel.weight[j];
            }
            continue;
          }
          for (int a = 0; a < m - 1; ++a) {
            next[base + l + (c[a] < H ? stride[a] : 0)] += p * up[a];
            next[base + l - (c[a] > -H ? stride[a] : 0)] += p * down[a];
          }
          next[(n + 1 < grid.layers ? base + lat : base) + l] += p * up[m - 1];
          next[base - lat + l] += p * down[m - 1];
        }
      }
    }
    grid.P.swap(next);
    grid.t = t + 1;
    record();
  }
  return result;
}

MomentSeries evolve_moments(const LatticeSpec& spec, int n0, std::int64_t T, int layers, double edge_tol) {
  require_spec(spec, n0);
  const int m = spec.dim;
  const int lat = m - 1;
  const int N = layers > 0 ? layers : default_layers(spec, n0, T);
  if (N <= n0 + 1) throw Error(ErrorCode::TruncationBreach, "too few layers for the start node");

  // Per layer: P, S^a = sum m^a P, Q^{ab} = sum m^a m^b P (column per layer).
  Vector P = Vector::Zero(N), P2(N);
  Matrix S = Matrix::Zero(lat, N), S2(lat, N);
  Matrix Q = Matrix::Zero(lat * lat, N), Q2(lat * lat, N);
  P(n0) = 1.0;
  double trapped = 0.0;

  const double g = spec.g_fold;
  const Vector mu = g * spec.eps_surface / lat;
  Matrix jump2 = (g / lat) * Matrix::Identity(lat, lat) +
                 (g * (g - 1.0) / (lat * lat)) * spec.eps_surface * spec.eps_surface.transpose();
  const Eigen::Map<const Vector> jump2_flat(jump2.data(), lat * lat);
  Matrix lateral2 = Matrix::Identity(lat, lat) / m;
  const Eigen::Map<const Vector> lateral2_flat(lateral2.data(), lat * lat);
  const Vector lat_eps = spec.eps.head(lat) / m;
  const double up = (1.0 + spec.eps(m - 1)) / (2.0 * m);
  const double down = (1.0 - spec.eps(m - 1)) / (2.0 * m);
  const double stay = (m - 1.0) / m;
  const double p_up = (1.0 - spec.sigma_a) / m;
  const double p_trap = spec.sigma_a / m;

  // Lateral second-moment update for a move with mean e and second moment
  // E: Q + e S^T + S e^T + E P, flattened column-major.
  auto q_update = [lat](const Vector& e, const Eigen::Ref<const Vector>& s, const Eigen::Ref<const Vector>& E,
                        double p) {
    Vector out = E * p;
    for (int b = 0; b < lat; ++b)
      for (int a = 0; a < lat; ++a) out(a + b * lat) += e(a) * s(b) + s(a) * e(b);
    return out;
  };

  MomentSeries series;
  series.dim = m;
  series.n0 = n0;
  auto record = [&] {
    Vector u = Vector::Zero(m);
    Matrix l = Matrix::Zero(m, m);
    Vector qsum = Q.rowwise().sum();
    u.head(lat) = S.rowwise().sum();
    l.topLeftCorner(lat, lat) = 0.5 * Eigen::Map<Matrix>(qsum.data(), lat, lat);
    double mass = 0.0;
    for (int n = 0; n < N; ++n) {
      const double d = n - n0;
      u(m - 1) += d * P(n);
      l(m - 1, m - 1) += 0.5 * d * d * P(n);
      l.col(m - 1).head(lat) += 0.5 * d * S.col(n);
      mass += P(n);
    }
    l.row(m - 1).head(lat) = l.col(m - 1).head(lat).transpose();
    series.R.push_back(trapped);
    series.U.push_back(u);
    series.L.push_back(l);
    series.mass.push_back(mass);
    if (P(N - 1) > edge_tol) {
      throw Error(ErrorCode::TruncationBreach, "edge layer mass " + std::to_string(P(N - 1)));
    }
  };
  record();

  for (std::int64_t t = 0; t < T; ++t) {
    const int active = static_cast<int>(std::min<std::int64_t>(N, n0 + t + 1));
    const int touched = std::min(N, active + 1);
    P2.head(touched).setZero();
    S2.leftCols(touched).setZero();
    Q2.leftCols(touched).setZero();

    // Boundary layer.
    const double p0 = P(0);
    P2(1) += p_up * p0;
    S2.col(1) += p_up * S.col(0);
    Q2.col(1) += p_up * Q.col(0);
    trapped += p_trap * p0;
    P2(0) += stay * p0;
    S2.col(0) += stay * (S.col(0) + mu * p0);
    Q2.col(0) += stay * (Q.col(0) + q_update(mu, S.col(0), jump2_flat, p0));

    for (int n = 1; n < active; ++n) {
      const double p = P(n);
      if (p == 0.0 && S.col(n).isZero(0.0)) continue;
      const int above = n + 1 < N ? n + 1 : n;
      P2(above) += up * p;
      S2.col(above) += up * S.col(n);
      Q2.col(above) += up * Q.col(n);
      P2(n - 1) += down * p;
      S2.col(n - 1) += down * S.col(n);
      Q2.col(n - 1) += down * Q.col(n);
      // Lateral hops keep the layer.
      P2(n) += stay * p;
      S2.col(n) += stay * S.col(n) + lat_eps * p;
      Q2.col(n) += stay * Q.col(n) + q_update(lat_eps, S.col(n), lateral2_flat, p);
    }
    P.head(touched) = P2.head(touched);
    S.leftCols(touched) = S2.leftCols(touched);
    Q.leftCols(touched) = Q2.leftCols(touched);
    record();
  }
  return series;
}

LaplaceValue discrete_laplace(const std::vector<double>& series, double s, double rel_tol) {
  if (!(s > 0.0)) throw Error(ErrorCode::DomainError, "s must be positive");
  const std::size_t n = series.size();
  if (n < 2) throw Error(ErrorCode::SeriesTooShort, "need at least two samples");
  LaplaceValue out;
  // Horner-like backward sum keeps the smallest terms first.
  const double q = std::exp(-s);
  double sum = 0.0;
  for (std::size_t t = n; t-- > 0;) sum = series[t] + q * sum;
  const double last = series[n - 1];
  const double slope = series[n - 1] - series[n - 2];
  const double qT = std::exp(-s * static_cast<double>(n - 1));
  const double geo = q / (1.0 - q);
  out.tail = qT * (last * geo + slope * geo / (1.0 - q));
  out.value = sum + out.tail;
  if (std::abs(out.tail) > rel_tol * std::max(std::abs(out.value), 1e-300) && std::abs(out.tail) > 1e-300) {
    throw Error(ErrorCode::SeriesTooShort, "tail " + std::to_string(out.tail) + " vs value " +
                                               std::to_string(out.value) + "; extend the series");
  }
  return out;
}

TransformMoments discrete_laplace(const MomentSeries& series, double s, double rel_tol) {
  const int m = series.dim;
  TransformMoments out;
  out.s = s;
  out.U = Vector::Zero(m);
  out.L = Matrix::Zero(m, m);
  std::vector<double> buf(series.size());
  auto transform = [&](auto get) {
    for (std::size_t t = 0; t < series.size(); ++t) buf[t] = get(t);
    // Identically zero components carry no tail.
    if (std::all_of(buf.begin(), buf.end(), [](double x) { return x == 0.0; })) return 0.0;
    const auto v = discrete_laplace(buf, s, rel_tol);
    out.max_tail = std::max(out.max_tail, std::abs(v.tail / v.value));
    return v.value;
  };
  out.R = transform([&](std::size_t t) { return series.R[t]; });
  for (int i = 0; i < m; ++i) {
    out.U(i) = transform([&](std::size_t t) { return series.U[t](i); });
    for (int j = 0; j <= i; ++j) {
      out.L(i, j) = out.L(j, i) = transform([&](std::size_t t) { return series.L[t](i, j); });
    }
  }
  return out;
}

Complex phi_internal(const LatticeSpec& spec, Complex p, const Vector& k) {
  const int m = spec.dim;
  Complex v = std::cosh(p) - spec.eps(m - 1) * std::sinh(p);
  for (int a = 0; a < m - 1; ++a) v += Complex(std::cos(k(a)), spec.eps(a) * std::sin(k(a)));
  return v / static_cast<double>(m);
}

Complex phi_boundary(const LatticeSpec& spec, Complex p, const Vector& k) {
  const int m = spec.dim;
  Complex chi = 0.0;
  for (int a = 0; a < m - 1; ++a) chi += Complex(std::cos(k(a)), spec.eps_surface(a) * std::sin(k(a)));
  chi /= static_cast<double>(m - 1);
  return ((1.0 - spec.sigma_a) * std::exp(-p) + (m - 1.0) * std::pow(chi, spec.g_fold)) / static_cast<double>(m);
}

Complex solve_varpi(const LatticeSpec& spec, double s, const Vector& k) {
  if (!(s > 0.0)) throw Error(ErrorCode::DomainError, "s must be positive");
  const int m = spec.dim;
  if (k.size() != m - 1) throw Error(ErrorCode::DimensionMismatch, "k needs M-1 components");
  const double target = std::exp(s);
  const double eps_m = spec.eps(m - 1);
  auto residual = [&](Complex p) { return phi_internal(spec, p, k) - target; };

  if (k.isZero(0.0)) {
    auto f = [&](double p) { return residual(p).real(); };
    double hi = std::max(1.0, std::sqrt(2.0 * m * s));
    for (int i = 0; i < 200 && f(hi) <= 0.0; ++i) hi *= 2.0;
    if (!(f(hi) > 0.0)) throw Error(ErrorCode::RootNotFound, "no bracket for varpi");
    std::uintmax_t iters = 200;
    auto [a, b] = boost::math::tools::toms748_solve(f, 0.0, hi, f(0.0), f(hi),
                                                    boost::math::tools::eps_tolerance<double>(52), iters);
    double p = 0.5 * (a + b);
    // One Newton polish step.
    const double d = (std::sinh(p) - eps_m * std::cosh(p)) / m;
    if (d != 0.0) p -= f(p) / d;
    if (std::abs(f(p)) > 1e-12 * target) throw Error(ErrorCode::RootNotFound, "varpi residual too large");
    return p;
  }

  // Complex Newton from the small-p expansion cosh p ~ 1 + p^2 / 2.
  Complex c = target * static_cast<double>(m);
  for (int a = 0; a < m - 1; ++a) c -= Complex(std::cos(k(a)), spec.eps(a) * std::sin(k(a)));
  Complex p = std::sqrt(2.0 * (c - 1.0));
  if (p.real() < 0.0) p = -p;
  // Roots pair up symmetrically about p* = atanh(eps_M).
  const double pstar = std::atanh(eps_m);
  for (int pass = 0; pass < 2; ++pass) {
    for (int it = 0; it < 100; ++it) {
      const Complex d = (std::sinh(p) - eps_m * std::cosh(p)) / static_cast<double>(m);
      if (std::abs(d) == 0.0) break;
      const Complex step = residual(p) / d;
      p -= step;
      if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(p))) break;
    }
    if (p.real() > 0.0) break;
    p = 2.0 * pstar - p;
  }
  if (!(p.real() > 0.0) || std::abs(residual(p)) > 1e-12 * target) {
    throw Error(ErrorCode::RootNotFound, "complex Newton did not converge to Re varpi > 0");
  }
  return p;
}

Complex boundary_generation_function(const LatticeSpec& spec, double s, const Vector& k, int n0) {
  const Complex w = solve_varpi(spec, s, k);
  return std::exp(-w * static_cast<double>(n0)) / (1.0 - std::exp(-s) * phi_boundary(spec, w, k));
}

Complex generation_function(const LatticeSpec& spec, double s, Complex p, const Vector& k, int n0) {
  if (p.real() < 0.0) throw Error(ErrorCode::ConvergenceStrip, "Re p must be non-negative");
  const Complex w = solve_varpi(spec, s, k);
  const Complex big_phi = phi_internal(spec, p, k);
  const Complex small_phi = phi_boundary(spec, p, k);
  const double es = std::exp(s), inv = 1.0 / (1.0 - std::exp(-s));
  const Complex boundary = std::exp(-(w - p) * static_cast<double>(n0)) * (small_phi - big_phi) /
                           (1.0 - std::exp(-s) * phi_boundary(spec, w, k));
  return inv + ((big_phi - 1.0) * inv + boundary) / (es - big_phi);
}

TransformMoments closed_form_transforms(const LatticeSpec& spec, double s, int n0, const AsymptoticWindow& window) {
  require_spec(spec, n0);
  const int m = spec.dim;
  const int lat = m - 1;
  TransformMoments out;
  out.s = s;
  if (s < window.s_min || s > window.s_max) {
    out.warning = "s=" + std::to_string(s) + " outside the small-s window [" + std::to_string(window.s_min) + ", " +
                  std::to_string(window.s_max) + "]";
    if (window.strict) throw Error(ErrorCode::OutOfAsymptoticRange, out.warning);
  }
  out.varpi = solve_varpi(spec, s, Vector::Zero(lat)).real();
  const double phi0 = phi_boundary(spec, out.varpi, Vector::Zero(lat)).real();
  out.K_a = std::exp(-out.varpi * n0) / (s * (s + 1.0 - phi0));

  const double g = spec.g_fold;
  const double s2 = s * s;
  out.R = spec.sigma_a * out.K_a / m;
  out.U = Vector::Zero(m);
  out.L = Matrix::Zero(m, m);
  out.U(m - 1) = out.K_a / m + spec.eps(m - 1) / (m * s2);
  for (int a = 0; a < lat; ++a) {
    out.U(a) = (g - 1.0) * spec.eps_surface(a) * out.K_a / m + spec.eps(a) / (m * s2);
    for (int b = 0; b < lat; ++b) {
      const double delta = a == b ? 1.0 : 0.0;
      out.L(a, b) = (g - 1.0) / (2.0 * m) * (delta + g * spec.eps_surface(a) * spec.eps_surface(b) / lat) * out.K_a +
                    delta / (2.0 * m * s2);
    }
  }
  out.L(m - 1, m - 1) = 1.0 / (2.0 * m * s2);
  return out;
}

}  // namespace fpb
