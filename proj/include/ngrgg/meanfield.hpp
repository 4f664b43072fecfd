#pragma once
// Coarse-grained macrostate dynamics on a periodic m x m grid.
//
// State per cell: concentrations (n_A, n_B) with n_AB = 1 - n_A - n_B. The
// order parameter is s = n_A - n_B; the local mean field mu is the average of
// s over the disk of radius r around each cell (equal weights on all cells
// whose center lies within r). With f = (1+mu)/2,
//
//   dn_A/dt = f*n_AB - (1-f)*n_A,      dn_B/dt = (1-f)*n_AB - f*n_B.
//
// With a committed fraction q > 0 the mean-field closure replaces mu by the
// self-consistent disk average of (1-q)*4mu/(mu^2+3) + q, updated once per
// step from the previous mu field.
//
// The A<->B relabeling (swap n_A/n_B) commutes with step() bit-exactly: all
// per-cell expressions are written in the symmetric (f_A, f_B) form and the
// disk average is a plain sum, which negates exactly.

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ngrgg/geometry.hpp"
#include "ngrgg/io.hpp"
#include "ngrgg/parallel.hpp"
#include "ngrgg/rng.hpp"

namespace ngrgg {

// Slow-manifold order parameter: s*(mu) = 4mu / (mu^2 + 3).
inline double slow_manifold_s(double mu) { return 4.0 * mu / (mu * mu + 3.0); }

// Local equilibrium of the per-cell dynamics at fixed word probability f.
inline std::pair<double, double> local_equilibrium(double f) {
  if (!(f >= 0.0 && f <= 1.0)) throw std::invalid_argument("f: require 0 <= f <= 1");
  const double denom = f * f - f + 1.0;
  return {f * f / denom, (1.0 - f) * (1.0 - f) / denom};
}

// Eigenvalues of the per-cell linearization at fixed f: -1 +/- sqrt(f(1-f)).
// The larger one is bounded by -1/2 (attained at f = 1/2).
inline std::pair<double, double> convergence_eigenvalues(double f) {
  if (!(f >= 0.0 && f <= 1.0)) throw std::invalid_argument("f: require 0 <= f <= 1");
  const double root = std::sqrt(f * (1.0 - f));
  return {-1.0 + root, -1.0 - root};
}

// Per-cell time derivative of (n_A, n_B) at word probability f = (1+mu)/2.
// Written via f_A = (1+mu)/2 and f_B = (1-mu)/2 so relabeling is exact.
inline std::pair<double, double> macro_rate(double n_a, double n_b, double mu) {
  const double f_a = (1.0 + mu) * 0.5;
  const double f_b = (1.0 - mu) * 0.5;
  const double n_ab = 1.0 - (n_a + n_b);
  return {f_a * n_ab - f_b * n_a, f_b * n_ab - f_a * n_b};
}

enum class ReactionModel { naming_game, voter, glauber };

// Reaction term of the slow (tau = t/2) dynamics ds/dtau = (mu - s) + Re(mu).
inline double reaction_term(double mu, ReactionModel model, double beta_j = 1.0) {
  switch (model) {
    case ReactionModel::naming_game:
      return mu * (1.0 - mu * mu) / (3.0 + mu * mu);
    case ReactionModel::voter:
      return 0.0;
    case ReactionModel::glauber:
      return std::tanh(beta_j * mu) - mu;
  }
  return 0.0;
}

// --- committed-agent fixed points ----------------------------------------

inline double critical_committed_fraction() { return 7.0 - 4.0 * std::sqrt(3.0); }

enum class RootStability { stable, unstable, marginal };

struct FixedPointRoot {
  double mu;
  RootStability stability;
};

struct FixedPointReport {
  double q = 0.0;
  double q_critical = 0.0;
  std::vector<FixedPointRoot> roots;
};

// Uniform fixed points of mu = (1-q)*4mu/(mu^2+3) + q, i.e. roots of
// (mu - 1)(mu^2 + (1-q)mu + 3q) = 0. mu = 1 is always present and stable.
// For q below the critical fraction the quadratic adds a stable root
// (q-1-sqrt(q^2-14q+1))/2 and an unstable root (q-1+sqrt(q^2-14q+1))/2.
inline FixedPointReport committed_fixed_points(double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("q: require 0 <= q <= 1");
  FixedPointReport rep;
  rep.q = q;
  rep.q_critical = critical_committed_fraction();
  rep.roots.push_back({1.0, RootStability::stable});
  const double disc = q * q - 14.0 * q + 1.0;
  if (std::abs(q - rep.q_critical) < 1e-14) {
    rep.roots.push_back({(q - 1.0) * 0.5, RootStability::marginal});  // double root
  } else if (q < rep.q_critical && disc > 0.0) {
    const double sq = std::sqrt(disc);
    rep.roots.push_back({(q - 1.0 - sq) * 0.5, RootStability::stable});
    rep.roots.push_back({(q - 1.0 + sq) * 0.5, RootStability::unstable});
  }
  return rep;
}

// --- disk stencil and disk average ---------------------------------------

// Set of grid offsets whose cell centers lie strictly within distance r,
// with equal weights summing to one.
struct DiskStencil {
  int max_dy = 0;                 // K: offsets dy in [-K, K]
  std::vector<int> half_width;    // indexed by dy + K; segment is [-w, w]
  std::size_t cell_count = 0;     // M
  std::size_t m = 0;
  double r = 0.0;

  static DiskStencil make(std::size_t m, double r) {
    if (!(r > 0.0) || !(r < 0.5))
      throw std::invalid_argument("radius: require 0 < r < 0.5");
    if (m < 2) throw std::invalid_argument("m: grid too small");
    DiskStencil st;
    st.m = m;
    st.r = r;
    const double rho2 = (r * static_cast<double>(m)) * (r * static_cast<double>(m));
    auto inside = [&](long dx, long dy) {
      return static_cast<double>(dx * dx + dy * dy) < rho2;
    };
    int K = 0;
    while (inside(0, K + 1)) ++K;
    st.max_dy = K;
    st.half_width.resize(2 * K + 1);
    for (int dy = -K; dy <= K; ++dy) {
      int w = 0;
      while (inside(w + 1, dy)) ++w;
      st.half_width[dy + K] = w;
      st.cell_count += static_cast<std::size_t>(2 * w + 1);
    }
    if (2 * static_cast<std::size_t>(K) + 1 > m)
      throw std::invalid_argument("radius: stencil does not fit the grid");
    return st;
  }

  std::vector<std::pair<int, int>> offsets() const {
    std::vector<std::pair<int, int>> out;
    out.reserve(cell_count);
    for (int dy = -max_dy; dy <= max_dy; ++dy) {
      const int w = half_width[dy + max_dy];
      for (int dx = -w; dx <= w; ++dx) out.emplace_back(dx, dy);
    }
    return out;
  }
};

// Reference implementation: direct sum over stencil offsets.
inline void disk_average_naive(const DiskStencil& st, std::span<const double> src,
                               std::span<double> dst) {
  const auto m = static_cast<long>(st.m);
  const double inv = 1.0 / static_cast<double>(st.cell_count);
  for (long y = 0; y < m; ++y) {
    for (long x = 0; x < m; ++x) {
      double sum = 0.0;
      for (int dy = -st.max_dy; dy <= st.max_dy; ++dy) {
        const long yy = (y + dy + m) % m;
        const double* row = src.data() + yy * m;
        const int w = st.half_width[dy + st.max_dy];
        for (int dx = -w; dx <= w; ++dx) {
          const long xx = (x + dx + m) % m;
          sum += row[xx];
        }
      }
      dst[y * m + x] = sum * inv;
    }
  }
}

// Fast path: per-row cyclic prefix sums, then each disk row contributes the
// difference of two prefix entries. Same cell set and weights as the naive
// sum, so results agree to rounding noise.
inline void disk_average(const DiskStencil& st, std::span<const double> src,
                         std::span<double> dst, unsigned threads = 0) {
  const std::size_t m = st.m;
  const std::size_t stride = m + 1;
  static thread_local std::vector<double> prefix_buf;
  prefix_buf.assign(m * stride, 0.0);
  double* const prefix = prefix_buf.data();
  for (std::size_t y = 0; y < m; ++y) {
    const double* row = src.data() + y * m;
    double* p = prefix + y * stride;
    double acc = 0.0;
    p[0] = 0.0;
    for (std::size_t x = 0; x < m; ++x) {
      acc += row[x];
      p[x + 1] = acc;
    }
  }
  const double inv = 1.0 / static_cast<double>(st.cell_count);
  const int K = st.max_dy;
  const long lm = static_cast<long>(m);

  auto do_row = [&, prefix](std::size_t y, double* acc) {
    for (std::size_t x = 0; x < m; ++x) acc[x] = 0.0;
    for (int dy = -K; dy <= K; ++dy) {
      const long yy = (static_cast<long>(y) + dy + lm) % lm;
      const double* p = prefix + static_cast<std::size_t>(yy) * stride;
      const double total = p[m];
      const long w = st.half_width[dy + K];
      // x in [0, w): segment wraps at the low end
      for (long x = 0; x < w; ++x)
        acc[x] += total - p[x - w + lm] + p[x + w + 1];
      // x in [w, m - w): fully interior
      for (long x = w; x < lm - w; ++x)
        acc[x] += p[x + w + 1] - p[x - w];
      // x in [m - w, m): segment wraps at the high end
      for (long x = lm - w; x < lm; ++x)
        acc[x] += total - p[x - w] + p[x + w + 1 - lm];
    }
    double* out = dst.data() + y * m;
    for (std::size_t x = 0; x < m; ++x) out[x] = acc[x] * inv;
  };

  if (threads == 0) threads = worker_count();
  if (threads <= 1) {
    std::vector<double> acc(m);
    for (std::size_t y = 0; y < m; ++y) do_row(y, acc.data());
  } else {
    parallel_for(
        threads,
        [&](std::size_t chunk) {
          std::vector<double> acc(m);
          const std::size_t lo = m * chunk / threads;
          const std::size_t hi = m * (chunk + 1) / threads;
          for (std::size_t y = lo; y < hi; ++y) do_row(y, acc.data());
        },
        static_cast<unsigned>(threads));
  }
}

// --- field grid -----------------------------------------------------------

enum class FieldIntegrator { euler, rk4 };

class FieldGrid {
 public:
  // Resolution contract: h = 1/m <= r/5 so the interface (width ~ r) spans
  // at least ten cells.
  FieldGrid(std::size_t m, double r, double q = 0.0)
      : m_(m), r_(r), q_(q), stencil_(DiskStencil::make(m, r)) {
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("q: require 0 <= q <= 1");
    if (static_cast<double>(m) * r < 5.0)
      throw std::invalid_argument("grid: resolution contract h <= r/5 violated");
    n_a_.assign(m * m, 0.0);
    n_b_.assign(m * m, 1.0);
    mu_.assign(m * m, 0.0);
    s_.assign(m * m, 0.0);
    work_.assign(m * m, 0.0);
    refresh_mu_from_s();
  }

  std::size_t m() const { return m_; }
  std::size_t cells() const { return m_ * m_; }
  double h() const { return 1.0 / static_cast<double>(m_); }
  double r() const { return r_; }
  double q() const { return q_; }
  double t() const { return t_; }
  void set_time(double t) { t_ = t; }
  unsigned threads() const { return threads_; }
  void set_threads(unsigned t) { threads_ = t; }

  std::span<double> n_a() { return n_a_; }
  std::span<double> n_b() { return n_b_; }
  std::span<const double> n_a() const { return n_a_; }
  std::span<const double> n_b() const { return n_b_; }
  const std::vector<double>& mu() const { return mu_; }
  const DiskStencil& stencil() const { return stencil_; }

  std::size_t idx(std::size_t i, std::size_t j) const { return j * m_ + i; }
  // cell centers at ((i+1/2)h, (j+1/2)h)
  double cell_x(std::size_t i) const { return (static_cast<double>(i) + 0.5) * h(); }
  double cell_y(std::size_t j) const { return (static_cast<double>(j) + 0.5) * h(); }

  void set_cell(std::size_t i, std::size_t j, double na, double nb) {
    n_a_[idx(i, j)] = na;
    n_b_[idx(i, j)] = nb;
  }

  // s = n_A - n_B per cell.
  std::span<const double> order_parameter() {
    for (std::size_t k = 0; k < n_a_.size(); ++k) s_[k] = n_a_[k] - n_b_[k];
    return s_;
  }

  double mean_s() const {
    double sum = 0.0;
    for (std::size_t k = 0; k < n_a_.size(); ++k) sum += n_a_[k] - n_b_[k];
    return sum / static_cast<double>(n_a_.size());
  }

  // Fraction of the torus held by opinion A: sum (1+s)/2 * h^2.
  double domain_size_a() const {
    double sum = 0.0;
    for (std::size_t k = 0; k < n_a_.size(); ++k) sum += 1.0 + (n_a_[k] - n_b_[k]);
    return 0.5 * sum / static_cast<double>(n_a_.size());
  }

  // mu = disk average of s; used after initialization and when q == 0.
  void refresh_mu_from_s() {
    order_parameter();
    disk_average(stencil_, s_, mu_, threads_);
  }

  // Committed closure: mu <- diskavg((1-q)*s*(mu_prev) + q).
  void refresh_mu_committed() {
    for (std::size_t k = 0; k < mu_.size(); ++k)
      work_[k] = (1.0 - q_) * slow_manifold_s(mu_[k]) + q_;
    disk_average(stencil_, work_, mu_, threads_);
  }

  void refresh_mu() {
    if (q_ > 0.0) refresh_mu_committed();
    else refresh_mu_from_s();
  }

  FieldIntegrator integrator() const { return integrator_; }
  void set_integrator(FieldIntegrator it) { integrator_ = it; }

  // Advance one step (explicit Euler by default; classic RK4 behind the
  // flag, refreshing the mean field at every stage). Negative concentrations
  // are clamped at zero; violations beyond 1e-12 are renormalized and counted.
  void step(double dt) {
    if (!(dt > 0.0) || dt > 0.1)
      throw std::invalid_argument("dt: require 0 < dt <= 0.1");
    if (integrator_ == FieldIntegrator::euler) step_euler_impl(dt);
    else step_rk4_impl(dt);
    cell_steps_ += n_a_.size();
    t_ += dt;
  }

  std::uint64_t renormalization_events() const { return renorm_events_; }
  std::uint64_t cell_steps() const { return cell_steps_; }

 private:
  void apply_update(double dt, std::span<const double> da, std::span<const double> db) {
    const std::size_t total = n_a_.size();
    std::uint64_t ev = 0;
    for (std::size_t k = 0; k < total; ++k) {
      double na = n_a_[k] + dt * da[k];
      double nb = n_b_[k] + dt * db[k];
      if (na < 0.0) {
        if (na < -1e-12) ++ev;
        na = 0.0;
      }
      if (nb < 0.0) {
        if (nb < -1e-12) ++ev;
        nb = 0.0;
      }
      const double sum = na + nb;
      if (sum > 1.0 + 1e-12) {
        ++ev;
        na /= sum;
        nb /= sum;
      }
      n_a_[k] = na;
      n_b_[k] = nb;
    }
    renorm_events_ += ev;
  }

  void step_euler_impl(double dt) {
    refresh_mu();
    const std::size_t total = n_a_.size();
    const unsigned threads = threads_ ? threads_ : worker_count();
    std::vector<std::uint64_t> events(threads, 0);
    parallel_for(
        threads,
        [&](std::size_t chunk) {
          const std::size_t lo = total * chunk / threads;
          const std::size_t hi = total * (chunk + 1) / threads;
          std::uint64_t ev = 0;
          for (std::size_t k = lo; k < hi; ++k) {
            const double mu = mu_[k];
            const double f_a = (1.0 + mu) * 0.5;
            const double f_b = (1.0 - mu) * 0.5;
            double na = n_a_[k];
            double nb = n_b_[k];
            const double nab = 1.0 - (na + nb);
            na += dt * (f_a * nab - f_b * na);
            nb += dt * (f_b * nab - f_a * nb);
            if (na < 0.0) {
              if (na < -1e-12) ++ev;
              na = 0.0;
            }
            if (nb < 0.0) {
              if (nb < -1e-12) ++ev;
              nb = 0.0;
            }
            const double sum = na + nb;
            if (sum > 1.0 + 1e-12) {
              ++ev;
              na /= sum;
              nb /= sum;
            }
            n_a_[k] = na;
            n_b_[k] = nb;
          }
          events[chunk] = ev;
        },
        threads);
    for (auto ev : events) renorm_events_ += ev;
  }

  void step_rk4_impl(double dt) {
    const std::size_t total = n_a_.size();
    const std::vector<double> na0 = n_a_, nb0 = n_b_;
    std::vector<double> k1a(total), k1b(total), k2a(total), k2b(total),
        k3a(total), k3b(total), k4a(total), k4b(total);
    auto rates = [&](std::vector<double>& da, std::vector<double>& db) {
      refresh_mu();
      for (std::size_t k = 0; k < total; ++k) {
        const auto [a, b] = macro_rate(n_a_[k], n_b_[k], mu_[k]);
        da[k] = a;
        db[k] = b;
      }
    };
    auto stage = [&](double frac, const std::vector<double>& da,
                     const std::vector<double>& db) {
      for (std::size_t k = 0; k < total; ++k) {
        n_a_[k] = na0[k] + frac * dt * da[k];
        n_b_[k] = nb0[k] + frac * dt * db[k];
      }
    };
    rates(k1a, k1b);
    stage(0.5, k1a, k1b);
    rates(k2a, k2b);
    stage(0.5, k2a, k2b);
    rates(k3a, k3b);
    stage(1.0, k3a, k3b);
    rates(k4a, k4b);
    for (std::size_t k = 0; k < total; ++k) {
      k1a[k] = (k1a[k] + 2.0 * k2a[k] + 2.0 * k3a[k] + k4a[k]) / 6.0;
      k1b[k] = (k1b[k] + 2.0 * k2b[k] + 2.0 * k3b[k] + k4b[k]) / 6.0;
    }
    n_a_ = na0;
    n_b_ = nb0;
    apply_update(dt, k1a, k1b);
  }

 public:

 private:
  std::size_t m_;
  double r_;
  double q_;
  double t_ = 0.0;
  DiskStencil stencil_;
  std::vector<double> n_a_, n_b_, mu_, s_, work_;
  std::uint64_t renorm_events_ = 0;
  std::uint64_t cell_steps_ = 0;
  unsigned threads_ = 0;  // 0 = hardware default
  FieldIntegrator integrator_ = FieldIntegrator::euler;
};

// Full-field rhs at the given mu field (diagnostic / test hook).
inline void rhs(const FieldGrid& grid, std::span<const double> mu,
                std::span<double> da, std::span<double> db) {
  const auto na = grid.n_a();
  const auto nb = grid.n_b();
  for (std::size_t k = 0; k < na.size(); ++k) {
    const auto [a, b] = macro_rate(na[k], nb[k], mu[k]);
    da[k] = a;
    db[k] = b;
  }
}

// --- field initializers ---------------------------------------------------

inline void init_uniform(FieldGrid& g, double n_a, double n_b) {
  if (n_a < 0.0 || n_b < 0.0 || n_a + n_b > 1.0 + 1e-12)
    throw std::invalid_argument("n: require n_A, n_B >= 0 and n_A + n_B <= 1");
  for (std::size_t k = 0; k < g.cells(); ++k) {
    g.n_a()[k] = n_a;
    g.n_b()[k] = n_b;
  }
  g.refresh_mu_from_s();
}

// Sharp disk of A in a B background.
inline void init_disk(FieldGrid& g, TorusPoint center, double R0) {
  const std::size_t m = g.m();
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < m; ++i) {
      const bool in = torus_distance({g.cell_x(i), g.cell_y(j)}, center) < R0;
      g.set_cell(i, j, in ? 1.0 : 0.0, in ? 0.0 : 1.0);
    }
  }
  g.refresh_mu_from_s();
}

// Band of A with x in [x0, x0 + width) (mod 1).
inline void init_stripe(FieldGrid& g, double x0, double width) {
  const std::size_t m = g.m();
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < m; ++i) {
      const bool in = wrap01(g.cell_x(i) - x0) < width;
      g.set_cell(i, j, in ? 1.0 : 0.0, in ? 0.0 : 1.0);
    }
  }
  g.refresh_mu_from_s();
}

// periods x periods alternating tiles; an unstable stationary pattern used
// to demonstrate decay at the tile corners.
inline void init_checkerboard(FieldGrid& g, int periods) {
  if (periods < 1) throw std::invalid_argument("periods: require >= 1");
  const std::size_t m = g.m();
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < m; ++i) {
      const int ti = static_cast<int>(g.cell_x(i) * periods) & 1;
      const int tj = static_cast<int>(g.cell_y(j) * periods) & 1;
      const bool a_side = (ti ^ tj) != 0;
      g.set_cell(i, j, a_side ? 1.0 : 0.0, a_side ? 0.0 : 1.0);
    }
  }
  g.refresh_mu_from_s();
}

// Smooth random start near the mixed state: white noise of the given
// amplitude in s, smoothed once over the interaction disk, then placed on
// the local-equilibrium manifold n = n*(f = (1+s)/2).
inline void init_random_smooth(FieldGrid& g, Rng& rng, double amplitude = 0.1) {
  const std::size_t total = g.cells();
  std::vector<double> noise(total), smooth(total);
  for (auto& v : noise) v = amplitude * (2.0 * uniform01(rng) - 1.0);
  disk_average(g.stencil(), noise, smooth, g.threads());
  for (std::size_t k = 0; k < total; ++k) {
    const auto [na, nb] = local_equilibrium(0.5 * (1.0 + smooth[k]));
    g.n_a()[k] = na;
    g.n_b()[k] = nb;
  }
  g.refresh_mu_from_s();
}

// --- committed mean field, standalone fixed point -------------------------

struct CommittedMuResult {
  std::vector<double> mu;
  bool converged = false;
  std::size_t sweeps = 0;
};

// Iterates mu <- diskavg((1-q)*s*(mu) + q) to a fixed point for stationary
// analysis. Flags non-convergence after max_sweeps.
inline CommittedMuResult committed_mu_fixed_point(std::size_t m, double r, double q,
                                                  std::vector<double> mu0,
                                                  double tol = 1e-12,
                                                  std::size_t max_sweeps = 100000) {
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("q: require 0 <= q <= 1");
  const DiskStencil st = DiskStencil::make(m, r);
  CommittedMuResult res;
  res.mu = std::move(mu0);
  if (res.mu.size() != m * m) throw std::invalid_argument("mu0: size mismatch");
  std::vector<double> u(m * m), next(m * m);
  for (std::size_t sweep = 1; sweep <= max_sweeps; ++sweep) {
    for (std::size_t k = 0; k < u.size(); ++k)
      u[k] = (1.0 - q) * slow_manifold_s(res.mu[k]) + q;
    disk_average(st, u, next);
    double delta = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k)
      delta = std::max(delta, std::abs(next[k] - res.mu[k]));
    res.mu.swap(next);
    res.sweeps = sweep;
    if (delta < tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

// --- stationary layer profile ---------------------------------------------

// One-dimensional interface between mu = -1 and mu = +1 in layer units
// xi = (x - x0)/r. The disk average reduces to the chord kernel
// w(u) = (2/pi) sqrt(1 - u^2) on [-1, 1], and the stationary profile solves
// mu(xi) = integral w(u) * s*(mu(xi + u)) du.
struct LayerProfile {
  std::vector<double> xi;
  std::vector<double> mu;
  double slope_at_center = 0.0;  // gamma*
  bool converged = false;
  std::size_t sweeps = 0;
};

inline LayerProfile stationary_layer_profile(double half_width = 6.0,
                                             std::size_t pts_per_unit = 200,
                                             double tol = 1e-12,
                                             std::size_t max_sweeps = 100000,
                                             double damping = 0.5,
                                             bool start_from_constant = false) {
  if (!(half_width > 2.0)) throw std::invalid_argument("half_width: require > 2");
  if (pts_per_unit < 10) throw std::invalid_argument("pts_per_unit: require >= 10");
  const double dxi = 1.0 / static_cast<double>(pts_per_unit);
  const auto half_n = static_cast<long>(std::llround(half_width * pts_per_unit));
  const long n = 2 * half_n + 1;

  // cell-integrated chord kernel: W(u) = (u sqrt(1-u^2) + asin u) / pi
  auto W = [](double u) {
    u = std::clamp(u, -1.0, 1.0);
    return (u * std::sqrt(std::max(0.0, 1.0 - u * u)) + std::asin(u)) / M_PI;
  };
  const auto kr = static_cast<long>(pts_per_unit);
  std::vector<double> w(2 * kr + 1);
  double wsum = 0.0;
  for (long j = -kr; j <= kr; ++j) {
    const double u = static_cast<double>(j) * dxi;
    w[j + kr] = W(u + 0.5 * dxi) - W(u - 0.5 * dxi);
    wsum += w[j + kr];
  }
  for (auto& v : w) v /= wsum;

  LayerProfile prof;
  prof.xi.resize(n);
  prof.mu.resize(n);
  for (long k = 0; k < n; ++k) {
    prof.xi[k] = static_cast<double>(k - half_n) * dxi;
    prof.mu[k] = start_from_constant ? 1.0 : std::tanh(prof.xi[k]);
  }

  std::vector<double> next(n);
  auto mu_at = [&](long k) {
    if (k < 0) return -1.0;  // boundary condition mu(-inf) = -1
    if (k >= n) return 1.0;  // boundary condition mu(+inf) = +1
    return prof.mu[k];
  };
  for (std::size_t sweep = 1; sweep <= max_sweeps; ++sweep) {
    double delta = 0.0;
    for (long k = 0; k < n; ++k) {
      double acc = 0.0;
      for (long j = -kr; j <= kr; ++j) acc += w[j + kr] * slow_manifold_s(mu_at(k + j));
      next[k] = acc;
      delta = std::max(delta, std::abs(acc - prof.mu[k]));
    }
    for (long k = 0; k < n; ++k)
      prof.mu[k] += damping * (next[k] - prof.mu[k]);
    // odd projection pins the layer center at xi = 0
    for (long k = 0; k < n; ++k) {
      const double odd = 0.5 * (prof.mu[k] - prof.mu[n - 1 - k]);
      prof.mu[k] = odd;
      prof.mu[n - 1 - k] = -odd;
    }
    prof.sweeps = sweep;
    if (delta < tol) {
      prof.converged = true;
      break;
    }
  }
  prof.slope_at_center = (prof.mu[half_n + 1] - prof.mu[half_n - 1]) / (2.0 * dxi);
  return prof;
}

// --- boundary propagation prediction ---------------------------------------

// dR/dt for a circular domain boundary of curvature radius R; negative
// (motion toward the center of curvature). Valid for R >> r; perturbative_ok
// is cleared when R < 5r.
inline double boundary_speed_prediction(double R, double r, bool* perturbative_ok = nullptr) {
  if (!(R > 0.0) || !(r > 0.0)) throw std::invalid_argument("R, r: require > 0");
  if (perturbative_ok) *perturbative_ok = (R >= 5.0 * r);
  return -(r * r) / (9.0 * R);
}

// Mean field felt at the interface of a disk of radius R: gamma* r / (6R).
inline double interface_mean_field_estimate(double R, double r, double gamma_star = 1.034) {
  if (!(R > 0.0) || !(r > 0.0)) throw std::invalid_argument("R, r: require > 0");
  return gamma_star * r / (6.0 * R);
}

// --- field I/O --------------------------------------------------------------

// Plain-text graymap of s mapped linearly from [-1,1] to [0,255].
inline void write_pgm(std::ostream& os, FieldGrid& g) {
  const auto s = g.order_parameter();
  const std::size_t m = g.m();
  os << "P2\n" << m << ' ' << m << "\n255\n";
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < m; ++i) {
      const int v = static_cast<int>(std::lround((s[j * m + i] + 1.0) * 127.5));
      os << std::clamp(v, 0, 255) << (i + 1 == m ? '\n' : ' ');
    }
  }
}

inline std::string snapshot_filename(double t) {
  return "snap_t" + fmt_g(t) + ".pgm";
}

// Exact state dump, one row per cell: i,j,n_A,n_B.
inline void write_field_csv(std::ostream& os, const FieldGrid& g) {
  os << "i,j,n_A,n_B\n";
  const std::size_t m = g.m();
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t i = 0; i < m; ++i)
      os << i << ',' << j << ',' << fmt_exact(g.n_a()[j * m + i]) << ','
         << fmt_exact(g.n_b()[j * m + i]) << '\n';
}

inline void read_field_csv(std::istream& in, FieldGrid& g) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("field csv: empty");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t i, j;
    double na, nb;
    if (std::sscanf(line.c_str(), "%zu,%zu,%lf,%lf", &i, &j, &na, &nb) != 4)
      throw std::runtime_error("field csv: bad row: " + line);
    if (i >= g.m() || j >= g.m()) throw std::runtime_error("field csv: index out of range");
    g.set_cell(i, j, na, nb);
    ++rows;
  }
  if (rows != g.cells()) throw std::runtime_error("field csv: wrong cell count");
  g.refresh_mu_from_s();
}

struct FieldSample {
  double t = 0.0;
  double mean_s = 0.0;
  double domain_size_a = 0.0;
  double min_n_ab = 0.0;
};

inline FieldSample sample_field(const FieldGrid& g) {
  FieldSample fs;
  fs.t = g.t();
  fs.mean_s = g.mean_s();
  fs.domain_size_a = g.domain_size_a();
  double mn = 1.0;
  for (std::size_t k = 0; k < g.cells(); ++k)
    mn = std::min(mn, 1.0 - (g.n_a()[k] + g.n_b()[k]));
  fs.min_n_ab = mn;
  return fs;
}

inline void write_field_series_csv(std::ostream& os, std::span<const FieldSample> rows) {
  os << "t,mean_s,domain_size_A,min_n_AB\n";
  for (const auto& fs : rows)
    os << fmt_g(fs.t) << ',' << fmt_g(fs.mean_s) << ',' << fmt_g(fs.domain_size_a)
       << ',' << fmt_g(fs.min_n_ab) << '\n';
}

}  // namespace ngrgg
