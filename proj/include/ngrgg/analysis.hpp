#pragma once
// Measurement layer: pair correlations and scaling collapse, zero-level
// contour extraction on the torus, curvature/propagation-speed estimates,
// domain-size series and power-law fits, terminal-state classification.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "ngrgg/geometry.hpp"
#include "ngrgg/meanfield.hpp"
#include "ngrgg/microsim.hpp"
#include "ngrgg/rng.hpp"

namespace ngrgg {

// --- pair correlation -------------------------------------------------------

struct CorrelationBin {
  double L = 0.0;            // bin center
  double C = 0.0;            // mean product of s over sampled pairs
  std::uint64_t count = 0;   // samples in the bin; < 100 is low confidence
};

struct CorrelationCurve {
  double t = 0.0;
  double bin_width = 0.0;
  std::vector<CorrelationBin> bins;
};

namespace detail {

inline CorrelationCurve make_curve(double t, double bin_width,
                                   const std::vector<double>& sums,
                                   const std::vector<std::uint64_t>& counts) {
  CorrelationCurve curve;
  curve.t = t;
  curve.bin_width = bin_width;
  curve.bins.resize(sums.size());
  for (std::size_t k = 0; k < sums.size(); ++k) {
    curve.bins[k].L = (static_cast<double>(k) + 0.5) * bin_width;
    curve.bins[k].count = counts[k];
    curve.bins[k].C = counts[k] ? sums[k] / static_cast<double>(counts[k]) : 0.0;
  }
  return curve;
}

inline std::size_t correlation_bin_count(double bin_width) {
  if (!(bin_width > 0.0)) throw std::invalid_argument("bin_width: require > 0");
  const double max_d = std::sqrt(0.5);  // torus diameter
  return static_cast<std::size_t>(std::ceil(max_d / bin_width)) + 1;
}

}  // namespace detail

// Monte Carlo estimate over random ordered pairs of distinct agents.
inline CorrelationCurve pair_correlation(const MicroState& st, const Graph& g,
                                         double bin_width, std::size_t n_samples,
                                         Rng& rng) {
  const std::size_t nb = detail::correlation_bin_count(bin_width);
  std::vector<double> sums(nb, 0.0);
  std::vector<std::uint64_t> counts(nb, 0);
  const std::size_t n = g.n();
  for (std::size_t k = 0; k < n_samples; ++k) {
    const std::size_t i = bounded(rng, n);
    std::size_t j = bounded(rng, n - 1);
    if (j >= i) ++j;
    const double d = torus_distance(g.position(i), g.position(j));
    const auto b = std::min(nb - 1, static_cast<std::size_t>(d / bin_width));
    sums[b] += static_cast<double>(st.spin(i)) * static_cast<double>(st.spin(j));
    ++counts[b];
  }
  return detail::make_curve(st.t(), bin_width, sums, counts);
}

// Same estimate over random ordered pairs of distinct grid cells.
inline CorrelationCurve pair_correlation(std::span<const double> s, std::size_t m,
                                         double t, double bin_width,
                                         std::size_t n_samples, Rng& rng) {
  const std::size_t nb = detail::correlation_bin_count(bin_width);
  std::vector<double> sums(nb, 0.0);
  std::vector<std::uint64_t> counts(nb, 0);
  const std::size_t total = m * m;
  const double h = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n_samples; ++k) {
    const std::size_t a = bounded(rng, total);
    std::size_t b = bounded(rng, total - 1);
    if (b >= a) ++b;
    const double ax = (static_cast<double>(a % m) + 0.5) * h;
    const double ay = (static_cast<double>(a / m) + 0.5) * h;
    const double bx = (static_cast<double>(b % m) + 0.5) * h;
    const double by = (static_cast<double>(b / m) + 0.5) * h;
    const double d = torus_distance({ax, ay}, {bx, by});
    const auto bin = std::min(nb - 1, static_cast<std::size_t>(d / bin_width));
    sums[bin] += s[a] * s[b];
    ++counts[bin];
  }
  return detail::make_curve(t, bin_width, sums, counts);
}

// Pool several estimates of the same snapshot (e.g. replicas) bin by bin.
inline CorrelationCurve pool_correlation(std::span<const CorrelationCurve> curves) {
  if (curves.empty()) throw std::invalid_argument("curves: empty");
  CorrelationCurve out = curves.front();
  std::vector<double> sums(out.bins.size(), 0.0);
  std::vector<std::uint64_t> counts(out.bins.size(), 0);
  for (const auto& c : curves) {
    if (c.bins.size() != out.bins.size())
      throw std::invalid_argument("curves: mismatched binning");
    for (std::size_t k = 0; k < c.bins.size(); ++k) {
      sums[k] += c.bins[k].C * static_cast<double>(c.bins[k].count);
      counts[k] += c.bins[k].count;
    }
  }
  for (std::size_t k = 0; k < out.bins.size(); ++k) {
    out.bins[k].count = counts[k];
    out.bins[k].C = counts[k] ? sums[k] / static_cast<double>(counts[k]) : 0.0;
  }
  return out;
}

// Mean squared pairwise deviation of the curves after rescaling L by
// length_scale(t), interpolated onto a common Ltilde grid. Lower = better
// collapse. Bins with fewer than min_count samples are ignored. With
// normalize_amplitude each curve is divided by its own small-L value first,
// which removes the slow drift of C(0+) (the AB fraction keeps shrinking
// during coarsening) and leaves the pure length-rescaling question.
inline double collapse_error(std::span<const CorrelationCurve> curves,
                             const std::function<double(double)>& length_scale,
                             std::size_t grid_pts = 100,
                             std::uint64_t min_count = 100,
                             bool normalize_amplitude = false) {
  if (curves.size() < 2) throw std::invalid_argument("curves: need at least 2");
  struct Resc {
    std::vector<double> x, y;
  };
  std::vector<Resc> rs;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (const auto& c : curves) {
    const double l = length_scale(c.t);
    if (!(l > 0.0)) throw std::invalid_argument("length_scale: must be positive");
    Resc r;
    for (const auto& b : c.bins) {
      if (b.count < min_count) continue;
      r.x.push_back(b.L / l);
      r.y.push_back(b.C);
    }
    if (r.x.size() < 2) throw std::runtime_error("collapse_error: curve has too few bins");
    if (normalize_amplitude) {
      const double amp = r.y.front();
      if (!(std::abs(amp) > 1e-12))
        throw std::runtime_error("collapse_error: vanishing small-L amplitude");
      for (auto& v : r.y) v /= amp;
    }
    lo = std::max(lo, r.x.front());
    hi = std::min(hi, r.x.back());
    rs.push_back(std::move(r));
  }
  if (!(hi > lo))
    throw std::runtime_error("collapse_error: rescaled supports do not overlap");
  auto interp = [](const Resc& r, double x) {
    auto it = std::lower_bound(r.x.begin(), r.x.end(), x);
    if (it == r.x.begin()) return r.y.front();
    if (it == r.x.end()) return r.y.back();
    const std::size_t k = static_cast<std::size_t>(it - r.x.begin());
    const double w = (x - r.x[k - 1]) / (r.x[k] - r.x[k - 1]);
    return r.y[k - 1] + w * (r.y[k] - r.y[k - 1]);
  };
  double err = 0.0;
  std::size_t terms = 0;
  for (std::size_t gidx = 0; gidx < grid_pts; ++gidx) {
    const double x = lo + (hi - lo) * (static_cast<double>(gidx) + 0.5) /
                              static_cast<double>(grid_pts);
    for (std::size_t a = 0; a < rs.size(); ++a) {
      const double ya = interp(rs[a], x);
      for (std::size_t b = a + 1; b < rs.size(); ++b) {
        const double yb = interp(rs[b], x);
        err += (ya - yb) * (ya - yb);
        ++terms;
      }
    }
  }
  return err / static_cast<double>(terms);
}

// --- contours ----------------------------------------------------------------

struct ContourPoint {
  double x = 0.0;  // wrapped into [0,1)
  double y = 0.0;
  double R = std::numeric_limits<double>::quiet_NaN();  // curvature radius (> 0)
  double v = std::numeric_limits<double>::quiet_NaN();  // normal speed, > 0 toward center
};

struct Contour {
  std::vector<ContourPoint> pts;
  int winding_x = 0;  // net wraps around the torus after closing
  int winding_y = 0;
  bool non_contractible() const { return winding_x != 0 || winding_y != 0; }
};

namespace detail {

// Zero-level crossings live on the edges of the periodic node lattice.
// Edge key: ((j*m + i) << 1) | orientation, orientation 0 = +x, 1 = +y.
struct MarchState {
  std::span<const double> s;
  long m;

  double at(long i, long j) const {
    i = (i % m + m) % m;
    j = (j % m + m) % m;
    return s[static_cast<std::size_t>(j * m + i)];
  }
  bool pos(long i, long j) const { return at(i, j) > 0.0; }

  std::size_t edge_key(long i, long j, int orient) const {
    i = (i % m + m) % m;
    j = (j % m + m) % m;
    return (static_cast<std::size_t>(j * m + i) << 1) | static_cast<std::size_t>(orient);
  }

  bool crossing(long i, long j, int orient) const {
    const double a = at(i, j);
    const double b = orient == 0 ? at(i + 1, j) : at(i, j + 1);
    return (a > 0.0) != (b > 0.0);
  }

  // interpolated crossing point (unwrapped lattice coordinates, node spacing 1)
  std::pair<double, double> point(long i, long j, int orient) const {
    const double a = at(i, j);
    const double b = orient == 0 ? at(i + 1, j) : at(i, j + 1);
    const double f = a / (a - b);
    return orient == 0 ? std::pair<double, double>{i + f, static_cast<double>(j)}
                       : std::pair<double, double>{static_cast<double>(i), j + f};
  }

  // Given a cell (i,j) and the side through which the contour enters, return
  // the exit side. Sides: 0 bottom, 1 right, 2 top, 3 left.
  int exit_side(long i, long j, int entry) const {
    const bool bl = pos(i, j), br = pos(i + 1, j), tr = pos(i + 1, j + 1), tl = pos(i, j + 1);
    const int idx = (bl ? 1 : 0) | (br ? 2 : 0) | (tr ? 4 : 0) | (tl ? 8 : 0);
    // segment pairs per case; -1 = unused
    static constexpr std::array<std::array<int, 4>, 16> seg = {{
        {-1, -1, -1, -1},  // 0
        {3, 0, -1, -1},    // 1: bl
        {0, 1, -1, -1},    // 2: br
        {3, 1, -1, -1},    // 3
        {1, 2, -1, -1},    // 4: tr
        {-1, -1, -1, -1},  // 5: saddle, handled below
        {0, 2, -1, -1},    // 6
        {3, 2, -1, -1},    // 7
        {2, 3, -1, -1},    // 8: tl
        {0, 2, -1, -1},    // 9
        {-1, -1, -1, -1},  // 10: saddle
        {1, 2, -1, -1},    // 11
        {1, 3, -1, -1},    // 12
        {0, 1, -1, -1},    // 13
        {3, 0, -1, -1},    // 14
        {-1, -1, -1, -1},  // 15
    }};
    int a = -1, b = -1;
    if (idx == 5 || idx == 10) {
      const double center = 0.25 * (at(i, j) + at(i + 1, j) + at(i + 1, j + 1) + at(i, j + 1));
      const bool cpos = center > 0.0;
      // pick the segment pair touching the entry side
      int p0a, p0b, p1a, p1b;
      if (idx == 5) {
        // +: bl, tr
        if (cpos) { p0a = 0; p0b = 1; p1a = 2; p1b = 3; }  // minus corners br, tl isolated
        else      { p0a = 3; p0b = 0; p1a = 1; p1b = 2; }  // plus corners bl, tr isolated
      } else {
        // +: br, tl
        if (cpos) { p0a = 3; p0b = 0; p1a = 1; p1b = 2; }
        else      { p0a = 0; p0b = 1; p1a = 2; p1b = 3; }
      }
      if (entry == p0a || entry == p0b) { a = p0a; b = p0b; }
      else { a = p1a; b = p1b; }
    } else {
      a = seg[idx][0];
      b = seg[idx][1];
    }
    if (a < 0) return -1;
    if (entry == a) return b;
    if (entry == b) return a;
    return -1;
  }

  // Edge identity of a cell side.
  std::size_t side_edge(long i, long j, int side) const {
    switch (side) {
      case 0: return edge_key(i, j, 0);          // bottom
      case 1: return edge_key(i + 1, j, 1);      // right
      case 2: return edge_key(i, j + 1, 0);      // top
      default: return edge_key(i, j, 1);         // left
    }
  }

  std::pair<double, double> side_point(long i, long j, int side) const {
    switch (side) {
      case 0: return point(i, j, 0);
      case 1: return point(i + 1, j, 1);
      case 2: return point(i, j + 1, 0);
      default: return point(i, j, 1);
    }
  }
};

}  // namespace detail

// Zero-level contours of s (values at cell centers of an m x m torus grid),
// via marching squares with linear interpolation. Contours shorter than 8
// points are discarded. Point coordinates are wrapped into [0,1)^2.
inline std::vector<Contour> extract_boundary(std::span<const double> s, std::size_t m) {
  detail::MarchState ms{s, static_cast<long>(m)};
  const long lm = static_cast<long>(m);
  const double h = 1.0 / static_cast<double>(m);
  std::vector<bool> visited(2 * m * m, false);
  std::vector<Contour> out;

  for (long j0 = 0; j0 < lm; ++j0) {
    for (long i0 = 0; i0 < lm; ++i0) {
      for (int orient = 0; orient < 2; ++orient) {
        if (visited[ms.edge_key(i0, j0, orient)]) continue;
        if (!ms.crossing(i0, j0, orient)) continue;

        // Start in the cell that has this edge as bottom (orient 0) or
        // left (orient 1) side.
        long ci = i0, cj = j0;
        int entry = orient == 0 ? 0 : 3;
        const std::size_t start_edge = ms.edge_key(i0, j0, orient);

        Contour contour;
        double prev_ux = 0.0, prev_uy = 0.0;  // unwrapped trace
        double sum_dx = 0.0, sum_dy = 0.0;
        bool first = true, ok = true;

        for (;;) {
          const std::size_t ek = ms.side_edge(ci, cj, entry);
          visited[ek] = true;
          auto [px, py] = ms.side_point(ci, cj, entry);
          if (first) {
            prev_ux = px;
            prev_uy = py;
            first = false;
          } else {
            // lattice coordinates may be wrapped; unwrap by nearest image
            double dx = px - std::fmod(prev_ux, static_cast<double>(lm));
            double dy = py - std::fmod(prev_uy, static_cast<double>(lm));
            dx -= lm * std::round(dx / lm);
            dy -= lm * std::round(dy / lm);
            prev_ux += dx;
            prev_uy += dy;
            sum_dx += dx;
            sum_dy += dy;
          }
          ContourPoint cp;
          cp.x = wrap01(px * h);
          cp.y = wrap01(py * h);
          contour.pts.push_back(cp);

          const int exit = ms.exit_side(ci, cj, entry);
          if (exit < 0) {
            ok = false;  // inconsistent case table; should not happen
            break;
          }
          // move to neighbor cell across the exit side
          switch (exit) {
            case 0: cj -= 1; entry = 2; break;
            case 1: ci += 1; entry = 3; break;
            case 2: cj += 1; entry = 0; break;
            default: ci -= 1; entry = 1; break;
          }
          ci = (ci % lm + lm) % lm;
          cj = (cj % lm + lm) % lm;
          const std::size_t next_edge = ms.side_edge(ci, cj, entry);
          if (next_edge == start_edge) {
            // close the loop: displacement back to the first point
            auto [qx, qy] = ms.side_point(ci, cj, entry);
            double dx = qx - std::fmod(prev_ux, static_cast<double>(lm));
            double dy = qy - std::fmod(prev_uy, static_cast<double>(lm));
            dx -= lm * std::round(dx / lm);
            dy -= lm * std::round(dy / lm);
            sum_dx += dx;
            sum_dy += dy;
            break;
          }
          if (contour.pts.size() > 4 * m * m) {
            ok = false;
            break;
          }
        }
        if (!ok || contour.pts.size() < 8) continue;
        contour.winding_x = static_cast<int>(std::lround(sum_dx / lm));
        contour.winding_y = static_cast<int>(std::lround(sum_dy / lm));
        out.push_back(std::move(contour));
      }
    }
  }
  return out;
}

// --- curvature and normal speed ------------------------------------------

struct CurvatureSpeedSample {
  double R = 0.0;  // curvature radius
  double v = 0.0;  // normal speed, positive toward the curvature center
  double x = 0.0;
  double y = 0.0;
};

namespace detail {

// Algebraic circle fit (Kasa) on a window of unwrapped points; returns false
// when the window is degenerate (collinear within roundoff).
inline bool fit_circle(std::span<const double> xs, std::span<const double> ys,
                       double& cx, double& cy, double& R) {
  const std::size_t n = xs.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    mx += xs[k];
    my += ys[k];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double suu = 0, suv = 0, svv = 0, suuu = 0, svvv = 0, suvv = 0, svuu = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double u = xs[k] - mx, v = ys[k] - my;
    suu += u * u;
    suv += u * v;
    svv += v * v;
    suuu += u * u * u;
    svvv += v * v * v;
    suvv += u * v * v;
    svuu += v * u * u;
  }
  const double det = suu * svv - suv * suv;
  const double scale = (suu + svv) / static_cast<double>(n);
  if (std::abs(det) < 1e-12 * scale * scale * static_cast<double>(n) * static_cast<double>(n))
    return false;
  const double rhs1 = 0.5 * (suuu + suvv);
  const double rhs2 = 0.5 * (svvv + svuu);
  const double uc = (rhs1 * svv - rhs2 * suv) / det;
  const double vc = (rhs2 * suu - rhs1 * suv) / det;
  cx = uc + mx;
  cy = vc + my;
  R = std::sqrt(uc * uc + vc * vc + (suu + svv) / static_cast<double>(n));
  return std::isfinite(R) && R > 0.0;
}

struct PointHash {
  std::size_t grid = 0;
  std::vector<std::vector<std::uint32_t>> buckets;
  const Contour* c = nullptr;

  void build(const Contour& contour, double cell) {
    c = &contour;
    grid = std::max<std::size_t>(4, static_cast<std::size_t>(std::floor(1.0 / cell)));
    buckets.assign(grid * grid, {});
    for (std::size_t k = 0; k < contour.pts.size(); ++k) {
      const auto& p = contour.pts[k];
      const auto gx = std::min(grid - 1, static_cast<std::size_t>(p.x * grid));
      const auto gy = std::min(grid - 1, static_cast<std::size_t>(p.y * grid));
      buckets[gy * grid + gx].push_back(static_cast<std::uint32_t>(k));
    }
  }

  // nearest contour point by torus distance; returns index or -1
  long nearest(double x, double y) const {
    const long g = static_cast<long>(grid);
    const long gx = std::min<long>(g - 1, static_cast<long>(x * grid));
    const long gy = std::min<long>(g - 1, static_cast<long>(y * grid));
    long best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (long ring = 0; ring <= g / 2 + 1; ++ring) {
      for (long dy = -ring; dy <= ring; ++dy) {
        for (long dx = -ring; dx <= ring; ++dx) {
          if (std::max(std::abs(dx), std::abs(dy)) != ring) continue;
          const long bx = ((gx + dx) % g + g) % g;
          const long by = ((gy + dy) % g + g) % g;
          for (std::uint32_t k : buckets[static_cast<std::size_t>(by * g + bx)]) {
            const auto& p = c->pts[k];
            const double ddx = torus_delta(x, p.x);
            const double ddy = torus_delta(y, p.y);
            const double d2 = ddx * ddx + ddy * ddy;
            if (d2 < best_d2) {
              best_d2 = d2;
              best = k;
            }
          }
        }
      }
      // one extra ring after the first hit guards against cell-boundary bias
      if (best >= 0 && ring > static_cast<long>(std::sqrt(best_d2) * grid) + 1) break;
    }
    return best;
  }
};

}  // namespace detail

// Per-point curvature radius on c1 (least-squares circle over a centered arc
// window) and normal speed from the displacement to the nearest point of c2
// over the snapshot interval dt_snap. Points with R below 2h, degenerate
// fits, or displacement beyond R/10 are skipped.
inline std::vector<CurvatureSpeedSample> curvature_and_speed(const Contour& c1,
                                                             const Contour& c2,
                                                             double dt_snap, double h) {
  std::vector<CurvatureSpeedSample> out;
  const std::size_t n = c1.pts.size();
  if (n < 11 || c2.pts.empty() || !(dt_snap > 0.0)) return out;

  // mean arc step for window sizing
  double arc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& a = c1.pts[k];
    const auto& b = c1.pts[(k + 1) % n];
    const double dx = torus_delta(a.x, b.x);
    const double dy = torus_delta(a.y, b.y);
    arc += std::sqrt(dx * dx + dy * dy);
  }
  const double step = arc / static_cast<double>(n);

  detail::PointHash hash;
  hash.build(c2, std::max(4.0 * h, 0.01));

  std::vector<double> xs, ys;
  auto window_fit = [&](std::size_t center, std::size_t w, double& cx, double& cy,
                        double& R) {
    xs.clear();
    ys.clear();
    // unwrap the window relative to the center point by chaining deltas
    const auto& pc = c1.pts[center];
    double ux = pc.x, uy = pc.y;
    xs.push_back(ux);
    ys.push_back(uy);
    double fx = ux, fy = uy;
    for (std::size_t kk = 1; kk <= w; ++kk) {  // forward
      const auto& p = c1.pts[(center + kk) % n];
      fx += torus_delta(wrap01(fx), p.x);
      fy += torus_delta(wrap01(fy), p.y);
      xs.push_back(fx);
      ys.push_back(fy);
    }
    double bx = ux, by = uy;
    for (std::size_t kk = 1; kk <= w; ++kk) {  // backward
      const auto& p = c1.pts[(center + n - kk) % n];
      bx += torus_delta(wrap01(bx), p.x);
      by += torus_delta(wrap01(by), p.y);
      xs.push_back(bx);
      ys.push_back(by);
    }
    return detail::fit_circle(xs, ys, cx, cy, R);
  };

  const std::size_t max_w = (n - 1) / 2;
  for (std::size_t k = 0; k < n; ++k) {
    double cx, cy, R;
    std::size_t w = std::min<std::size_t>(5, max_w);
    if (!window_fit(k, w, cx, cy, R)) continue;
    // window ~ 20% of the fitted radius, clamped
    const auto w2 = std::min<std::size_t>(
        {std::max<std::size_t>(5, static_cast<std::size_t>(std::lround(0.2 * R / step))),
         max_w, 80});
    if (w2 != w && !window_fit(k, w2, cx, cy, R)) continue;
    if (!(R >= 2.0 * h)) continue;

    const auto& p = c1.pts[k];
    // direction toward the curvature center, in p's unwrapped frame
    double dxc = cx - p.x, dyc = cy - p.y;
    dxc -= std::round(dxc);
    dyc -= std::round(dyc);
    const double dist_c = std::sqrt(dxc * dxc + dyc * dyc);
    if (!(dist_c > 0.0)) continue;
    const double ux = dxc / dist_c, uy = dyc / dist_c;

    const long qi = hash.nearest(p.x, p.y);
    if (qi < 0) continue;
    const auto& q = c2.pts[static_cast<std::size_t>(qi)];
    const double mx = torus_delta(p.x, q.x);
    const double my = torus_delta(p.y, q.y);
    if (std::sqrt(mx * mx + my * my) > 0.1 * R) continue;  // displacement < R/10
    const double v = (mx * ux + my * uy) / dt_snap;

    CurvatureSpeedSample smp;
    smp.R = R;
    smp.v = v;
    smp.x = p.x;
    smp.y = p.y;
    out.push_back(smp);
  }
  return out;
}

// --- fits -------------------------------------------------------------------

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

inline LinearFit linear_fit(std::span<const std::pair<double, double>> pts) {
  if (pts.size() < 2) throw std::invalid_argument("points: need at least 2");
  double sx = 0, sy = 0;
  for (const auto& [x, y] : pts) {
    sx += x;
    sy += y;
  }
  const double n = static_cast<double>(pts.size());
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& [x, y] : pts) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
    syy += (y - my) * (y - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("points: degenerate x values");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

// Domain-size series fitted linearly over the window before S drops below
// cutoff_fraction of S(0).
inline LinearFit fit_shrink_window(std::span<const std::pair<double, double>> series,
                                   double cutoff_fraction = 0.1) {
  if (series.empty()) throw std::invalid_argument("series: empty");
  const double s0 = series.front().second;
  std::vector<std::pair<double, double>> window;
  for (const auto& p : series) {
    if (p.second < cutoff_fraction * s0) break;
    window.push_back(p);
  }
  return linear_fit(window);
}

struct PowerLawFit {
  double exponent = 0.0;   // gamma: y ~ x^(-gamma) has exponent = gamma
  double amplitude = 0.0;  // multiplicative intercept
  double x_min = 0.0;
  double x_max = 0.0;
  double residual = 0.0;   // rms residual in log space
};

// Least squares on (log x, log y) restricted to [x_min, x_max]. The exponent
// is the negated slope, so decaying laws report positive gamma.
inline PowerLawFit fit_power_law(std::span<const std::pair<double, double>> pts,
                                 double x_min, double x_max) {
  std::vector<std::pair<double, double>> logs;
  for (const auto& [x, y] : pts) {
    if (x < x_min || x > x_max) continue;
    if (!(x > 0.0) || !(y > 0.0))
      throw std::invalid_argument("points: nonpositive value in fit range");
    logs.emplace_back(std::log(x), std::log(y));
  }
  if (logs.size() < 3)
    throw std::invalid_argument("points: need at least 3 in fit range");
  const LinearFit lf = linear_fit(logs);
  PowerLawFit fit;
  fit.exponent = -lf.slope;
  fit.amplitude = std::exp(lf.intercept);
  fit.x_min = x_min;
  fit.x_max = x_max;
  double ss = 0.0;
  for (const auto& [lx, ly] : logs) {
    const double e = ly - (lf.intercept + lf.slope * lx);
    ss += e * e;
  }
  fit.residual = std::sqrt(ss / static_cast<double>(logs.size()));
  return fit;
}

// --- terminal-state classification -----------------------------------------

enum class TerminalState { consensus_a, consensus_b, stripe, other };

inline const char* to_string(TerminalState t) {
  switch (t) {
    case TerminalState::consensus_a: return "consensus_A";
    case TerminalState::consensus_b: return "consensus_B";
    case TerminalState::stripe: return "stripe";
    default: return "other";
  }
}

// Consensus when |mean s| > 0.99; stripe when exactly two non-contractible
// contours wind the torus in parallel directions (tilted stripes included).
inline TerminalState classify_terminal_state(std::span<const double> s, std::size_t m) {
  double mean = 0.0;
  for (double v : s) mean += v;
  mean /= static_cast<double>(s.size());
  if (mean > 0.99) return TerminalState::consensus_a;
  if (mean < -0.99) return TerminalState::consensus_b;
  const auto contours = extract_boundary(s, m);
  std::vector<const Contour*> wrapped;
  for (const auto& c : contours)
    if (c.non_contractible()) wrapped.push_back(&c);
  if (wrapped.size() == 2) {
    const long cross = static_cast<long>(wrapped[0]->winding_x) * wrapped[1]->winding_y -
                       static_cast<long>(wrapped[0]->winding_y) * wrapped[1]->winding_x;
    if (cross == 0) return TerminalState::stripe;
  }
  return TerminalState::other;
}

// Cell-averaged spin field from a microstate (empty cells get 0).
inline std::vector<double> rasterize_spins(const MicroState& st, const Graph& g,
                                           std::size_t m) {
  std::vector<double> sums(m * m, 0.0);
  std::vector<std::uint32_t> counts(m * m, 0);
  for (std::size_t i = 0; i < st.size(); ++i) {
    const auto p = g.position(i);
    const auto cx = std::min(m - 1, static_cast<std::size_t>(p.x * m));
    const auto cy = std::min(m - 1, static_cast<std::size_t>(p.y * m));
    sums[cy * m + cx] += st.spin(i);
    ++counts[cy * m + cx];
  }
  for (std::size_t k = 0; k < sums.size(); ++k)
    if (counts[k]) sums[k] /= static_cast<double>(counts[k]);
  return sums;
}

// Micro classification: consensus from the counts; otherwise rasterize at
// cell width ~ r/2, smooth over the interaction disk, and classify the field.
inline TerminalState classify_terminal_micro(const MicroState& st, const Graph& g) {
  const double n = static_cast<double>(st.size());
  const double mag = (static_cast<double>(st.n_a()) - static_cast<double>(st.n_b())) / n;
  if (mag > 0.99) return TerminalState::consensus_a;
  if (mag < -0.99) return TerminalState::consensus_b;
  const double r = g.radius();
  const auto m = std::max<std::size_t>(16, static_cast<std::size_t>(std::lround(2.0 / r)));
  auto raster = rasterize_spins(st, g, m);
  std::vector<double> smooth(raster.size());
  disk_average(DiskStencil::make(m, r), raster, smooth);
  return classify_terminal_state(smooth, m);
}

// --- CSV writers -------------------------------------------------------------

inline void write_correlation_csv(std::ostream& os,
                                  std::span<const CorrelationCurve> curves) {
  os << "t,L,C,count\n";
  for (const auto& c : curves)
    for (const auto& b : c.bins)
      if (b.count > 0)
        os << fmt_g(c.t) << ',' << fmt_g(b.L) << ',' << fmt_g(b.C) << ',' << b.count << '\n';
}

inline void write_boundary_csv(std::ostream& os, double t,
                               std::span<const CurvatureSpeedSample> samples,
                               bool header) {
  if (header) os << "t,point_index,x,y,R,v\n";
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& s = samples[k];
    os << fmt_g(t) << ',' << k << ',' << fmt_g(s.x) << ',' << fmt_g(s.y) << ','
       << fmt_g(s.R) << ',' << fmt_g(s.v) << '\n';
  }
}

inline void write_domain_size_csv(std::ostream& os,
                                  std::span<const std::pair<double, double>> series) {
  os << "t,S\n";
  for (const auto& [t, sv] : series) os << fmt_g(t) << ',' << fmt_g(sv) << '\n';
}

inline void write_fit_csv(std::ostream& os,
                          std::span<const std::tuple<std::string, double, double, double>> fits) {
  os << "name,gamma,intercept,residual\n";
  for (const auto& [name, gamma, intercept, residual] : fits)
    os << name << ',' << fmt_g(gamma) << ',' << fmt_g(intercept) << ','
       << fmt_g(residual) << '\n';
}

}  // namespace ngrgg
