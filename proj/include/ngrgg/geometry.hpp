#pragma once
// Random geometric graphs on the unit torus [0,1)^2.
//
// Agents are points placed uniformly at random; two agents are neighbors when
// their torus distance d satisfies 0 < d < r (open ball, so coincident points
// are not neighbors). Construction uses a uniform bucket grid with cell width
// >= r, so each node only checks the 3x3 block of cells around its own.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ngrgg/io.hpp"
#include "ngrgg/rng.hpp"

namespace ngrgg {

struct TorusPoint {
  double x = 0.0;
  double y = 0.0;
};

// Wrap a coordinate into [0,1).
inline double wrap01(double v) {
  v -= std::floor(v);
  return v >= 1.0 ? v - 1.0 : v;
}

inline TorusPoint wrap(TorusPoint p) { return {wrap01(p.x), wrap01(p.y)}; }

// Shortest signed displacement a -> b for coordinates in [0,1); lies in [-0.5, 0.5].
inline double torus_delta(double a, double b) {
  double d = b - a;
  if (d > 0.5) d -= 1.0;
  else if (d < -0.5) d += 1.0;
  return d;
}

// Minimum over periodic images of the Euclidean distance; in [0, sqrt(2)/2].
inline double torus_distance(TorusPoint p, TorusPoint q) {
  const double dx = torus_delta(p.x, q.x);
  const double dy = torus_delta(p.y, q.y);
  return std::sqrt(dx * dx + dy * dy);
}

class Graph {
 public:
  // Build from explicit positions (wrapped into the torus).
  Graph(std::vector<TorusPoint> positions, double radius, std::uint64_t seed = 0)
      : pos_(std::move(positions)), r_(radius), seed_(seed) {
    for (auto& p : pos_) p = wrap(p);
    build_adjacency();
  }

  // n i.i.d. uniform positions from the given seed, then adjacency as above.
  static Graph random(std::size_t n, double radius, std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("n: need at least 2 agents");
    Rng rng = make_rng(seed);
    std::vector<TorusPoint> pos(n);
    for (auto& p : pos) {
      p.x = uniform01(rng);
      p.y = uniform01(rng);
    }
    return Graph(std::move(pos), radius, seed);
  }

  std::size_t n() const { return pos_.size(); }
  double radius() const { return r_; }
  std::uint64_t seed() const { return seed_; }
  TorusPoint position(std::size_t i) const { return pos_[i]; }
  const std::vector<TorusPoint>& positions() const { return pos_; }

  std::span<const std::uint32_t> neighbors(std::size_t i) const {
    return {nbrs_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }
  std::size_t degree(std::size_t i) const { return offsets_[i + 1] - offsets_[i]; }
  std::size_t edge_count() const { return nbrs_.size() / 2; }
  std::size_t directed_edge_count() const { return nbrs_.size(); }
  double mean_degree() const {
    return static_cast<double>(nbrs_.size()) / static_cast<double>(n());
  }

  // Directed edge e in [0, 2E): source found by binary search on offsets.
  std::pair<std::uint32_t, std::uint32_t> directed_edge(std::size_t e) const {
    auto it = std::upper_bound(offsets_.begin(), offsets_.end(), e);
    const auto src = static_cast<std::uint32_t>(it - offsets_.begin() - 1);
    return {src, nbrs_[e]};
  }

  static Graph deserialize(std::istream& in);
  void serialize(std::ostream& out) const;

 private:
  Graph() = default;

  void build_adjacency() {
    const std::size_t n = pos_.size();
    if (n < 2) throw std::invalid_argument("n: need at least 2 agents");
    if (!(r_ > 0.0) || !(r_ < 0.5))
      throw std::invalid_argument("radius: require 0 < r < 0.5");

    const int cells = static_cast<int>(std::floor(1.0 / r_));  // cell width >= r
    const std::size_t ncell = static_cast<std::size_t>(cells) * cells;

    // counting-sort nodes into buckets
    std::vector<std::uint32_t> cell_of(n);
    std::vector<std::uint32_t> bucket_start(ncell + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
      int cx = std::min(cells - 1, static_cast<int>(pos_[i].x * cells));
      int cy = std::min(cells - 1, static_cast<int>(pos_[i].y * cells));
      cell_of[i] = static_cast<std::uint32_t>(cy * cells + cx);
      ++bucket_start[cell_of[i] + 1];
    }
    for (std::size_t c = 0; c < ncell; ++c) bucket_start[c + 1] += bucket_start[c];
    std::vector<std::uint32_t> bucket_nodes(n);
    {
      std::vector<std::uint32_t> cursor(bucket_start.begin(), bucket_start.end() - 1);
      for (std::size_t i = 0; i < n; ++i) bucket_nodes[cursor[cell_of[i]]++] = static_cast<std::uint32_t>(i);
    }

    const double r2 = r_ * r_;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    std::uint32_t scan[9];
    for (std::size_t i = 0; i < n; ++i) {
      const int cx = static_cast<int>(cell_of[i]) % cells;
      const int cy = static_cast<int>(cell_of[i]) / cells;
      int nscan = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int ux = (cx + dx + cells) % cells;
          const int uy = (cy + dy + cells) % cells;
          scan[nscan++] = static_cast<std::uint32_t>(uy * cells + ux);
        }
      }
      // wrap can revisit a cell when cells == 2
      std::sort(scan, scan + nscan);
      nscan = static_cast<int>(std::unique(scan, scan + nscan) - scan);

      const TorusPoint pi = pos_[i];
      for (int k = 0; k < nscan; ++k) {
        const std::uint32_t c = scan[k];
        for (std::uint32_t bi = bucket_start[c]; bi < bucket_start[c + 1]; ++bi) {
          const std::uint32_t j = bucket_nodes[bi];
          if (j <= i) continue;
          const double dx = torus_delta(pi.x, pos_[j].x);
          const double dy = torus_delta(pi.y, pos_[j].y);
          const double d2 = dx * dx + dy * dy;
          if (d2 > 0.0 && d2 < r2)
            edges.emplace_back(static_cast<std::uint32_t>(i), j);
        }
      }
    }

    offsets_.assign(n + 1, 0);
    for (const auto& [a, b] : edges) {
      ++offsets_[a + 1];
      ++offsets_[b + 1];
    }
    for (std::size_t i = 0; i < n; ++i) offsets_[i + 1] += offsets_[i];
    nbrs_.assign(offsets_[n], 0);
    {
      std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
      for (const auto& [a, b] : edges) {
        nbrs_[cursor[a]++] = b;
        nbrs_[cursor[b]++] = a;
      }
    }
    for (std::size_t i = 0; i < n; ++i)
      std::sort(nbrs_.begin() + offsets_[i], nbrs_.begin() + offsets_[i + 1]);
  }

  std::vector<TorusPoint> pos_;
  std::vector<std::size_t> offsets_;
  std::vector<std::uint32_t> nbrs_;
  double r_ = 0.0;
  std::uint64_t seed_ = 0;
};

struct ComponentReport {
  std::vector<std::uint32_t> component_id;  // per node, labeled in discovery order
  std::size_t component_count = 0;
  double giant_fraction = 0.0;
  double mean_degree = 0.0;
  bool is_connected = false;
  bool low_degree_warning = false;  // mean degree below ln(n) connectivity heuristic
};

inline ComponentReport connected_components(const Graph& g) {
  const std::size_t n = g.n();
  ComponentReport rep;
  rep.component_id.assign(n, UINT32_MAX);
  std::vector<std::uint32_t> stack;
  std::vector<std::size_t> sizes;
  for (std::size_t i = 0; i < n; ++i) {
    if (rep.component_id[i] != UINT32_MAX) continue;
    const auto label = static_cast<std::uint32_t>(sizes.size());
    std::size_t size = 0;
    stack.push_back(static_cast<std::uint32_t>(i));
    rep.component_id[i] = label;
    while (!stack.empty()) {
      const std::uint32_t v = stack.back();
      stack.pop_back();
      ++size;
      for (std::uint32_t w : g.neighbors(v)) {
        if (rep.component_id[w] == UINT32_MAX) {
          rep.component_id[w] = label;
          stack.push_back(w);
        }
      }
    }
    sizes.push_back(size);
  }
  rep.component_count = sizes.size();
  rep.giant_fraction =
      static_cast<double>(*std::max_element(sizes.begin(), sizes.end())) /
      static_cast<double>(n);
  rep.mean_degree = g.mean_degree();
  rep.is_connected = (rep.component_count == 1);
  rep.low_degree_warning = rep.mean_degree < std::log(static_cast<double>(n));
  return rep;
}

// Plain-text format: header "n r seed", one "x y" line per node, then one
// line per node with its neighbor indices.
inline void Graph::serialize(std::ostream& out) const {
  out << n() << ' ' << fmt_exact(r_) << ' ' << seed_ << '\n';
  for (const auto& p : pos_) out << fmt_exact(p.x) << ' ' << fmt_exact(p.y) << '\n';
  for (std::size_t i = 0; i < n(); ++i) {
    const auto nb = neighbors(i);
    for (std::size_t k = 0; k < nb.size(); ++k) {
      if (k) out << ' ';
      out << nb[k];
    }
    out << '\n';
  }
}

inline Graph Graph::deserialize(std::istream& in) {
  Graph g;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("graph file: missing header");
  {
    std::istringstream hs(line);
    std::size_t n = 0;
    if (!(hs >> n >> g.r_ >> g.seed_) || n < 2)
      throw std::runtime_error("graph file: bad header");
    g.pos_.resize(n);
  }
  for (auto& p : g.pos_) {
    if (!std::getline(in, line)) throw std::runtime_error("graph file: truncated positions");
    std::istringstream ls(line);
    if (!(ls >> p.x >> p.y)) throw std::runtime_error("graph file: bad position line");
  }
  const std::size_t n = g.pos_.size();
  std::vector<std::vector<std::uint32_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw std::runtime_error("graph file: truncated adjacency");
    std::istringstream ls(line);
    std::uint32_t j;
    while (ls >> j) {
      if (j >= n) throw std::runtime_error("graph file: neighbor index out of range");
      adj[i].push_back(j);
    }
  }
  g.offsets_.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) g.offsets_[i + 1] = g.offsets_[i] + adj[i].size();
  g.nbrs_.reserve(g.offsets_[n]);
  for (auto& row : adj) g.nbrs_.insert(g.nbrs_.end(), row.begin(), row.end());
  return g;
}

}  // namespace ngrgg
