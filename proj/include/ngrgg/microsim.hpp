#pragma once
// Discrete two-word listener-only naming game on a geometric graph.
//
// Spins encode opinions: +1 = A, 0 = AB (neutral), -1 = B. Per interaction a
// speaker is drawn, then one of its neighbors as listener; only the listener
// updates, via s <- clamp(s + word). Committed agents never change spin but
// still take part in interactions. One time unit = n interactions.

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "ngrgg/geometry.hpp"
#include "ngrgg/io.hpp"
#include "ngrgg/rng.hpp"

namespace ngrgg {

using Spin = std::int8_t;
inline constexpr Spin SPIN_A = 1;
inline constexpr Spin SPIN_AB = 0;
inline constexpr Spin SPIN_B = -1;

struct Observables {
  double t = 0.0;
  std::uint64_t n_a = 0;
  std::uint64_t n_b = 0;
  std::uint64_t n_ab = 0;
  double magnetization = 0.0;   // (N_A - N_B) / n
  double domain_size_a = 0.0;   // (N_A + N_AB/2) / n
};

enum class PairSelection {
  node_first,  // speaker uniform over nodes, listener uniform over its neighbors
  edge_first,  // uniform random edge, random orientation
};

class MicroState {
 public:
  MicroState(std::size_t n, std::uint64_t dynamics_seed)
      : spins_(n, SPIN_AB),
        committed_(n, 0),
        rng_(make_rng(dynamics_seed)),
        n_(n),
        count_ab_(n) {}

  std::size_t size() const { return n_; }
  Spin spin(std::size_t i) const { return spins_[i]; }
  bool is_committed(std::size_t i) const { return committed_[i] != 0; }
  Spin committed_opinion() const { return committed_opinion_; }

  std::uint64_t n_a() const { return count_a_; }
  std::uint64_t n_b() const { return count_b_; }
  std::uint64_t n_ab() const { return count_ab_; }

  std::uint64_t interactions() const { return interactions_; }
  double t() const {
    return static_cast<double>(interactions_) / static_cast<double>(n_);
  }
  std::uint64_t isolated_resamples() const { return isolated_resamples_; }

  Rng& rng() { return rng_; }

  void set_spin(std::size_t i, Spin s) {
    drop_count(spins_[i]);
    spins_[i] = s;
    add_count(s);
  }

  void set_committed(std::size_t i, bool flag, Spin opinion) {
    committed_[i] = flag ? 1 : 0;
    if (flag) {
      committed_opinion_ = opinion;
      set_spin(i, opinion);
    }
  }

  void clear_committed() {
    std::fill(committed_.begin(), committed_.end(), 0);
  }

  void advance_clock() { ++interactions_; }
  void note_isolated_resample() { ++isolated_resamples_; }

  Observables observe() const {
    Observables o;
    o.t = t();
    o.n_a = count_a_;
    o.n_b = count_b_;
    o.n_ab = count_ab_;
    const double n = static_cast<double>(n_);
    o.magnetization = (static_cast<double>(count_a_) - static_cast<double>(count_b_)) / n;
    o.domain_size_a = (static_cast<double>(count_a_) + 0.5 * static_cast<double>(count_ab_)) / n;
    return o;
  }

 private:
  void drop_count(Spin s) {
    if (s > 0) --count_a_;
    else if (s < 0) --count_b_;
    else --count_ab_;
  }
  void add_count(Spin s) {
    if (s > 0) ++count_a_;
    else if (s < 0) ++count_b_;
    else ++count_ab_;
  }

  std::vector<Spin> spins_;
  std::vector<std::uint8_t> committed_;
  Rng rng_;
  std::size_t n_;
  std::uint64_t count_a_ = 0;
  std::uint64_t count_b_ = 0;
  std::uint64_t count_ab_ = 0;
  std::uint64_t interactions_ = 0;
  std::uint64_t isolated_resamples_ = 0;
  Spin committed_opinion_ = SPIN_A;
};

// Word sent by a speaker with spin s; consumes one draw only when s == 0.
inline int speak(Spin s, Rng& rng) {
  if (s == SPIN_AB) return coin(rng) ? 1 : -1;
  return s > 0 ? 1 : -1;
}

// Listener update: clamp(s + word) into {-1, 0, +1}.
inline Spin listen(Spin s, int word) {
  const int v = static_cast<int>(s) + word;
  return static_cast<Spin>(v > 1 ? 1 : (v < -1 ? -1 : v));
}

// One speaker-listener interaction; advances the clock by 1/n.
inline void step(MicroState& st, const Graph& g,
                 PairSelection sel = PairSelection::node_first) {
  if (g.edge_count() == 0)
    throw std::runtime_error("step: every node is isolated");
  std::size_t speaker, listener;
  if (sel == PairSelection::node_first) {
    speaker = bounded(st.rng(), g.n());
    while (g.degree(speaker) == 0) {
      st.note_isolated_resample();
      speaker = bounded(st.rng(), g.n());
    }
    const auto nb = g.neighbors(speaker);
    listener = nb[bounded(st.rng(), nb.size())];
  } else {
    const auto [src, dst] = g.directed_edge(bounded(st.rng(), g.directed_edge_count()));
    speaker = src;
    listener = dst;
  }
  const int word = speak(st.spin(speaker), st.rng());
  if (!st.is_committed(listener))
    st.set_spin(listener, listen(st.spin(listener), word));
  st.advance_clock();
}

// --- initializers ------------------------------------------------------

inline void init_random_ab(MicroState& st, Rng& init_rng) {
  st.clear_committed();
  for (std::size_t i = 0; i < st.size(); ++i)
    st.set_spin(i, coin(init_rng) ? SPIN_A : SPIN_B);
}

inline void init_disk(MicroState& st, const Graph& g, TorusPoint center, double R0) {
  st.clear_committed();
  for (std::size_t i = 0; i < st.size(); ++i)
    st.set_spin(i, torus_distance(g.position(i), center) < R0 ? SPIN_A : SPIN_B);
}

inline void init_stripe(MicroState& st, const Graph& g, double x0, double width) {
  st.clear_committed();
  for (std::size_t i = 0; i < st.size(); ++i) {
    const double u = wrap01(g.position(i).x - x0);
    st.set_spin(i, u < width ? SPIN_A : SPIN_B);
  }
}

inline void init_all(MicroState& st, Spin s) {
  st.clear_committed();
  for (std::size_t i = 0; i < st.size(); ++i) st.set_spin(i, s);
}

// Marks round(q*n) uniformly chosen agents committed to `opinion`; everyone
// else starts uncommitted with the opposite opinion.
inline void seed_committed(MicroState& st, double q, Spin opinion, Rng& init_rng) {
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("q: require 0 <= q <= 1");
  const std::size_t n = st.size();
  const auto k = static_cast<std::size_t>(std::llround(q * static_cast<double>(n)));
  const Spin other = static_cast<Spin>(-opinion);
  st.clear_committed();
  for (std::size_t i = 0; i < n; ++i) st.set_spin(i, other);
  std::vector<std::uint32_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<std::uint32_t>(i);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + bounded(init_rng, n - i);
    std::swap(idx[i], idx[j]);
    st.set_committed(idx[i], true, opinion);
  }
}

// --- drivers ------------------------------------------------------------

// Runs until t_max (relative to the current clock), sampling every
// sample_every time units; halts early when stop(state) holds at a sample.
template <class Stop>
std::vector<Observables> run(MicroState& st, const Graph& g, double t_max,
                             double sample_every, Stop&& stop,
                             PairSelection sel = PairSelection::node_first) {
  if (!(t_max > 0.0)) throw std::invalid_argument("t_max: require t_max > 0");
  if (!(sample_every > 0.0))
    throw std::invalid_argument("sample_every: require sample_every > 0");
  const double n = static_cast<double>(g.n());
  const std::uint64_t end =
      st.interactions() + static_cast<std::uint64_t>(std::llround(t_max * n));
  const std::uint64_t stride = std::max<std::uint64_t>(
      1, static_cast<std::uint64_t>(std::llround(sample_every * n)));

  std::vector<Observables> out;
  out.push_back(st.observe());
  if (stop(st)) return out;
  std::uint64_t next_sample = st.interactions() + stride;
  while (st.interactions() < end) {
    step(st, g, sel);
    if (st.interactions() == next_sample || st.interactions() == end) {
      out.push_back(st.observe());
      next_sample = st.interactions() + stride;
      if (stop(st)) break;
    }
  }
  return out;
}

inline std::vector<Observables> run(MicroState& st, const Graph& g, double t_max,
                                    double sample_every,
                                    PairSelection sel = PairSelection::node_first) {
  return run(st, g, t_max, sample_every, [](const MicroState&) { return false; }, sel);
}

// First time (1-unit sampling granularity) at which at least alpha*n agents
// hold the same opinion. When `target` is set, only that opinion counts; a
// committed-agent sweep passes the committed opinion so the opposing
// majority present at t = 0 does not satisfy the test trivially. Empty
// optional on timeout at t_max.
inline std::optional<double> alpha_consensus_time(
    MicroState& st, const Graph& g, double alpha, double t_max,
    PairSelection sel = PairSelection::node_first,
    std::optional<Spin> target = std::nullopt) {
  if (!(alpha > 0.5 && alpha <= 1.0))
    throw std::invalid_argument("alpha: require 0.5 < alpha <= 1");
  const std::size_t n = g.n();
  const auto need = static_cast<std::uint64_t>(
      std::ceil(alpha * static_cast<double>(n) - 1e-9));
  auto reached = [&] {
    if (target) return (*target == SPIN_A ? st.n_a() : st.n_b()) >= need;
    return std::max(st.n_a(), st.n_b()) >= need;
  };
  if (reached()) return st.t();
  const double t_end = st.t() + t_max;
  while (st.t() < t_end) {
    for (std::size_t k = 0; k < n; ++k) step(st, g, sel);
    if (reached()) return st.t();
  }
  return std::nullopt;
}

// mu_i: average spin over the neighbors of node i.
inline double local_mean_field(const MicroState& st, const Graph& g, std::size_t i) {
  const auto nb = g.neighbors(i);
  if (nb.empty())
    throw std::invalid_argument("local_mean_field: node has no neighbors");
  long long sum = 0;
  for (std::uint32_t j : nb) sum += st.spin(j);
  return static_cast<double>(sum) / static_cast<double>(nb.size());
}

// --- output -------------------------------------------------------------

inline void write_observables_csv(std::ostream& os, std::span<const Observables> obs) {
  os << "t,N_A,N_B,N_AB,magnetization,domain_size_A\n";
  for (const auto& o : obs) {
    os << fmt_g(o.t) << ',' << o.n_a << ',' << o.n_b << ',' << o.n_ab << ','
       << fmt_g(o.magnetization) << ',' << fmt_g(o.domain_size_a) << '\n';
  }
}

// One line per agent: x y spin committed.
inline void write_spin_snapshot(std::ostream& os, const MicroState& st, const Graph& g) {
  for (std::size_t i = 0; i < st.size(); ++i) {
    const auto p = g.position(i);
    os << fmt_g(p.x) << ' ' << fmt_g(p.y) << ' ' << static_cast<int>(st.spin(i))
       << ' ' << (st.is_committed(i) ? 1 : 0) << '\n';
  }
}

}  // namespace ngrgg
