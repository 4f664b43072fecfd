#pragma once
// Reproducible experiment driver: flat key-value configs, named presets,
// per-kind pipelines, and a manifest that records the resolved config plus
// checksums of every artifact. Re-running a manifest reproduces the outputs
// byte for byte.
//
// Seed discipline: every random stream is derived from the root seed as
// derive_seed(seed, purpose, replica) with purposes graph/init/dynamics/
// sampling, so replica k is unchanged when other replicas are added.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ngrgg/analysis.hpp"
#include "ngrgg/geometry.hpp"
#include "ngrgg/io.hpp"
#include "ngrgg/meanfield.hpp"
#include "ngrgg/microsim.hpp"
#include "ngrgg/parallel.hpp"

namespace ngrgg {

enum class ExperimentKind {
  generate_graph,
  run_micro,
  run_meanfield,
  correlation,
  boundary,
  shrink,
  committed_sweep,
  terminal_census,
};

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::generate_graph: return "generate-graph";
    case ExperimentKind::run_micro: return "run-micro";
    case ExperimentKind::run_meanfield: return "run-meanfield";
    case ExperimentKind::correlation: return "correlation";
    case ExperimentKind::boundary: return "boundary";
    case ExperimentKind::shrink: return "shrink";
    case ExperimentKind::committed_sweep: return "committed-sweep";
    case ExperimentKind::terminal_census: return "terminal-census";
  }
  return "?";
}

inline ExperimentKind kind_from_string(const std::string& s) {
  for (auto k : {ExperimentKind::generate_graph, ExperimentKind::run_micro,
                 ExperimentKind::run_meanfield, ExperimentKind::correlation,
                 ExperimentKind::boundary, ExperimentKind::shrink,
                 ExperimentKind::committed_sweep, ExperimentKind::terminal_census})
    if (s == to_string(k)) return k;
  throw std::invalid_argument("kind: unknown experiment kind '" + s + "'");
}

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::run_micro;
  std::size_t n = 10000;
  double radius = 0.05;
  std::size_t grid = 256;
  double q = 0.0;
  double alpha = 0.9;
  double t_max = 100.0;
  double dt = 0.05;
  double sample_every = 10.0;
  std::uint64_t seed = 1;
  std::size_t replicas = 1;
  PairSelection pair_selection = PairSelection::node_first;
  std::string initializer = "random";  // random | disk | stripe | committed | checkerboard | all_a | all_b
  double disk_radius = 0.325;
  double stripe_width = 0.5;
  double noise_amplitude = 0.1;
  double bin_width = 0.0;  // 0 -> radius / 2
  std::size_t n_samples = 1000000;
  std::vector<double> sample_times;  // optional explicit snapshot times
  std::vector<double> q_values;      // committed sweep grid
  std::vector<std::size_t> micro_n;  // micro twin sizes for shrink
  double fit_q_min = 0.06;
  double fit_q_max = 0.0;  // 0 -> q_c
  bool dump_snapshots = false;
  bool dump_mu_spin = false;
  FieldIntegrator integrator = FieldIntegrator::euler;
  std::string out_dir = "out";
};

// --- key-value serialization -------------------------------------------------

namespace detail {

inline std::string join_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) s += ',';
    s += fmt_g(v[k], 17);
  }
  return s;
}

inline std::string join_list(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) s += ',';
    s += std::to_string(v[k]);
  }
  return s;
}

inline std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::istringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stod(tok));
  }
  return out;
}

inline std::vector<std::size_t> parse_size_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::istringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(static_cast<std::size_t>(std::stoull(tok)));
  }
  return out;
}

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

inline std::map<std::string, std::string> config_to_kv(const ExperimentConfig& c) {
  std::map<std::string, std::string> kv;
  kv["kind"] = to_string(c.kind);
  kv["n"] = std::to_string(c.n);
  kv["radius"] = fmt_g(c.radius, 17);
  kv["grid"] = std::to_string(c.grid);
  kv["q"] = fmt_g(c.q, 17);
  kv["alpha"] = fmt_g(c.alpha, 17);
  kv["t_max"] = fmt_g(c.t_max, 17);
  kv["dt"] = fmt_g(c.dt, 17);
  kv["sample_every"] = fmt_g(c.sample_every, 17);
  kv["seed"] = std::to_string(c.seed);
  kv["replicas"] = std::to_string(c.replicas);
  kv["pair_selection"] = c.pair_selection == PairSelection::node_first ? "node" : "edge";
  kv["initializer"] = c.initializer;
  kv["disk_radius"] = fmt_g(c.disk_radius, 17);
  kv["stripe_width"] = fmt_g(c.stripe_width, 17);
  kv["noise_amplitude"] = fmt_g(c.noise_amplitude, 17);
  kv["bin_width"] = fmt_g(c.bin_width, 17);
  kv["n_samples"] = std::to_string(c.n_samples);
  kv["sample_times"] = detail::join_list(c.sample_times);
  kv["q_values"] = detail::join_list(c.q_values);
  kv["micro_n"] = detail::join_list(c.micro_n);
  kv["fit_q_min"] = fmt_g(c.fit_q_min, 17);
  kv["fit_q_max"] = fmt_g(c.fit_q_max, 17);
  kv["integrator"] = c.integrator == FieldIntegrator::euler ? "euler" : "rk4";
  kv["dump_snapshots"] = c.dump_snapshots ? "1" : "0";
  kv["dump_mu_spin"] = c.dump_mu_spin ? "1" : "0";
  kv["out"] = c.out_dir;
  return kv;
}

inline void apply_kv(ExperimentConfig& c, const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) {
    if (key == "kind") c.kind = kind_from_string(value);
    else if (key == "n") c.n = std::stoull(value);
    else if (key == "radius") c.radius = std::stod(value);
    else if (key == "grid") c.grid = std::stoull(value);
    else if (key == "q") c.q = std::stod(value);
    else if (key == "alpha") c.alpha = std::stod(value);
    else if (key == "t_max") c.t_max = std::stod(value);
    else if (key == "dt") c.dt = std::stod(value);
    else if (key == "sample_every") c.sample_every = std::stod(value);
    else if (key == "seed") c.seed = std::stoull(value);
    else if (key == "replicas") c.replicas = std::stoull(value);
    else if (key == "pair_selection") {
      if (value == "node") c.pair_selection = PairSelection::node_first;
      else if (value == "edge") c.pair_selection = PairSelection::edge_first;
      else throw std::invalid_argument("pair_selection: expected node or edge");
    } else if (key == "initializer") c.initializer = value;
    else if (key == "disk_radius") c.disk_radius = std::stod(value);
    else if (key == "stripe_width") c.stripe_width = std::stod(value);
    else if (key == "noise_amplitude") c.noise_amplitude = std::stod(value);
    else if (key == "bin_width") c.bin_width = std::stod(value);
    else if (key == "n_samples") c.n_samples = std::stoull(value);
    else if (key == "sample_times") c.sample_times = detail::parse_double_list(value);
    else if (key == "q_values") c.q_values = detail::parse_double_list(value);
    else if (key == "micro_n") c.micro_n = detail::parse_size_list(value);
    else if (key == "fit_q_min") c.fit_q_min = std::stod(value);
    else if (key == "fit_q_max") c.fit_q_max = std::stod(value);
    else if (key == "integrator") {
      if (value == "euler") c.integrator = FieldIntegrator::euler;
      else if (value == "rk4") c.integrator = FieldIntegrator::rk4;
      else throw std::invalid_argument("integrator: expected euler or rk4");
    } else if (key == "dump_snapshots") c.dump_snapshots = (value == "1" || value == "true");
    else if (key == "dump_mu_spin") c.dump_mu_spin = (value == "1" || value == "true");
    else if (key == "out") c.out_dir = value;
    else throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

// Flat "key = value" file; '#' starts a comment. Manifests parse as configs.
inline std::map<std::string, std::string> parse_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: bad line '" + line + "'");
    kv[detail::trim(t.substr(0, eq))] = detail::trim(t.substr(eq + 1));
  }
  return kv;
}

inline ExperimentConfig load_config(const std::string& path) {
  ExperimentConfig c;
  apply_kv(c, parse_kv_file(path));
  return c;
}

// --- validation ----------------------------------------------------------------

inline bool uses_micro(ExperimentKind k) {
  return k == ExperimentKind::generate_graph || k == ExperimentKind::run_micro ||
         k == ExperimentKind::correlation || k == ExperimentKind::committed_sweep ||
         k == ExperimentKind::shrink;
}

inline bool uses_field(ExperimentKind k) {
  return k == ExperimentKind::run_meanfield || k == ExperimentKind::boundary ||
         k == ExperimentKind::shrink || k == ExperimentKind::terminal_census;
}

inline void validate(const ExperimentConfig& c) {
  if (!(c.radius > 0.0 && c.radius < 0.5))
    throw std::invalid_argument("radius: require 0 < radius < 0.5");
  if (uses_micro(c.kind) && c.n < 2)
    throw std::invalid_argument("n: require at least 2 agents");
  if (uses_field(c.kind) && static_cast<double>(c.grid) * c.radius < 5.0)
    throw std::invalid_argument(
        "grid: resolution contract h <= r/5 violated (grid=" +
        std::to_string(c.grid) + ", radius=" + fmt_g(c.radius) + ")");
  if (uses_field(c.kind) && !(c.dt > 0.0 && c.dt <= 0.1))
    throw std::invalid_argument("dt: require 0 < dt <= 0.1");
  if (!(c.alpha > 0.5 && c.alpha <= 1.0))
    throw std::invalid_argument("alpha: require 0.5 < alpha <= 1");
  if (!(c.q >= 0.0 && c.q <= 1.0))
    throw std::invalid_argument("q: require 0 <= q <= 1");
  if (!(c.t_max > 0.0)) throw std::invalid_argument("t_max: require t_max > 0");
  if (!(c.sample_every > 0.0))
    throw std::invalid_argument("sample_every: require sample_every > 0");
  if (c.replicas < 1) throw std::invalid_argument("replicas: require at least 1");
  if (c.kind == ExperimentKind::committed_sweep && c.q_values.empty())
    throw std::invalid_argument("q_values: committed-sweep needs a q grid");
  for (double qv : c.q_values)
    if (!(qv >= 0.0 && qv <= 1.0))
      throw std::invalid_argument("q_values: entries must lie in [0, 1]");
  static const char* known_inits[] = {"random", "disk",  "stripe",      "committed",
                                      "checkerboard",    "all_a",       "all_b"};
  if (std::find_if(std::begin(known_inits), std::end(known_inits),
                   [&](const char* s) { return c.initializer == s; }) ==
      std::end(known_inits))
    throw std::invalid_argument("initializer: unknown initializer '" + c.initializer + "'");
  if (c.bin_width < 0.0) throw std::invalid_argument("bin_width: must be >= 0");
}

// --- presets --------------------------------------------------------------------

inline std::vector<std::string> preset_names() {
  return {"fig2-coarsening", "fig5-adiabatic", "fig7-curvature",
          "fig8-shrink",     "fig9-committed", "terminal-census"};
}

// Desk-scale configurations for the headline experiments.
inline ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  c.out_dir = name;
  if (name == "fig2-coarsening") {
    c.kind = ExperimentKind::correlation;
    c.n = 100000;
    c.radius = 0.01;  // <k> = 31.4
    c.sample_times = {30, 50, 100, 200, 400};
    c.t_max = 400;
    c.replicas = 4;
    c.n_samples = 4000000;
    c.bin_width = 0.005;
  } else if (name == "fig5-adiabatic") {
    c.kind = ExperimentKind::run_micro;
    c.n = 100000;
    c.radius = 0.01;
    c.t_max = 100;
    c.sample_times = {30, 50, 100};
    c.sample_every = 10;
    c.dump_mu_spin = true;
  } else if (name == "fig7-curvature") {
    c.kind = ExperimentKind::boundary;
    c.grid = 512;
    c.radius = 0.05;
    c.initializer = "disk";
    c.disk_radius = 0.325;
    c.dt = 0.05;
    c.sample_every = 2;
    c.t_max = 400;
  } else if (name == "fig8-shrink") {
    c.kind = ExperimentKind::shrink;
    c.grid = 512;
    c.radius = 0.05;
    c.initializer = "disk";
    c.disk_radius = 0.325;
    c.dt = 0.05;
    c.sample_every = 1;
    c.t_max = 400;
    c.micro_n = {10000, 20000};  // <k> = 78.5 and 157
    c.replicas = 8;
  } else if (name == "fig9-committed") {
    c.kind = ExperimentKind::committed_sweep;
    c.n = 2000;
    c.radius = std::sqrt(15.0 / (2000.0 * M_PI));  // <k> = 15
    c.alpha = 0.9;
    c.q_values = {0.05, 0.055, 0.06, 0.0625, 0.065, 0.0675, 0.07, 0.08, 0.09, 0.1, 0.12};
    c.replicas = 20;
    c.t_max = 20000;
    c.initializer = "committed";
  } else if (name == "terminal-census") {
    c.kind = ExperimentKind::terminal_census;
    c.grid = 128;
    c.radius = 0.05;
    c.dt = 0.05;
    c.t_max = 5000;
    c.replicas = 100;
  } else {
    std::string msg = "preset: unknown name '" + name + "'; valid presets:";
    for (const auto& p : preset_names()) msg += " " + p;
    throw std::invalid_argument(msg);
  }
  return c;
}

// --- runner ----------------------------------------------------------------------

struct ExperimentResult {
  std::vector<std::string> files;  // relative to out_dir
  std::vector<std::string> summary;
};

namespace detail {

class OutputSink {
 public:
  explicit OutputSink(std::string dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  const std::string& dir() const { return dir_; }

  void write(const std::string& name, std::string_view content) {
    write_file(path(name), content);
    names_.push_back(name);
  }

  std::string path(const std::string& name) const { return dir_ + "/" + name; }
  const std::vector<std::string>& names() const { return names_; }

  void remove_all_written() {
    for (const auto& n : names_) {
      std::error_code ec;
      std::filesystem::remove(path(n), ec);
    }
  }

 private:
  std::string dir_;
  std::vector<std::string> names_;
};

inline void write_manifest(OutputSink& sink, const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "# experiment manifest; reload with --config to reproduce\n";
  os << "# streams: derive_seed(seed, purpose in {graph,init,dynamics,sampling}, replica)\n";
  for (const auto& [k, v] : config_to_kv(cfg)) os << k << " = " << v << "\n";
  for (const auto& name : sink.names()) {
    char hex[32];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(read_file(sink.path(name)))));
    os << "# artifact " << hex << " " << name << "\n";
  }
  sink.write("manifest.txt", os.str());
}

inline void init_micro_state(const ExperimentConfig& cfg, MicroState& st,
                             const Graph& g, std::uint64_t replica) {
  Rng init = make_rng(derive_seed(cfg.seed, SeedPurpose::init, replica));
  if (cfg.initializer == "random") init_random_ab(st, init);
  else if (cfg.initializer == "disk") init_disk(st, g, {0.5, 0.5}, cfg.disk_radius);
  else if (cfg.initializer == "stripe") init_stripe(st, g, 0.25, cfg.stripe_width);
  else if (cfg.initializer == "committed") seed_committed(st, cfg.q, SPIN_A, init);
  else if (cfg.initializer == "all_a") init_all(st, SPIN_A);
  else if (cfg.initializer == "all_b") init_all(st, SPIN_B);
  else throw std::invalid_argument("initializer: '" + cfg.initializer + "' not valid for micro runs");
}

inline void init_field(const ExperimentConfig& cfg, FieldGrid& g, std::uint64_t replica) {
  g.set_integrator(cfg.integrator);
  Rng init = make_rng(derive_seed(cfg.seed, SeedPurpose::init, replica));
  if (cfg.initializer == "random") init_random_smooth(g, init, cfg.noise_amplitude);
  else if (cfg.initializer == "disk") init_disk(g, {0.5, 0.5}, cfg.disk_radius);
  else if (cfg.initializer == "stripe") init_stripe(g, 0.25, cfg.stripe_width);
  else if (cfg.initializer == "checkerboard") init_checkerboard(g, 4);
  else throw std::invalid_argument("initializer: '" + cfg.initializer + "' not valid for field runs");
}

inline Graph replica_graph(const ExperimentConfig& cfg, std::uint64_t replica) {
  return Graph::random(cfg.n, cfg.radius, derive_seed(cfg.seed, SeedPurpose::graph, replica));
}

// sample times for a run: explicit list when given, else a regular grid
inline std::vector<double> resolve_sample_times(const ExperimentConfig& cfg) {
  if (!cfg.sample_times.empty()) return cfg.sample_times;
  std::vector<double> times;
  for (double t = cfg.sample_every; t <= cfg.t_max + 1e-9; t += cfg.sample_every)
    times.push_back(t);
  return times;
}

// --- generate-graph ---

inline void run_generate_graph(const ExperimentConfig& cfg, OutputSink& sink,
                               ExperimentResult& res) {
  const Graph g = replica_graph(cfg, 0);
  std::ostringstream gs;
  g.serialize(gs);
  sink.write("graph.txt", gs.str());
  const auto rep = connected_components(g);
  std::ostringstream cs;
  cs << "n = " << g.n() << "\n";
  cs << "radius = " << fmt_g(g.radius()) << "\n";
  cs << "mean_degree = " << fmt_g(rep.mean_degree) << "\n";
  cs << "component_count = " << rep.component_count << "\n";
  cs << "giant_fraction = " << fmt_g(rep.giant_fraction) << "\n";
  cs << "is_connected = " << (rep.is_connected ? 1 : 0) << "\n";
  cs << "low_degree_warning = " << (rep.low_degree_warning ? 1 : 0) << "\n";
  sink.write("components.txt", cs.str());
  res.summary.push_back("mean degree " + fmt_g(rep.mean_degree) +
                        (rep.low_degree_warning ? " (below ln n: connectivity not guaranteed)" : ""));
}

// --- run-micro ---

inline void run_micro_kind(const ExperimentConfig& cfg, OutputSink& sink,
                           ExperimentResult& res) {
  const auto times = resolve_sample_times(cfg);
  struct ReplicaOut {
    std::string observables;
    std::string mu_spin;
    std::vector<std::pair<double, std::string>> snapshots;
  };
  std::vector<ReplicaOut> outs(cfg.replicas);

  parallel_for(cfg.replicas, [&](std::size_t k) {
    const Graph g = replica_graph(cfg, k);
    MicroState st(g.n(), derive_seed(cfg.seed, SeedPurpose::dynamics, k));
    init_micro_state(cfg, st, g, k);
    std::vector<Observables> obs;
    obs.push_back(st.observe());
    std::ostringstream mu_csv;
    if (cfg.dump_mu_spin) mu_csv << "t,mu_mean,spin_mean,count\n";
    auto dump_mu_bins = [&] {
      std::vector<double> mu_sum(20, 0.0), s_sum(20, 0.0);
      std::vector<std::uint64_t> count(20, 0);
      for (std::size_t i = 0; i < st.size(); ++i) {
        if (g.degree(i) == 0) continue;
        const double mu = local_mean_field(st, g, i);
        const auto b = std::min<std::size_t>(19, static_cast<std::size_t>((mu + 1.0) * 10.0));
        mu_sum[b] += mu;
        s_sum[b] += st.spin(i);
        ++count[b];
      }
      for (std::size_t b = 0; b < 20; ++b)
        if (count[b])
          mu_csv << fmt_g(st.t()) << ',' << fmt_g(mu_sum[b] / count[b]) << ','
                 << fmt_g(s_sum[b] / count[b]) << ',' << count[b] << '\n';
    };
    for (double target : times) {
      if (target > cfg.t_max + 1e-9) break;
      while (st.t() < target) step(st, g, cfg.pair_selection);
      obs.push_back(st.observe());
      if (cfg.dump_mu_spin) dump_mu_bins();
      if (cfg.dump_snapshots) {
        std::ostringstream snap;
        write_spin_snapshot(snap, st, g);
        outs[k].snapshots.emplace_back(target, snap.str());
      }
    }
    std::ostringstream os;
    write_observables_csv(os, obs);
    outs[k].observables = os.str();
    outs[k].mu_spin = mu_csv.str();
  }, 2);

  for (std::size_t k = 0; k < cfg.replicas; ++k) {
    sink.write("observables_r" + std::to_string(k) + ".csv", outs[k].observables);
    if (cfg.dump_mu_spin)
      sink.write("mu_spin_r" + std::to_string(k) + ".csv", outs[k].mu_spin);
    for (auto& [t, body] : outs[k].snapshots)
      sink.write("spins_t" + fmt_g(t) + "_r" + std::to_string(k) + ".txt", body);
  }
  res.summary.push_back(std::to_string(cfg.replicas) + " micro replica(s) to t = " +
                        fmt_g(cfg.t_max));
}

// --- run-meanfield ---

inline void run_meanfield_kind(const ExperimentConfig& cfg, OutputSink& sink,
                               ExperimentResult& res) {
  const auto times = resolve_sample_times(cfg);
  for (std::size_t k = 0; k < cfg.replicas; ++k) {
    FieldGrid g(cfg.grid, cfg.radius, cfg.q);
    init_field(cfg, g, k);
    std::vector<FieldSample> series;
    series.push_back(sample_field(g));
    for (double target : times) {
      if (target > cfg.t_max + 1e-9) break;
      while (g.t() < target - 1e-9) g.step(cfg.dt);
      series.push_back(sample_field(g));
      if (cfg.dump_snapshots) {
        std::ostringstream snap;
        write_pgm(snap, g);
        const std::string suffix =
            cfg.replicas > 1 ? "_r" + std::to_string(k) : std::string{};
        std::string name = snapshot_filename(g.t());
        if (!suffix.empty()) name.insert(name.size() - 4, suffix);
        sink.write(name, snap.str());
      }
    }
    std::ostringstream os;
    write_field_series_csv(os, series);
    sink.write("field_series_r" + std::to_string(k) + ".csv", os.str());
    std::ostringstream state;
    write_field_csv(state, g);
    sink.write("state_final_r" + std::to_string(k) + ".csv", state.str());
    res.summary.push_back("replica " + std::to_string(k) + ": mean s at t_max = " +
                          fmt_g(g.mean_s()) +
                          ", renormalization events = " +
                          std::to_string(g.renormalization_events()));
  }
}

// --- correlation ---

inline void run_correlation_kind(const ExperimentConfig& cfg, OutputSink& sink,
                                 ExperimentResult& res) {
  const auto times = resolve_sample_times(cfg);
  const double bw = cfg.bin_width > 0.0 ? cfg.bin_width : cfg.radius / 2.0;
  std::vector<std::vector<CorrelationCurve>> per_time(times.size());
  for (auto& v : per_time) v.resize(cfg.replicas);

  parallel_for(cfg.replicas, [&](std::size_t k) {
    const Graph g = replica_graph(cfg, k);
    MicroState st(g.n(), derive_seed(cfg.seed, SeedPurpose::dynamics, k));
    init_micro_state(cfg, st, g, k);
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
      while (st.t() < times[ti]) step(st, g, cfg.pair_selection);
      Rng sampler = make_rng(
          derive_seed(cfg.seed, SeedPurpose::sampling, k * 1000 + ti));
      per_time[ti][k] = pair_correlation(st, g, bw, cfg.n_samples, sampler);
    }
  }, 2);

  std::vector<CorrelationCurve> pooled;
  for (std::size_t ti = 0; ti < times.size(); ++ti)
    pooled.push_back(pool_correlation(per_time[ti]));
  std::ostringstream os;
  write_correlation_csv(os, pooled);
  sink.write("correlation.csv", os.str());

  // collapse quality under the two candidate coarsening length scales,
  // evaluated over the late-time snapshots (t >= 100 when available)
  std::vector<CorrelationCurve> late;
  for (const auto& c : pooled)
    if (c.t >= 100.0 - 1e-9) late.push_back(c);
  if (late.size() < 2) late = pooled;
  std::ostringstream cs;
  if (late.size() >= 2) {
    const auto sqrt_scale = [](double t) { return std::sqrt(t); };
    const auto log_scale = [](double t) { return std::sqrt(t) / std::log(t); };
    cs << "scale,error,error_normalized\n";
    cs << "sqrt(t)," << fmt_g(collapse_error(late, sqrt_scale)) << ','
       << fmt_g(collapse_error(late, sqrt_scale, 100, 100, true)) << "\n";
    cs << "sqrt(t)/ln(t)," << fmt_g(collapse_error(late, log_scale)) << ','
       << fmt_g(collapse_error(late, log_scale, 100, 100, true)) << "\n";
    res.summary.push_back(
        "normalized collapse error sqrt(t) = " +
        fmt_g(collapse_error(late, sqrt_scale, 100, 100, true)) +
        ", sqrt(t)/ln(t) = " + fmt_g(collapse_error(late, log_scale, 100, 100, true)));
  }
  sink.write("collapse.csv", cs.str());
}

// --- boundary (curvature vs speed) ---

inline void run_boundary_kind(const ExperimentConfig& cfg, OutputSink& sink,
                              ExperimentResult& res) {
  FieldGrid g(cfg.grid, cfg.radius, cfg.q);
  init_field(cfg, g, 0);
  const double h = g.h();
  // sharp initial conditions need a few units to relax into layered
  // interfaces before displacements measure curvature-driven motion
  const double warmup = 10.0;
  while (g.t() < warmup - 1e-9) g.step(cfg.dt);

  std::ostringstream bos;
  bool header = true;
  std::vector<std::pair<double, double>> vr;  // (R, v) with v > 0
  auto s_of = [&] {
    auto view = g.order_parameter();
    return std::vector<double>(view.begin(), view.end());
  };
  std::vector<Contour> prev = extract_boundary(s_of(), cfg.grid);
  double prev_t = g.t();
  while (g.t() < cfg.t_max - 1e-9) {
    const double target = std::min(cfg.t_max, g.t() + cfg.sample_every);
    while (g.t() < target - 1e-9) g.step(cfg.dt);
    const auto curr = extract_boundary(s_of(), cfg.grid);
    if (curr.empty()) break;  // consensus reached
    // nearest-point queries run against all current contours at once
    Contour merged;
    for (const auto& c : curr)
      merged.pts.insert(merged.pts.end(), c.pts.begin(), c.pts.end());
    std::vector<CurvatureSpeedSample> all;
    for (const auto& c : prev) {
      const auto samples = curvature_and_speed(c, merged, g.t() - prev_t, h);
      all.insert(all.end(), samples.begin(), samples.end());
    }
    write_boundary_csv(bos, prev_t, all, header);
    header = false;
    for (const auto& smp : all)
      if (smp.v > 0.0) vr.emplace_back(smp.R, smp.v);
    prev = curr;
    prev_t = g.t();
  }
  sink.write("boundary.csv", bos.str());

  std::ostringstream fs;
  fs << "name,gamma,intercept,residual\n";
  if (vr.size() >= 10) {
    const auto fit = fit_power_law(vr, std::max(10.0 * h, 1.5 * cfg.radius), 0.35);
    fs << "v_vs_R," << fmt_g(fit.exponent) << ',' << fmt_g(fit.amplitude) << ','
       << fmt_g(fit.residual) << "\n";
    std::vector<double> alphas;
    for (const auto& [R, v] : vr) alphas.push_back(R * v);
    std::nth_element(alphas.begin(), alphas.begin() + alphas.size() / 2, alphas.end());
    fs << "alpha_from_vR," << fmt_g(alphas[alphas.size() / 2]) << ",0,0\n";
    res.summary.push_back("v ~ R^-gamma fit: gamma = " + fmt_g(fit.exponent) +
                          ", median vR = " + fmt_g(alphas[alphas.size() / 2]));
  }
  sink.write("fits.csv", fs.str());
}

// --- shrink (disk decay, mean-field and micro twins) ---

inline void run_shrink_kind(const ExperimentConfig& cfg, OutputSink& sink,
                            ExperimentResult& res) {
  std::ostringstream fits;
  fits << "name,gamma,intercept,residual\n";

  {
    FieldGrid g(cfg.grid, cfg.radius, cfg.q);
    g.set_integrator(cfg.integrator);
    init_disk(g, {0.5, 0.5}, cfg.disk_radius);
    std::vector<std::pair<double, double>> series;
    series.emplace_back(g.t(), g.domain_size_a());
    while (g.t() < cfg.t_max - 1e-9) {
      const double target = g.t() + cfg.sample_every;
      while (g.t() < target - 1e-9) g.step(cfg.dt);
      series.emplace_back(g.t(), g.domain_size_a());
      if (series.back().second < 0.02) break;  // disk collapsed
    }
    std::ostringstream os;
    write_domain_size_csv(os, series);
    sink.write("domain_size_meanfield.csv", os.str());
    const auto fit = fit_shrink_window(series, 0.1);
    fits << "meanfield_slope," << fmt_g(fit.slope) << ',' << fmt_g(fit.intercept)
         << ',' << fmt_g(fit.r2) << "\n";
    res.summary.push_back("mean-field dS/dt = " + fmt_g(fit.slope) +
                          " (R^2 = " + fmt_g(fit.r2) + ")");
  }

  for (std::size_t size_idx = 0; size_idx < cfg.micro_n.size(); ++size_idx) {
    const std::size_t n = cfg.micro_n[size_idx];
    // replica-averaged S(t); columns aligned on unit times
    const auto steps = static_cast<std::size_t>(std::llround(cfg.t_max / cfg.sample_every));
    std::vector<double> acc(steps + 1, 0.0);
    std::vector<std::uint64_t> cnt(steps + 1, 0);
    parallel_for(cfg.replicas, [&, n](std::size_t k) {
      const std::uint64_t stream = size_idx * 10000 + k;
      const Graph g =
          Graph::random(n, cfg.radius, derive_seed(cfg.seed, SeedPurpose::graph, stream));
      MicroState st(g.n(), derive_seed(cfg.seed, SeedPurpose::dynamics, stream));
      init_disk(st, g, {0.5, 0.5}, cfg.disk_radius);
      for (std::size_t si = 0; si <= steps; ++si) {
        const double target = si * cfg.sample_every;
        while (st.t() < target) step(st, g, cfg.pair_selection);
        const auto o = st.observe();
        acc[si] += o.domain_size_a;
        ++cnt[si];
        if (o.domain_size_a < 0.01) break;
      }
    }, 2);
    std::vector<std::pair<double, double>> series;
    for (std::size_t si = 0; si <= steps; ++si) {
      if (cnt[si] < cfg.replicas) break;  // keep the fully-populated window
      series.emplace_back(si * cfg.sample_every, acc[si] / static_cast<double>(cnt[si]));
    }
    std::ostringstream os;
    write_domain_size_csv(os, series);
    const int mean_deg = static_cast<int>(std::lround(M_PI * cfg.radius * cfg.radius * n));
    sink.write("domain_size_micro_k" + std::to_string(mean_deg) + ".csv", os.str());
    const auto fit = fit_shrink_window(series, 0.1);
    fits << "micro_k" << mean_deg << "_slope," << fmt_g(fit.slope) << ','
         << fmt_g(fit.intercept) << ',' << fmt_g(fit.r2) << "\n";
    res.summary.push_back("micro <k>=" + std::to_string(mean_deg) +
                          " dS/dt = " + fmt_g(fit.slope));
  }
  sink.write("fits.csv", fits.str());
}

// --- committed sweep ---

inline void run_committed_sweep_kind(const ExperimentConfig& cfg, OutputSink& sink,
                                     ExperimentResult& res) {
  struct Cell {
    double q;
    std::size_t replica;
    double t_c;  // -1 on timeout
  };
  std::vector<Cell> rows(cfg.q_values.size() * cfg.replicas);
  parallel_for(rows.size(), [&](std::size_t idx) {
    const std::size_t qi = idx / cfg.replicas;
    const std::size_t k = idx % cfg.replicas;
    const double qv = cfg.q_values[qi];
    const std::uint64_t stream = qi * 100000 + k;
    const Graph g =
        Graph::random(cfg.n, cfg.radius, derive_seed(cfg.seed, SeedPurpose::graph, stream));
    MicroState st(g.n(), derive_seed(cfg.seed, SeedPurpose::dynamics, stream));
    Rng init = make_rng(derive_seed(cfg.seed, SeedPurpose::init, stream));
    seed_committed(st, qv, SPIN_A, init);
    const auto tc = alpha_consensus_time(st, g, cfg.alpha, cfg.t_max,
                                         cfg.pair_selection, SPIN_A);
    rows[idx] = {qv, k, tc ? *tc : -1.0};
  }, 2);

  std::ostringstream os;
  os << "q,replica,t_c\n";
  for (const auto& c : rows)
    os << fmt_g(c.q, 17) << ',' << c.replica << ',' << fmt_g(c.t_c) << '\n';
  sink.write("sweep.csv", os.str());

  // median t_c per q and the power-law fit over the configured window
  std::ostringstream fs;
  fs << "name,gamma,intercept,residual\n";
  std::vector<std::pair<double, double>> medians;
  for (std::size_t qi = 0; qi < cfg.q_values.size(); ++qi) {
    std::vector<double> tcs;
    for (std::size_t k = 0; k < cfg.replicas; ++k) {
      const double tc = rows[qi * cfg.replicas + k].t_c;
      if (tc >= 0.0) tcs.push_back(tc);
    }
    if (tcs.size() * 2 < cfg.replicas) continue;  // mostly timeouts
    std::nth_element(tcs.begin(), tcs.begin() + tcs.size() / 2, tcs.end());
    medians.emplace_back(cfg.q_values[qi], tcs[tcs.size() / 2]);
  }
  const double fit_hi = cfg.fit_q_max > 0.0 ? cfg.fit_q_max : critical_committed_fraction();
  std::vector<std::pair<double, double>> window;
  for (const auto& p : medians)
    if (p.first > cfg.fit_q_min && p.first < fit_hi && p.second > 0.0)
      window.push_back(p);
  if (window.size() >= 3) {
    const auto fit = fit_power_law(window, cfg.fit_q_min, fit_hi);
    fs << "tc_vs_q," << fmt_g(fit.exponent) << ',' << fmt_g(fit.amplitude) << ','
       << fmt_g(fit.residual) << "\n";
    res.summary.push_back("t_c ~ q^-gamma with gamma = " + fmt_g(fit.exponent));
  }
  sink.write("fits.csv", fs.str());
}

// --- terminal census ---

// Runs mean-field trajectories from smooth random starts until consensus,
// stall, or t_max, then classifies the terminal state.
inline TerminalState run_census_replica(const ExperimentConfig& cfg, std::uint64_t k) {
  FieldGrid g(cfg.grid, cfg.radius, cfg.q);
  g.set_threads(1);
  g.set_integrator(cfg.integrator);
  Rng init = make_rng(derive_seed(cfg.seed, SeedPurpose::init, k));
  init_random_smooth(g, init, cfg.noise_amplitude);
  const double check_every = 25.0;
  std::vector<double> prev(g.order_parameter().begin(), g.order_parameter().end());
  double prev_t = g.t();
  while (g.t() < cfg.t_max) {
    const double target = g.t() + check_every;
    while (g.t() < target - 1e-9) g.step(cfg.dt);
    const double mean = g.mean_s();
    if (std::abs(mean) > 0.99) break;
    auto s = g.order_parameter();
    double rate = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
      rate = std::max(rate, std::abs(s[i] - prev[i]));
    rate /= (g.t() - prev_t);
    if (g.t() > 100.0 && rate < 2e-5) break;  // stalled: stationary pattern
    prev.assign(s.begin(), s.end());
    prev_t = g.t();
  }
  auto s = g.order_parameter();
  return classify_terminal_state(s, cfg.grid);
}

inline void run_census_kind(const ExperimentConfig& cfg, OutputSink& sink,
                            ExperimentResult& res) {
  std::vector<TerminalState> outcomes(cfg.replicas);
  parallel_for(cfg.replicas, [&](std::size_t k) {
    outcomes[k] = run_census_replica(cfg, k);
  }, 2);
  std::ostringstream os;
  os << "replica,outcome\n";
  std::size_t stripes = 0, cons = 0;
  for (std::size_t k = 0; k < cfg.replicas; ++k) {
    os << k << ',' << to_string(outcomes[k]) << '\n';
    if (outcomes[k] == TerminalState::stripe) ++stripes;
    if (outcomes[k] == TerminalState::consensus_a || outcomes[k] == TerminalState::consensus_b)
      ++cons;
  }
  sink.write("census.csv", os.str());
  std::ostringstream sm;
  const double frac = static_cast<double>(stripes) / static_cast<double>(cfg.replicas);
  sm << "replicas = " << cfg.replicas << "\n";
  sm << "consensus = " << cons << "\n";
  sm << "stripe = " << stripes << "\n";
  sm << "stripe_fraction = " << fmt_g(frac) << "\n";
  sink.write("summary.txt", sm.str());
  res.summary.push_back("stripe fraction = " + fmt_g(frac));
}

}  // namespace detail

// Executes the configured pipeline; on failure every file already written is
// removed before the error propagates.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  detail::OutputSink sink(cfg.out_dir);
  ExperimentResult res;
  try {
    switch (cfg.kind) {
      case ExperimentKind::generate_graph:
        detail::run_generate_graph(cfg, sink, res);
        break;
      case ExperimentKind::run_micro:
        detail::run_micro_kind(cfg, sink, res);
        break;
      case ExperimentKind::run_meanfield:
        detail::run_meanfield_kind(cfg, sink, res);
        break;
      case ExperimentKind::correlation:
        detail::run_correlation_kind(cfg, sink, res);
        break;
      case ExperimentKind::boundary:
        detail::run_boundary_kind(cfg, sink, res);
        break;
      case ExperimentKind::shrink:
        detail::run_shrink_kind(cfg, sink, res);
        break;
      case ExperimentKind::committed_sweep:
        detail::run_committed_sweep_kind(cfg, sink, res);
        break;
      case ExperimentKind::terminal_census:
        detail::run_census_kind(cfg, sink, res);
        break;
    }
    detail::write_manifest(sink, cfg);
  } catch (...) {
    sink.remove_all_written();
    throw;
  }
  res.files = sink.names();
  return res;
}

}  // namespace ngrgg
