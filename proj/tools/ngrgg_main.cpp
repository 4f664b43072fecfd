// Command-line driver for the naming-game simulation suite.
//
// One subcommand per experiment kind plus `preset <name>`. Option values
// override, in order: built-in defaults, then --config file, then preset,
// then explicit flags. NGRGG_OUT_ROOT, when set, prefixes relative --out
// paths.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ngrgg/experiment.hpp"

using namespace ngrgg;

namespace {

void bind_common_flags(CLI::App* sub, ExperimentConfig& cfg) {
  sub->add_option("--n", cfg.n, "agent count");
  sub->add_option("--radius", cfg.radius, "interaction radius (torus units)");
  sub->add_option("--grid", cfg.grid, "field cells per axis");
  sub->add_option("--q", cfg.q, "committed fraction");
  sub->add_option("--alpha", cfg.alpha, "consensus fraction threshold");
  sub->add_option("--t-max", cfg.t_max, "run length in time units");
  sub->add_option("--dt", cfg.dt, "field integrator step");
  sub->add_option("--sample-every", cfg.sample_every, "sampling interval");
  sub->add_option("--seed", cfg.seed, "root seed");
  sub->add_option("--replicas", cfg.replicas, "independent replicas");
  sub->add_option("--out", cfg.out_dir, "output directory");
  sub->add_option("--initializer", cfg.initializer,
                  "random | disk | stripe | committed | checkerboard | all_a | all_b");
  sub->add_option("--disk-radius", cfg.disk_radius, "seeded disk radius");
  sub->add_option("--stripe-width", cfg.stripe_width, "seeded stripe width");
  sub->add_option("--noise-amplitude", cfg.noise_amplitude, "random field amplitude");
  sub->add_option("--bin-width", cfg.bin_width, "correlation bin width (0 = r/2)");
  sub->add_option("--n-samples", cfg.n_samples, "correlation sample pairs");
  sub->add_option("--sample-times", [&cfg](const std::vector<std::string>& vals) {
        cfg.sample_times = detail::parse_double_list(vals.at(0));
        return true;
      }, "comma-separated sample times");
  sub->add_option("--q-values", [&cfg](const std::vector<std::string>& vals) {
        cfg.q_values = detail::parse_double_list(vals.at(0));
        return true;
      }, "comma-separated committed fractions");
  sub->add_option("--micro-n", [&cfg](const std::vector<std::string>& vals) {
        cfg.micro_n = detail::parse_size_list(vals.at(0));
        return true;
      }, "comma-separated micro twin sizes");
  sub->add_option("--integrator", [&cfg](const std::vector<std::string>& vals) {
        if (vals.at(0) == "euler") cfg.integrator = FieldIntegrator::euler;
        else if (vals.at(0) == "rk4") cfg.integrator = FieldIntegrator::rk4;
        else throw CLI::ValidationError("--integrator", "expected euler or rk4");
        return true;
      }, "field integrator: euler | rk4");
  sub->add_option("--fit-q-min", cfg.fit_q_min, "power-law fit window lower edge");
  sub->add_option("--fit-q-max", cfg.fit_q_max, "power-law fit window upper edge (0 = q_c)");
  sub->add_flag("--dump-snapshots", cfg.dump_snapshots, "write state snapshots");
  sub->add_flag("--dump-mu-spin", cfg.dump_mu_spin, "write binned mu vs spin tables");
  sub->add_option("--pair-selection", [&cfg](const std::vector<std::string>& vals) {
        if (vals.at(0) == "node") cfg.pair_selection = PairSelection::node_first;
        else if (vals.at(0) == "edge") cfg.pair_selection = PairSelection::edge_first;
        else throw CLI::ValidationError("--pair-selection", "expected node or edge");
        return true;
      }, "node | edge");
  // consumed during the pre-scan; registered so CLI11 accepts it anywhere
  static std::string ignored;
  sub->add_option("--config", ignored, "key = value config file (e.g. a manifest)");
}

}  // namespace

int main(int argc, char** argv) {
  ExperimentConfig cfg;

  // Pre-scan: --config and the preset name shape the base configuration
  // before flag overrides bind.
  try {
    for (int i = 1; i + 1 < argc; ++i)
      if (std::string(argv[i]) == "--config") cfg = load_config(argv[i + 1]);
    if (argc >= 3 && std::string(argv[1]) == "preset") {
      const std::string name = argv[2];
      if (!name.empty() && name[0] != '-') cfg = preset(name);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  CLI::App app{"naming-game dynamics on random geometric graphs"};
  app.require_subcommand(1);

  struct KindSub {
    ExperimentKind kind;
    CLI::App* sub;
  };
  std::vector<KindSub> subs;
  for (auto kind : {ExperimentKind::generate_graph, ExperimentKind::run_micro,
                    ExperimentKind::run_meanfield, ExperimentKind::correlation,
                    ExperimentKind::boundary, ExperimentKind::shrink,
                    ExperimentKind::committed_sweep, ExperimentKind::terminal_census}) {
    CLI::App* sub = app.add_subcommand(to_string(kind), "");
    bind_common_flags(sub, cfg);
    subs.push_back({kind, sub});
  }
  CLI::App* preset_sub = app.add_subcommand("preset", "run a named preset");
  std::string preset_name;
  preset_sub->add_option("name", preset_name, "preset name")->required();
  bind_common_flags(preset_sub, cfg);
  CLI::App* list_sub = app.add_subcommand("list-presets", "list preset names");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (list_sub->parsed()) {
    for (const auto& name : preset_names()) std::cout << name << "\n";
    return 0;
  }
  for (const auto& [kind, sub] : subs)
    if (sub->parsed()) cfg.kind = kind;

  if (const char* root = std::getenv("NGRGG_OUT_ROOT");
      root && *root && !cfg.out_dir.empty() && cfg.out_dir[0] != '/')
    cfg.out_dir = std::string(root) + "/" + cfg.out_dir;

  try {
    const ExperimentResult res = run_experiment(cfg);
    std::cout << to_string(cfg.kind) << " -> " << cfg.out_dir << "\n";
    for (const auto& line : res.summary) std::cout << "  " << line << "\n";
    std::cout << "  " << res.files.size() << " file(s), manifest.txt written\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
