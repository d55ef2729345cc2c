// stacca: train / evaluate / ablate graph-transformer control policies, plus
// canonical graph generation. Exit codes: 0 ok, 2 config error, 3 artifact
// error, 4 numeric failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stacca/checkpoint.hpp"
#include "stacca/config.hpp"
#include "stacca/errors.hpp"
#include "stacca/eval.hpp"
#include "stacca/experiment.hpp"
#include "stacca/graph.hpp"

namespace fs = std::filesystem;
using namespace stacca;

namespace {

void apply_sets(KvTree& kv, const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0)
      throw config_error("--set expects dotted.path=value, got '" + s + "'");
    kv.set(s.substr(0, eq), s.substr(eq + 1));
  }
}

struct TrainArgs {
  std::string config;
  std::vector<std::string> sets;
  bool resume = false;
  int threads = 0;
};

int cmd_train(const TrainArgs& args) {
  KvTree kv = KvTree::parse_file(args.config);
  apply_sets(kv, args.sets);
  if (args.threads > 0) kv.set("train.threads", std::to_string(args.threads));
  const ExperimentConfig cfg = load_experiment_config(kv);
  const std::string run_dir =
      resolve_output_dir(cfg.output_dir) + "/" + cfg.run_name;
  const RunResult result = run_training(cfg, run_dir, args.resume);
  std::cout << "run dir: " << result.dir << "\n"
            << "iterations: " << result.train.metrics.size() << "\n";
  if (result.train.best_iter >= 0)
    std::cout << "best mean episode reward: " << result.train.best_reward
              << " (iter " << result.train.best_iter << ")\n";
  std::cout << "checkpoint: " << result.checkpoint_last << "\n";
  return 0;
}

struct EvalArgs {
  std::vector<std::string> scenario_paths;
  std::vector<std::string> baselines;
  std::string out_dir = "eval_out";
  int threads = 0;
};

int cmd_eval(const EvalArgs& args) {
  std::vector<EvalScenario> scenarios;
  for (const auto& path : args.scenario_paths) {
    EvalScenario sc = load_scenario(KvTree::parse_file(path));
    if (args.threads > 0) sc.threads = args.threads;
    scenarios.push_back(std::move(sc));
  }
  std::vector<BaselineKind> baselines;
  for (const auto& b : args.baselines) baselines.push_back(baseline_from_string(b));

  const auto rows = compare(scenarios, baselines);
  const std::string out_dir = resolve_output_dir(args.out_dir);
  fs::create_directories(out_dir);
  {
    std::ofstream ts(out_dir + "/timeseries.csv");
    write_timeseries_csv(ts, rows);
    std::ofstream sm(out_dir + "/summary.csv");
    write_summary_csv(sm, rows);
  }
  write_summary_csv(std::cout, rows);
  std::cout << "wrote " << out_dir << "/timeseries.csv and summary.csv\n";
  return 0;
}

struct AblateArgs {
  std::string config;
  std::vector<std::string> sets;
  int runs = 3;
  int threads = 0;
};

int cmd_ablate(const AblateArgs& args) {
  KvTree kv = KvTree::parse_file(args.config);
  apply_sets(kv, args.sets);
  if (args.threads > 0) kv.set("train.threads", std::to_string(args.threads));
  const ExperimentConfig cfg = load_experiment_config(kv);
  const std::string out_dir = resolve_output_dir(cfg.output_dir) + "/" +
                              cfg.run_name + "_ablation";
  const auto runs = ablation_suite(cfg, args.runs, out_dir);
  for (const auto& run : runs)
    std::cout << run.variant << " r" << run.run_index << ": "
              << run.metrics_path << "\n";
  return 0;
}

struct GraphArgs {
  std::string family = "ba";
  int n = 50;
  std::uint64_t seed = 0;
  int m = 1;
  int k = 4;
  double p = 0.1;
  std::string out;
};

int cmd_graph(const GraphArgs& args) {
  GraphSpec spec;
  if (args.family == "ba") {
    spec.family = GraphFamily::BarabasiAlbert;
    spec.ba_m = args.m;
  } else if (args.family == "ws") {
    spec.family = GraphFamily::WattsStrogatz;
    spec.ws_k = args.k;
    spec.ws_p = args.p;
  } else {
    throw config_error("--family expects ba or ws");
  }
  spec.num_nodes = args.n;
  spec.seed = args.seed;
  const Graph g = generate(spec);
  if (args.out.empty()) {
    save_edge_list(g, std::cout);
  } else {
    std::ofstream out(args.out);
    if (!out) throw artifact_error("cannot write graph file: " + args.out);
    save_edge_list(g, out);
    std::cout << "wrote " << args.out << " (" << g.num_nodes << " nodes, "
              << g.num_edges() << " edges)\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"STACCA graph-transformer actor-critic for networked control"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "run a training experiment");
  train_cmd->add_option("--config", train_args.config, "experiment config file")
      ->required();
  train_cmd->add_option("--set", train_args.sets,
                        "override a config key: --set dotted.path=value");
  train_cmd->add_flag("--resume", train_args.resume,
                      "continue from ckpt_last.bin in the run directory");
  train_cmd->add_option("--threads", train_args.threads,
                        "worker cap; 1 guarantees bitwise determinism");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate checkpoints on scenarios");
  eval_cmd->add_option("scenarios", eval_args.scenario_paths, "scenario files")
      ->required();
  eval_cmd->add_option("--baselines", eval_args.baselines,
                       "scripted baselines: zero_control, full_control, random");
  eval_cmd->add_option("--out", eval_args.out_dir, "output directory");
  eval_cmd->add_option("--threads", eval_args.threads, "worker cap");

  AblateArgs ablate_args;
  auto* ablate_cmd = app.add_subcommand("ablate", "run the five-variant ablation grid");
  ablate_cmd->add_option("--config", ablate_args.config, "base experiment config")
      ->required();
  ablate_cmd->add_option("--set", ablate_args.sets, "config overrides");
  ablate_cmd->add_option("--runs", ablate_args.runs, "independent runs per variant");
  ablate_cmd->add_option("--threads", ablate_args.threads, "worker cap");

  GraphArgs graph_args;
  auto* graph_cmd = app.add_subcommand("graph", "generate a canonical edge list");
  graph_cmd->add_option("--family", graph_args.family, "ba or ws");
  graph_cmd->add_option("--n", graph_args.n, "node count");
  graph_cmd->add_option("--seed", graph_args.seed, "generation seed");
  graph_cmd->add_option("--m", graph_args.m, "BA attachment count");
  graph_cmd->add_option("--k", graph_args.k, "WS ring degree");
  graph_cmd->add_option("--p", graph_args.p, "WS rewire probability");
  graph_cmd->add_option("--out", graph_args.out, "output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train_args);
    if (eval_cmd->parsed()) return cmd_eval(eval_args);
    if (ablate_cmd->parsed()) return cmd_ablate(ablate_args);
    if (graph_cmd->parsed()) return cmd_graph(graph_args);
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const artifact_error& e) {
    std::cerr << "artifact error: " << e.what() << "\n";
    return 3;
  } catch (const numeric_error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
