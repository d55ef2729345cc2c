#include "stacca/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "stacca/checkpoint.hpp"
#include "stacca/errors.hpp"
#include "stacca/experiment.hpp"
#include "stacca/util.hpp"

namespace stacca {

std::string to_string(BaselineKind b) {
  switch (b) {
    case BaselineKind::ZeroControl: return "zero_control";
    case BaselineKind::FullControl: return "full_control";
    case BaselineKind::RandomPolicy: return "random";
  }
  return "zero_control";
}

BaselineKind baseline_from_string(const std::string& s) {
  if (s == "zero_control" || s == "zero") return BaselineKind::ZeroControl;
  if (s == "full_control" || s == "full") return BaselineKind::FullControl;
  if (s == "random") return BaselineKind::RandomPolicy;
  throw config_error("unknown baseline: " + s);
}

EvalScenario load_scenario(const KvTree& kv) {
  EvalScenario sc;
  sc.name = kv.get_str("name", "scenario");
  sc.checkpoint = kv.get_str("checkpoint", "");
  if (!sc.checkpoint.empty()) {
    // overrides apply on top of the training environment from the manifest
    const NamedTensors container = load_container(sc.checkpoint);
    const KvTree manifest = KvTree::parse_string(container.manifest);
    EnvConfig base = env_config_from_kv(manifest);
    KvTree merged;
    std::ostringstream base_text;
    write_env_config(base_text, base);
    merged = KvTree::parse_string(base_text.str());
    for (const auto& [key, value] : kv.items())
      if (key.rfind("env.", 0) == 0) merged.set(key, value);
    sc.env = env_config_from_kv(merged);
    merged.require_all_consumed();  // flags unknown env overrides by name
    // mark scenario env keys consumed on the original tree
    for (const auto& [key, value] : kv.items())
      if (key.rfind("env.", 0) == 0) kv.get_str(key);
  } else {
    sc.env = env_config_from_kv(kv);
  }
  sc.graph = graph_spec_from_kv(kv);
  sc.horizon = kv.get_int("horizon", sc.env.horizon);
  sc.episodes = kv.get_int("episodes", sc.episodes);
  sc.deterministic = kv.get_bool("deterministic", false);
  sc.seed = kv.get_u64("seed", 0);
  sc.threads = kv.get_int("threads", 1);
  sc.trace_path = kv.get_str("trace_path", "");
  if (kv.has("injection.time") || kv.has("injection.num_seeds")) {
    InjectionSpec inj;
    inj.time = kv.get_int("injection.time", 0);
    inj.num_seeds = kv.get_int("injection.num_seeds", 0);
    if (inj.time < 0 || inj.time >= sc.horizon)
      throw config_error("injection.time must lie in [0, horizon)");
    if (inj.num_seeds < 1) throw config_error("injection.num_seeds must be >= 1");
    sc.injection = inj;
  }
  if (kv.has("init_control")) {
    const double c0 = kv.get_double("init_control", 0.0);
    if (c0 < 0.0 || c0 > 1.0) throw config_error("init_control outside [0,1]");
    sc.init_control = c0;
  }
  if (sc.episodes < 1) throw config_error("episodes must be >= 1");
  if (sc.horizon < 1) throw config_error("horizon must be >= 1");
  kv.require_all_consumed();
  return sc;
}

namespace {

// action chooser: trained policy or scripted baseline
using ActFn = std::function<ActionDelta(const LocalObservation&, RngStream&)>;

struct EpisodeStats {
  std::vector<double> frac;     // per t = 0..horizon
  std::vector<double> control;  // per t
  double reward = 0.0;
  int erad_time = 0;
};

EpisodeStats run_eval_episode(const EvalScenario& sc, const Graph& graph,
                              const ObsBuilder& obs, const ActFn& act_fn,
                              std::uint64_t episode) {
  const int n = graph.num_nodes;
  RngStream reset_rng(sc.seed, Stream::Eval, episode, 0);
  RngStream noise_rng(sc.seed, Stream::Eval, episode, 1);
  RngStream act_rng(sc.seed, Stream::Eval, episode, 2);
  RngStream inject_rng(sc.seed, Stream::Eval, episode, 3);

  GlobalState state = reset(sc.env, graph, reset_rng);
  if (sc.init_control) {
    std::vector<NodeState> nodes = state.nodes();
    for (auto& node : nodes) node.c = *sc.init_control;
    state = GlobalState::from_nodes(std::move(nodes), 0);
  }

  std::ofstream trace;
  if (!sc.trace_path.empty()) {
    trace.open(sc.trace_path + "." + std::to_string(episode) + ".jsonl");
    if (!trace) throw artifact_error("cannot write trace: " + sc.trace_path);
  }

  EpisodeStats stats;
  stats.frac.reserve(static_cast<size_t>(sc.horizon) + 1);
  stats.control.reserve(static_cast<size_t>(sc.horizon) + 1);
  stats.erad_time = sc.horizon + 1;  // sentinel: never eradicated
  std::vector<double> rewards;
  rewards.reserve(static_cast<size_t>(sc.horizon));
  std::vector<ActionDelta> actions(static_cast<size_t>(n));

  for (int t = 0; t <= sc.horizon; ++t) {
    if (sc.injection && t == sc.injection->time) {
      std::vector<NodeState> nodes = state.nodes();
      std::vector<int> clear;
      for (int i = 0; i < n; ++i)
        if (nodes[static_cast<size_t>(i)].h == 0) clear.push_back(i);
      const int flips = std::min<int>(sc.injection->num_seeds,
                                      static_cast<int>(clear.size()));
      for (int f = 0; f < flips; ++f) {
        const int pick = f + inject_rng.next_int(static_cast<int>(clear.size()) - f);
        std::swap(clear[static_cast<size_t>(f)], clear[static_cast<size_t>(pick)]);
        nodes[static_cast<size_t>(clear[static_cast<size_t>(f)])].h = 1;
      }
      state = GlobalState::from_nodes(std::move(nodes), state.t());
    }
    stats.frac.push_back(state.flagged_fraction());
    stats.control.push_back(state.control_mean());
    if (state.flagged_count() == 0 && stats.erad_time > sc.horizon)
      stats.erad_time = t;
    if (t == sc.horizon) break;

    for (int i = 0; i < n; ++i)
      actions[static_cast<size_t>(i)] = act_fn(obs.observe(state, i), act_rng);
    const TransitionNoise noise = draw_noise(n, noise_rng);
    const StepResult result = step(sc.env, graph, state, actions, noise);
    rewards.push_back(result.reward);
    if (trace.is_open()) append_trace(trace, result.next, actions, result.reward);
    state = result.next;
  }
  stats.reward = pairwise_sum(rewards);
  return stats;
}

EvalMetrics aggregate(const EvalScenario& sc, const std::vector<EpisodeStats>& eps) {
  const int points = sc.horizon + 1;
  const auto e = static_cast<double>(eps.size());
  EvalMetrics m;
  m.episodes = static_cast<int>(eps.size());
  m.mean_frac.resize(static_cast<size_t>(points));
  m.std_frac.resize(static_cast<size_t>(points));
  m.mean_control.resize(static_cast<size_t>(points));
  std::vector<double> column(eps.size());
  for (int t = 0; t < points; ++t) {
    for (size_t i = 0; i < eps.size(); ++i) column[i] = eps[i].frac[static_cast<size_t>(t)];
    const double mean = pairwise_sum(column) / e;
    m.mean_frac[static_cast<size_t>(t)] = mean;
    double var = 0.0;
    for (double x : column) var += (x - mean) * (x - mean);
    m.std_frac[static_cast<size_t>(t)] = eps.size() > 1 ? std::sqrt(var / (e - 1)) : 0.0;
    for (size_t i = 0; i < eps.size(); ++i) column[i] = eps[i].control[static_cast<size_t>(t)];
    m.mean_control[static_cast<size_t>(t)] = pairwise_sum(column) / e;
  }
  for (size_t i = 0; i < eps.size(); ++i) column[i] = static_cast<double>(eps[i].erad_time);
  m.erad_time_mean = pairwise_sum(column) / e;
  m.final_frac = m.mean_frac.back();
  for (size_t i = 0; i < eps.size(); ++i) column[i] = eps[i].reward;
  m.reward_mean = pairwise_sum(column) / e;
  double var = 0.0;
  for (double x : column) var += (x - m.reward_mean) * (x - m.reward_mean);
  m.reward_stderr = eps.size() > 1 ? std::sqrt(var / (e - 1) / e) : 0.0;
  return m;
}

EvalMetrics evaluate_fn(const EvalScenario& sc, const ActFn& act_fn) {
  const Graph graph = generate(sc.graph);
  EnvConfig env = sc.env;
  env.horizon = sc.horizon;
  env.validate(graph.num_nodes);
  EvalScenario resolved = sc;
  resolved.env = env;
  const ObsBuilder obs(env, graph);
  std::vector<EpisodeStats> eps(static_cast<size_t>(sc.episodes));
  parallel_for(sc.episodes, sc.threads, [&](int e) {
    eps[static_cast<size_t>(e)] = run_eval_episode(
        resolved, graph, obs, act_fn, static_cast<std::uint64_t>(e));
  });
  return aggregate(resolved, eps);
}

}  // namespace

EvalMetrics evaluate_policy(const EvalScenario& scenario, PolicyModel& policy) {
  const bool deterministic = scenario.deterministic;
  return evaluate_fn(scenario, [&](const LocalObservation& o, RngStream& rng) {
    return deterministic ? act_deterministic(policy, o).action
                         : act(policy, o, rng).action;
  });
}

EvalMetrics evaluate_baseline(const EvalScenario& scenario, BaselineKind baseline) {
  switch (baseline) {
    case BaselineKind::ZeroControl:
      return evaluate_fn(scenario, [](const LocalObservation&, RngStream&) {
        return ActionDelta::Decrease;  // drives every control level to 0
      });
    case BaselineKind::FullControl:
      return evaluate_fn(scenario, [](const LocalObservation&, RngStream&) {
        return ActionDelta::Increase;
      });
    case BaselineKind::RandomPolicy:
      return evaluate_fn(scenario, [](const LocalObservation&, RngStream& rng) {
        return static_cast<ActionDelta>(rng.next_int(kNumActions));
      });
  }
  throw config_error("unknown baseline");
}

EvalMetrics evaluate(const EvalScenario& scenario) {
  if (scenario.checkpoint.empty())
    throw artifact_error("evaluate: scenario has no checkpoint");
  LoadedModels models = load_checkpoint(scenario.checkpoint);
  return evaluate_policy(scenario, models.policy);
}

std::vector<CompareRow> compare(const std::vector<EvalScenario>& scenarios,
                                const std::vector<BaselineKind>& baselines) {
  if (scenarios.empty()) throw config_error("compare: no scenarios");
  for (const auto& sc : scenarios)
    if (sc.env.kind != scenarios[0].env.kind)
      throw config_error("compare: scenarios mix environment kinds");
  std::vector<CompareRow> rows;
  for (const auto& sc : scenarios) {
    if (!sc.checkpoint.empty())
      rows.push_back({sc.name, "checkpoint", evaluate(sc)});
    for (const auto b : baselines)
      rows.push_back({sc.name, to_string(b), evaluate_baseline(sc, b)});
  }
  return rows;
}

namespace {

std::string csv_num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

}  // namespace

void write_timeseries_csv(std::ostream& out, const std::vector<CompareRow>& rows) {
  out << "scenario,t,mean_frac,std_frac,mean_control\n";
  for (const auto& row : rows) {
    const std::string tag = row.scenario + ":" + row.policy;
    for (size_t t = 0; t < row.metrics.mean_frac.size(); ++t)
      out << tag << "," << t << "," << csv_num(row.metrics.mean_frac[t]) << ","
          << csv_num(row.metrics.std_frac[t]) << ","
          << csv_num(row.metrics.mean_control[t]) << "\n";
  }
}

void write_summary_csv(std::ostream& out, const std::vector<CompareRow>& rows) {
  out << "scenario,policy,final_frac,erad_time,reward_mean,reward_stderr\n";
  for (const auto& row : rows)
    out << row.scenario << "," << row.policy << ","
        << csv_num(row.metrics.final_frac) << ","
        << csv_num(row.metrics.erad_time_mean) << ","
        << csv_num(row.metrics.reward_mean) << ","
        << csv_num(row.metrics.reward_stderr) << "\n";
}

const std::vector<std::pair<std::string, std::function<void(ExperimentConfig&)>>>
    kAblationVariants = {
        {"stacca", [](ExperimentConfig&) {}},
        {"mlp_actor",
         [](ExperimentConfig& c) { c.model.variant = ModelVariant::MlpActor; }},
        {"mlp_critic",
         [](ExperimentConfig& c) { c.model.variant = ModelVariant::MlpCritic; }},
        {"gat_only_critic",
         [](ExperimentConfig& c) { c.model.variant = ModelVariant::GatOnlyCritic; }},
        {"gae_shared",
         [](ExperimentConfig& c) {
           c.train.advantage_mode = AdvantageMode::GaeShared;
         }},
};

std::vector<AblationRun> ablation_suite(const ExperimentConfig& base, int runs,
                                        const std::string& out_dir) {
  if (runs < 1) throw config_error("ablation: runs must be >= 1");
  std::vector<AblationRun> out;
  for (int r = 0; r < runs; ++r) {
    for (const auto& [variant, apply] : kAblationVariants) {
      ExperimentConfig cfg = base;
      apply(cfg);
      cfg.train.seed = base.train.seed + static_cast<std::uint64_t>(r);  // shared across variants
      cfg.run_name = variant + "_r" + std::to_string(r);
      const std::string dir = out_dir + "/" + cfg.run_name;
      RunResult result = run_training(cfg, dir);
      AblationRun run;
      run.variant = variant;
      run.run_index = r;
      run.metrics = std::move(result.train.metrics);
      run.metrics_path = dir + "/metrics.csv";
      out.push_back(std::move(run));
    }
  }
  return out;
}

}  // namespace stacca
