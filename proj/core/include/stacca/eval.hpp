#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "stacca/config.hpp"
#include "stacca/models.hpp"
#include "stacca/train.hpp"

namespace stacca {

enum class BaselineKind { ZeroControl, FullControl, RandomPolicy };

std::string to_string(BaselineKind b);
BaselineKind baseline_from_string(const std::string& s);

struct InjectionSpec {
  int time = 0;       // timestep at which extra seeds flip
  int num_seeds = 0;  // susceptible nodes flipped to flagged
};

struct EvalScenario {
  std::string name = "scenario";
  GraphSpec graph;
  EnvConfig env;  // resolved: checkpoint manifest base + overrides
  int episodes = 100;
  int horizon = 100;
  std::string checkpoint;  // empty: baselines only
  bool deterministic = false;
  std::optional<InjectionSpec> injection;
  std::optional<double> init_control;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string trace_path;  // optional JSONL episode trace dump
};

/// Scenario file loader. env overrides are applied on top of the checkpoint's
/// training environment (or kind defaults when no checkpoint is given).
EvalScenario load_scenario(const KvTree& kv);

struct EvalMetrics {
  std::vector<double> mean_frac;     // flagged fraction per t = 0..horizon
  std::vector<double> std_frac;      // across-episode sample std
  std::vector<double> mean_control;  // mean control level per t
  double erad_time_mean = 0.0;       // first t with zero flagged; horizon+1 if never
  double final_frac = 0.0;
  double reward_mean = 0.0;
  double reward_stderr = 0.0;
  int episodes = 0;
};

/// One frozen-policy evaluation: pure function of (scenario, checkpoint, seed).
EvalMetrics evaluate(const EvalScenario& scenario);
EvalMetrics evaluate_policy(const EvalScenario& scenario, PolicyModel& policy);
EvalMetrics evaluate_baseline(const EvalScenario& scenario, BaselineKind baseline);

struct CompareRow {
  std::string scenario;
  std::string policy;  // "checkpoint" or a baseline name
  EvalMetrics metrics;
};

/// Each scenario's checkpoint policy plus every requested baseline, on that
/// scenario's environment. All scenarios must share one env kind.
std::vector<CompareRow> compare(const std::vector<EvalScenario>& scenarios,
                                const std::vector<BaselineKind>& baselines);

void write_timeseries_csv(std::ostream& out, const std::vector<CompareRow>& rows);
void write_summary_csv(std::ostream& out, const std::vector<CompareRow>& rows);

struct AblationRun {
  std::string variant;
  int run_index = 0;
  std::vector<IterMetrics> metrics;
  std::string metrics_path;
};

/// The five Fig.-4 training configurations (full model, MLP actor, MLP critic,
/// GAT-only critic, shared-GAE advantage) over `runs` seeds each, with seeds
/// shared across variants. Writes one run directory per (variant, run).
std::vector<AblationRun> ablation_suite(const ExperimentConfig& base, int runs,
                                        const std::string& out_dir);

extern const std::vector<std::pair<std::string, std::function<void(ExperimentConfig&)>>>
    kAblationVariants;

}  // namespace stacca
