#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "stacca/env.hpp"
#include "stacca/graph.hpp"
#include "stacca/models.hpp"

namespace stacca {

enum class AdvantageMode { Counterfactual, GaeShared };
enum class ValueLossKind { Huber, Mse };

std::string to_string(AdvantageMode m);
AdvantageMode advantage_mode_from_string(const std::string& s);
std::string to_string(ValueLossKind k);
ValueLossKind value_loss_from_string(const std::string& s);

struct TrainConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_eps = 0.2;
  double lr_actor = 3e-4;
  double lr_critic = 1e-3;
  int k_pi = 4;
  int k_v = 4;
  int episodes_per_iter = 8;
  int horizon = 100;  // training episode length
  int iters = 200;
  AdvantageMode advantage_mode = AdvantageMode::Counterfactual;
  ValueLossKind value_loss = ValueLossKind::Huber;
  double huber_delta = 1.0;
  double entropy_coef = 0.01;
  double norm_eps = 1e-8;
  std::uint64_t seed = 0;
  int minibatch_size = 0;  // 0: full batch
  int checkpoint_every = 50;
  int threads = 1;

  void validate() const;
};

/// Everything recorded at one factual timestep plus its N x |A| one-step
/// counterfactual branches (common random numbers: branch states share the
/// factual status transition and differ only in one control level).
struct StepRecord {
  GlobalState state;       // s_t
  GlobalState next_state;  // s_{t+1}
  std::vector<ActionDelta> actions;
  std::vector<double> logp_old;                        // chosen-action log-probs
  std::vector<std::array<double, kNumActions>> probs_old;  // behavior policy
  TransitionNoise noise;
  double reward = 0.0;
  double value = 0.0;       // V(s_t)
  double next_value = 0.0;  // V(s_{t+1})
  std::vector<std::array<double, kNumActions>> cf_reward;   // [agent][action]
  std::vector<std::array<double, kNumActions>> cf_value;    // V(s'_{t+1}(a'))
  std::vector<std::array<double, kNumActions>> cf_control;  // branch c_i values
};

struct EpisodeRecord {
  std::vector<StepRecord> steps;
  double terminal_value = 0.0;  // V(s_H) bootstrap
  double undiscounted_return() const;
};

struct RolloutBatch {
  std::vector<EpisodeRecord> episodes;
  // filled by gae_returns:
  std::vector<std::vector<double>> returns;     // [episode][t]
  std::vector<std::vector<double>> shared_adv;  // [episode][t], unnormalized
  // filled by counterfactual_advantages / normalize_shared:
  std::vector<std::vector<std::vector<double>>> cf_adv;  // [episode][t][agent]
  std::vector<std::vector<double>> shared_adv_norm;      // [episode][t]

  int horizon() const;
  int num_agents() const;
};

/// Algorithm: run episodes with the behavior policy, materialize every
/// one-step counterfactual branch with the same transition noise, and batch
/// all critic evaluations (factual, terminal, and branch states). Episode RNG
/// streams are derived from (seed, stream, global episode index), so results
/// are independent of worker scheduling.
RolloutBatch collect_rollouts(const EnvConfig& env, const Graph& graph,
                              PolicyModel& policy, ValueModel& critic,
                              const TrainConfig& cfg, std::uint64_t iter_index);

/// GAE over fixed-horizon episodes, bootstrapping through the truncation
/// boundary (no termination masking). Fills batch.returns and batch.shared_adv.
void gae_returns(RolloutBatch& batch, double gamma, double gae_lambda);

/// Per-agent counterfactual advantages: one-step return of the taken action
/// minus the policy-weighted average over all actions, then standardized
/// across agents at each timestep (population std + norm_eps).
void counterfactual_advantages(RolloutBatch& batch, double gamma, double norm_eps);

/// GaeShared ablation: standardizes shared_adv over the whole batch.
void normalize_shared(RolloutBatch& batch, double norm_eps);

/// Standardize one advantage row in place: (x - mean) / (pop_std + eps).
void standardize_row(std::vector<double>& row, double eps);

struct IterMetrics {
  int iter = 0;
  double mean_episode_reward = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double wall_ms = 0.0;  // reported separately from the deterministic columns
};

/// metrics.csv column set (wall time goes to timings.csv so reruns are
/// byte-identical).
std::string metrics_csv_header();
std::string metrics_csv_row(const IterMetrics& m);
std::string metrics_json_row(const IterMetrics& m);

struct TrainResult {
  std::vector<IterMetrics> metrics;
  double best_reward = 0.0;
  int best_iter = -1;
};

struct TrainHooks {
  // called after each iteration; return false to stop early
  std::function<bool(const IterMetrics&)> on_iteration;
  // called with the offending batch before a numeric_error propagates
  std::function<void(const RolloutBatch&, int iter)> on_numeric_error;
};

class Trainer {
 public:
  Trainer(const EnvConfig& env, const Graph& graph, const ModelConfig& model_cfg,
          TrainConfig cfg);

  PolicyModel& policy() { return policy_; }
  ValueModel& critic() { return critic_; }
  const TrainConfig& config() const { return cfg_; }

  /// Full Algorithm-1 loop: collect, value, GAE returns, advantages, K_pi
  /// actor epochs, K_V critic epochs. Starts at iteration `start_iter`
  /// (nonzero when resuming).
  TrainResult run(int start_iter = 0, const TrainHooks& hooks = {});

  /// One iteration's losses on a prepared batch; exposed for tests.
  struct EpochStats {
    double actor_loss = 0.0;
    double entropy = 0.0;
    double clip_fraction = 0.0;
    double critic_loss = 0.0;
  };
  EpochStats update(RolloutBatch& batch);

  long adam_t_actor = 0;
  long adam_t_critic = 0;

 private:
  EnvConfig env_;
  const Graph* graph_;
  TrainConfig cfg_;
  PolicyModel policy_;
  ValueModel critic_;
  ObsBuilder obs_;
};

/// Actor surrogate loss for a prepared batch under the current policy
/// parameters; returns (loss value, entropy, clip fraction) without updating.
Trainer::EpochStats actor_loss_eval(PolicyModel& policy, const ObsBuilder& obs,
                                    const RolloutBatch& batch,
                                    const TrainConfig& cfg);

/// Critic loss for a prepared batch under current parameters.
double critic_loss_eval(ValueModel& critic, const Graph& graph,
                        const EnvConfig& env, const RolloutBatch& batch,
                        const TrainConfig& cfg);

}  // namespace stacca
