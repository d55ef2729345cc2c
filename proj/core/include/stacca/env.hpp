#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <vector>

#include "stacca/graph.hpp"
#include "stacca/rng.hpp"

namespace stacca {

enum class EnvKind { Epidemic, Rumor };

// Index order is load-bearing: policy-head logits follow it.
enum class ActionDelta : int { Decrease = 0, Maintain = 1, Increase = 2 };
constexpr int kNumActions = 3;

inline double action_step(ActionDelta a, double delta_c) {
  switch (a) {
    case ActionDelta::Decrease: return -delta_c;
    case ActionDelta::Maintain: return 0.0;
    case ActionDelta::Increase: return delta_c;
  }
  return 0.0;
}

struct RewardConfig {
  double w_ctrl = 0.0;            // exponential control-penalty weight
  double a_ctrl = 0.0;            // exponential control-penalty rate
  double w_cat = 0.0;             // catastrophe-penalty weight (epidemic)
  double cat_threshold = 0.3;     // infected-fraction threshold (epidemic)
  double cat_steepness = 20.0;    // sigmoid steepness (epidemic)
  double w_lin = 0.0;             // linear penalty (epidemic) / reward (rumor)
  double eradication_bonus = 0.0; // per-timestep bonus (epidemic)
};

struct EnvConfig {
  EnvKind kind = EnvKind::Epidemic;
  double beta0 = 0.15;          // base transmission/spreading rate
  double eta = 0.9;             // control effectiveness (epidemic)
  double delta_recovery = 0.1;  // recovery probability (epidemic)
  double kappa = 3.0;           // saturation exponent (rumor)
  double delta_c = 0.1;         // action increment
  int num_seeds = 3;
  int horizon = 100;
  int obs_hops = 1;
  int n_train_ref = 50;  // degree-feature normalization constant
  RewardConfig reward;

  static EnvConfig epidemic_defaults();
  static EnvConfig rumor_defaults();
  void validate(int num_nodes) const;
};

struct NodeState {
  std::uint8_t h = 0;  // epidemic: 0 susceptible / 1 infected; rumor: unaware/aware
  double c = 0.0;      // control / boosting level in [0,1]
};

/// Factorized world state. Copying is O(1): the node array is shared and a
/// single-node overlay supports counterfactual branches that differ from a
/// base state only in one agent's control level. Running aggregates (flagged
/// count, control sum) make team_reward O(1).
class GlobalState {
 public:
  GlobalState() = default;
  static GlobalState from_nodes(std::vector<NodeState> nodes, int t);

  int size() const { return static_cast<int>(nodes_->size()); }
  int t() const { return t_; }
  NodeState node(int i) const {
    return i == override_idx_ ? override_node_ : (*nodes_)[static_cast<size_t>(i)];
  }
  int flagged_count() const { return flagged_; }
  double control_sum() const { return control_sum_; }
  double flagged_fraction() const { return static_cast<double>(flagged_) / size(); }
  double control_mean() const { return control_sum_ / size(); }

  /// O(1) view of this state with node i's control replaced.
  GlobalState with_control(int i, double c) const;
  /// Materializes the overlay into a plain node array.
  std::vector<NodeState> nodes() const;

 private:
  std::shared_ptr<const std::vector<NodeState>> nodes_;
  int t_ = 0;
  int override_idx_ = -1;
  NodeState override_node_;
  int flagged_ = 0;
  double control_sum_ = 0.0;
};

struct TransitionNoise {
  std::vector<double> u;  // one uniform draw per node
};

TransitionNoise draw_noise(int num_nodes, RngStream& rng);

/// num_seeds distinct uniformly-sampled nodes start flagged; all controls 0.
GlobalState reset(const EnvConfig& config, const Graph& graph, RngStream& rng);
GlobalState reset(const EnvConfig& config, const Graph& graph, std::uint64_t seed);

int infected_neighbor_count(const GlobalState& state, const Graph& graph, int i);

/// Probability that node i is unflagged at t+1 given the current state.
/// infected_neighbors is passed explicitly so limit cases are testable.
double transition_prob_stay_clear(const EnvConfig& config, const GlobalState& state,
                                  int i, int infected_neighbors);

double team_reward(const EnvConfig& config, const GlobalState& state);

struct StepResult {
  GlobalState next;
  double reward = 0.0;
};

/// One environment step: status transitions use the pre-action state, control
/// updates are deterministic, reward is evaluated on the post-transition state.
StepResult step(const EnvConfig& config, const Graph& graph, const GlobalState& state,
                const std::vector<ActionDelta>& joint_action,
                const TransitionNoise& noise);

/// Counterfactual branch via common random numbers: identical to
/// step(..., joint_action[i <- alt], noise). O(1) given the factual outcome.
StepResult branch_from(const EnvConfig& config, const GlobalState& state,
                       const std::vector<ActionDelta>& joint_action,
                       const StepResult& factual, int i, ActionDelta alt);

/// Spec-shaped convenience that recomputes the factual step internally.
StepResult counterfactual_branch(const EnvConfig& config, const Graph& graph,
                                 const GlobalState& state,
                                 const std::vector<ActionDelta>& joint_action,
                                 const TransitionNoise& noise, int i, ActionDelta alt);

constexpr int kObsFeatures = 5;     // [is_ego, h, c, deg_feat, dist_feat]
constexpr int kCriticFeatures = 3;  // [h, c, deg_feat]

struct LocalObservation {
  Subgraph subgraph;
  std::vector<double> features;  // row-major, n x kObsFeatures
  int ego_local = 0;
};

double degree_feature(int degree, int n_train_ref);

LocalObservation observe(const EnvConfig& config, const Graph& graph,
                         const GlobalState& state, int ego);

/// Row-major N x kCriticFeatures matrix for the centralized critic.
std::vector<double> critic_features(const EnvConfig& config, const Graph& graph,
                                    const GlobalState& state);

/// Caches per-ego subgraphs and the static feature columns; the hot path for
/// rollouts and evaluation.
class ObsBuilder {
 public:
  ObsBuilder(const EnvConfig& config, const Graph& graph);

  const Subgraph& subgraph(int ego) const { return subs_[static_cast<size_t>(ego)]; }
  int obs_size(int ego) const { return subs_[static_cast<size_t>(ego)].graph.num_nodes; }
  /// Writes n_i x kObsFeatures rows for agent ego into out.
  void fill_obs_features(const GlobalState& state, int ego, double* out) const;
  LocalObservation observe(const GlobalState& state, int ego) const;
  /// Writes N x kCriticFeatures rows into out.
  void fill_critic_features(const GlobalState& state, double* out) const;

 private:
  const Graph* graph_;
  std::vector<Subgraph> subs_;
  std::vector<std::vector<double>> static_obs_;  // per ego: [is_ego, deg_feat, dist_feat] triples
  std::vector<double> deg_feat_;                 // per node
};

/// One JSONL trace line: {"t":..,"h":"0101..","c":[..],"actions":[..],"reward":..}
void append_trace(std::ostream& out, const GlobalState& state,
                  const std::vector<ActionDelta>& actions, double reward);

}  // namespace stacca
