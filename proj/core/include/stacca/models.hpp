#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "stacca/env.hpp"
#include "stacca/graph.hpp"
#include "stacca/nn.hpp"
#include "stacca/rng.hpp"
#include "stacca/tensor.hpp"

namespace stacca {

enum class ModelVariant { Stacca, GatOnlyCritic, MlpCritic, MlpActor };

std::string to_string(ModelVariant v);
ModelVariant model_variant_from_string(const std::string& s);

struct ModelConfig {
  int d_model = 64;
  int n_gat_layers = 2;
  int n_enc_layers = 2;
  int n_heads = 4;
  int d_ff = 128;
  int actor_hidden = 64;
  int critic_hidden = 64;
  ModelVariant variant = ModelVariant::Stacca;

  void validate() const;
};

// MLP-actor ablation input: ego features plus mean and max neighbor summaries,
// a size-invariant stand-in for the variable neighborhood.
constexpr int kMlpActorInput = 3 * kObsFeatures;

/// Shared decentralized actor. Stacca path: embed -> GAT stack -> encoder
/// stack over the observation subgraph -> ego-row selection -> policy head.
struct PolicyModel {
  ModelConfig cfg;
  MlpParams embed;
  std::vector<GatLayerParams> gat;
  std::vector<EncoderLayerParams> enc;
  MlpParams policy_head;  // ends in kNumActions logits

  bool graph_based() const { return cfg.variant != ModelVariant::MlpActor; }
  std::vector<std::pair<std::string, ad::Parameter*>> named_params();
  std::vector<ad::Parameter*> params();
};

/// Centralized critic. Stacca path: embed -> GAT stack -> encoder stack over
/// all nodes -> attention pooling -> scalar value head.
struct ValueModel {
  ModelConfig cfg;
  MlpParams embed;
  std::vector<GatLayerParams> gat;
  std::vector<EncoderLayerParams> enc;
  AttnPoolParams pool;
  MlpParams value_head;  // ends in one scalar

  std::vector<std::pair<std::string, ad::Parameter*>> named_params();
  std::vector<ad::Parameter*> params();
};

PolicyModel make_policy_model(const ModelConfig& cfg, RngStream& rng);
ValueModel make_value_model(const ModelConfig& cfg, RngStream& rng);

/// Batched actor forward on one subgraph: features is B x n x kObsFeatures
/// (flat, row-major). Returns B x kNumActions log-probabilities.
ad::Tensor actor_forward_batch(ad::Tape& tape, PolicyModel& model,
                               const Graph& subgraph, int ego_local,
                               const ad::Tensor& features);

/// MlpActor path on precomputed summaries (B x kMlpActorInput).
ad::Tensor mlp_actor_forward_batch(ad::Tape& tape, PolicyModel& model,
                                   const ad::Tensor& summaries);

/// Builds the ego/mean/max summary row for one observation.
std::array<double, kMlpActorInput> mlp_actor_summary(const LocalObservation& obs);

/// Single-observation log-probabilities (gradient-free).
std::array<double, kNumActions> actor_forward(PolicyModel& model,
                                              const LocalObservation& obs);

/// Batched critic forward: features is B x N x kCriticFeatures. Returns a
/// length-B tensor of values.
ad::Tensor critic_forward_batch(ad::Tape& tape, ValueModel& model,
                                const Graph& graph, const ad::Tensor& features);

/// Single-state value (gradient-free).
double critic_forward(ValueModel& model, const Graph& graph,
                      const std::vector<double>& features);

struct ActResult {
  ActionDelta action = ActionDelta::Maintain;
  double logp = 0.0;
};

/// CDF walk in action-index order over exp(logp); u in [0,1).
int sample_categorical(const std::array<double, kNumActions>& logp, double u);

/// Categorical sample from the policy; deterministic=false consumes one draw
/// from rng, deterministic=true takes the argmax with lowest-index tie-break.
ActResult act(PolicyModel& model, const LocalObservation& obs, RngStream& rng);
ActResult act_deterministic(PolicyModel& model, const LocalObservation& obs);

}  // namespace stacca
