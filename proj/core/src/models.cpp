#include "stacca/models.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "stacca/errors.hpp"

namespace stacca {

using ad::Tape;
using ad::Tensor;

std::string to_string(ModelVariant v) {
  switch (v) {
    case ModelVariant::Stacca: return "stacca";
    case ModelVariant::GatOnlyCritic: return "gat_only_critic";
    case ModelVariant::MlpCritic: return "mlp_critic";
    case ModelVariant::MlpActor: return "mlp_actor";
  }
  return "stacca";
}

ModelVariant model_variant_from_string(const std::string& s) {
  if (s == "stacca") return ModelVariant::Stacca;
  if (s == "gat_only_critic") return ModelVariant::GatOnlyCritic;
  if (s == "mlp_critic") return ModelVariant::MlpCritic;
  if (s == "mlp_actor") return ModelVariant::MlpActor;
  throw config_error("unknown model variant: " + s);
}

void ModelConfig::validate() const {
  if (d_model < 1 || n_heads < 1 || d_ff < 1 || actor_hidden < 1 || critic_hidden < 1)
    throw config_error("model dimensions must be positive");
  if (d_model % n_heads != 0)
    throw config_error("model.d_model must be divisible by model.n_heads");
  if (n_gat_layers < 0 || n_enc_layers < 0)
    throw config_error("model layer counts must be >= 0");
}

namespace {

// embed -> GAT stack -> encoder stack, shared between actor and critic
struct TrunkSpec {
  std::string prefix;
  int in_features;
  bool with_encoder;
};

void make_trunk(const TrunkSpec& spec, const ModelConfig& cfg, RngStream& rng,
                MlpParams& embed, std::vector<GatLayerParams>& gat,
                std::vector<EncoderLayerParams>& enc) {
  embed = make_mlp(spec.prefix + "/embed",
                   {spec.in_features, cfg.d_model, cfg.d_model}, rng);
  for (int l = 0; l < cfg.n_gat_layers; ++l) {
    const bool last = l + 1 == cfg.n_gat_layers;
    // hidden layers concat heads at d_model/heads; the last averages full-width heads
    const int head_dim = last ? cfg.d_model : cfg.d_model / cfg.n_heads;
    gat.push_back(make_gat_layer(spec.prefix + "/gat" + std::to_string(l),
                                 cfg.d_model, head_dim, cfg.n_heads, last, rng));
  }
  if (spec.with_encoder)
    for (int l = 0; l < cfg.n_enc_layers; ++l)
      enc.push_back(make_encoder_layer(spec.prefix + "/enc" + std::to_string(l),
                                       cfg.d_model, cfg.n_heads, cfg.d_ff, rng));
}

Tensor trunk_forward(Tape& tape, MlpParams& embed,
                     std::vector<GatLayerParams>& gat,
                     std::vector<EncoderLayerParams>& enc, const Graph& graph,
                     const Tensor& features) {
  const int batches = features.dim(0), n = features.dim(1), in = features.dim(2);
  const int d_model = embed.weights.back().shape[1];
  Tensor h = tape.reshape(
      mlp_forward(tape, embed, tape.reshape(features, {batches * n, in})),
      {batches, n, d_model});
  if (!gat.empty()) {
    const Tensor mask = gat_mask(tape, graph);
    for (size_t l = 0; l < gat.size(); ++l)
      h = gat_forward(tape, gat[l], h, mask, l + 1 == gat.size());
  }
  for (auto& layer : enc) h = encoder_layer_forward(tape, layer, h);
  return h;  // B x n x d_model
}

}  // namespace

std::vector<std::pair<std::string, ad::Parameter*>> PolicyModel::named_params() {
  std::vector<ad::Parameter*> flat = params();
  std::vector<std::pair<std::string, ad::Parameter*>> out;
  out.reserve(flat.size());
  for (auto* p : flat) out.emplace_back(p->name, p);
  return out;
}

std::vector<ad::Parameter*> PolicyModel::params() {
  std::vector<ad::Parameter*> out;
  collect_params(embed, out);
  for (auto& g : gat) collect_params(g, out);
  for (auto& e : enc) collect_params(e, out);
  collect_params(policy_head, out);
  return out;
}

std::vector<std::pair<std::string, ad::Parameter*>> ValueModel::named_params() {
  std::vector<ad::Parameter*> flat = params();
  std::vector<std::pair<std::string, ad::Parameter*>> out;
  out.reserve(flat.size());
  for (auto* p : flat) out.emplace_back(p->name, p);
  return out;
}

std::vector<ad::Parameter*> ValueModel::params() {
  std::vector<ad::Parameter*> out;
  collect_params(embed, out);
  for (auto& g : gat) collect_params(g, out);
  for (auto& e : enc) collect_params(e, out);
  collect_params(pool, out);
  collect_params(value_head, out);
  return out;
}

PolicyModel make_policy_model(const ModelConfig& cfg, RngStream& rng) {
  cfg.validate();
  PolicyModel m;
  m.cfg = cfg;
  if (cfg.variant == ModelVariant::MlpActor) {
    m.policy_head = make_mlp("actor/policy_head",
                             {kMlpActorInput, cfg.actor_hidden, cfg.actor_hidden,
                              kNumActions},
                             rng);
    return m;
  }
  make_trunk({"actor", kObsFeatures, true}, cfg, rng, m.embed, m.gat, m.enc);
  m.policy_head = make_mlp("actor/policy_head",
                           {cfg.d_model, cfg.actor_hidden, kNumActions}, rng);
  return m;
}

ValueModel make_value_model(const ModelConfig& cfg, RngStream& rng) {
  cfg.validate();
  ValueModel m;
  m.cfg = cfg;
  if (cfg.variant == ModelVariant::MlpCritic) {
    // embedded features are mean-pooled; no graph structure enters anywhere
    m.embed = make_mlp("critic/embed", {kCriticFeatures, cfg.d_model, cfg.d_model}, rng);
    m.value_head = make_mlp("critic/value_head",
                            {cfg.d_model, cfg.critic_hidden, 1}, rng);
    return m;
  }
  const bool with_encoder = cfg.variant != ModelVariant::GatOnlyCritic;
  make_trunk({"critic", kCriticFeatures, with_encoder}, cfg, rng, m.embed, m.gat,
             m.enc);
  m.pool = make_attn_pool("critic/pool", cfg.d_model, cfg.critic_hidden, rng);
  m.value_head = make_mlp("critic/value_head",
                          {cfg.d_model, cfg.critic_hidden, 1}, rng);
  return m;
}

Tensor actor_forward_batch(Tape& tape, PolicyModel& model, const Graph& subgraph,
                           int ego_local, const Tensor& features) {
  if (!model.graph_based())
    throw std::invalid_argument("actor_forward_batch: model is the MLP variant");
  const int batches = features.dim(0), n = features.dim(1);
  const Tensor h =
      trunk_forward(tape, model.embed, model.gat, model.enc, subgraph, features);
  // pick the ego row of every batch entry
  std::vector<int> ego_rows(static_cast<size_t>(batches));
  for (int b = 0; b < batches; ++b) ego_rows[static_cast<size_t>(b)] = b * n + ego_local;
  const Tensor ego = tape.gather_rows(
      tape.reshape(h, {batches * n, model.cfg.d_model}), std::move(ego_rows));
  return tape.log_softmax_rows(mlp_forward(tape, model.policy_head, ego));
}

Tensor mlp_actor_forward_batch(Tape& tape, PolicyModel& model,
                               const Tensor& summaries) {
  if (model.graph_based())
    throw std::invalid_argument("mlp_actor_forward_batch: model is graph-based");
  return tape.log_softmax_rows(mlp_forward(tape, model.policy_head, summaries));
}

std::array<double, kMlpActorInput> mlp_actor_summary(const LocalObservation& obs) {
  std::array<double, kMlpActorInput> out{};
  const int n = obs.subgraph.graph.num_nodes;
  const double* ego_row = obs.features.data() + obs.ego_local * kObsFeatures;
  std::copy_n(ego_row, kObsFeatures, out.begin());
  int neighbors = 0;
  for (int local = 0; local < n; ++local) {
    if (local == obs.ego_local) continue;
    ++neighbors;
    const double* row = obs.features.data() + local * kObsFeatures;
    for (int f = 0; f < kObsFeatures; ++f) {
      out[static_cast<size_t>(kObsFeatures + f)] += row[f];
      double& mx = out[static_cast<size_t>(2 * kObsFeatures + f)];
      mx = neighbors == 1 ? row[f] : std::max(mx, row[f]);
    }
  }
  if (neighbors > 0)
    for (int f = 0; f < kObsFeatures; ++f)
      out[static_cast<size_t>(kObsFeatures + f)] /= neighbors;
  return out;  // isolated ego: mean and max stay zero
}

std::array<double, kNumActions> actor_forward(PolicyModel& model,
                                              const LocalObservation& obs) {
  Tape tape(/*recording=*/false);
  Tensor logp;
  if (model.graph_based()) {
    const int n = obs.subgraph.graph.num_nodes;
    const Tensor feats = tape.constant({1, n, kObsFeatures}, obs.features);
    logp = actor_forward_batch(tape, model, obs.subgraph.graph, obs.ego_local, feats);
  } else {
    const auto summary = mlp_actor_summary(obs);
    const Tensor feats =
        tape.constant({1, kMlpActorInput}, {summary.begin(), summary.end()});
    logp = mlp_actor_forward_batch(tape, model, feats);
  }
  std::array<double, kNumActions> out{};
  std::copy_n(logp.data().data(), kNumActions, out.begin());
  return out;
}

Tensor critic_forward_batch(Tape& tape, ValueModel& model, const Graph& graph,
                            const Tensor& features) {
  const int batches = features.dim(0), n = features.dim(1), in = features.dim(2);
  if (model.cfg.variant == ModelVariant::MlpCritic) {
    const Tensor embedded = tape.reshape(
        mlp_forward(tape, model.embed, tape.reshape(features, {batches * n, in})),
        {batches, n, model.cfg.d_model});
    const Tensor pooled = tape.reshape(
        tape.bmm(tape.full({batches, 1, n}, 1.0 / n), embedded),
        {batches, model.cfg.d_model});
    return tape.reshape(mlp_forward(tape, model.value_head, pooled), {batches});
  }
  const Tensor h =
      trunk_forward(tape, model.embed, model.gat, model.enc, graph, features);
  const Tensor pooled = attn_pool(tape, model.pool, h);
  return tape.reshape(mlp_forward(tape, model.value_head, pooled), {batches});
}

double critic_forward(ValueModel& model, const Graph& graph,
                      const std::vector<double>& features) {
  if (static_cast<int>(features.size()) != graph.num_nodes * kCriticFeatures)
    throw std::invalid_argument("critic_forward: feature matrix shape mismatch");
  Tape tape(/*recording=*/false);
  const Tensor feats = tape.constant({1, graph.num_nodes, kCriticFeatures}, features);
  return critic_forward_batch(tape, model, graph, feats).data()[0];
}

int sample_categorical(const std::array<double, kNumActions>& logp, double u) {
  double cdf = 0.0;
  for (int a = 0; a < kNumActions; ++a) {
    cdf += std::exp(logp[static_cast<size_t>(a)]);
    if (u < cdf) return a;
  }
  return kNumActions - 1;
}

ActResult act(PolicyModel& model, const LocalObservation& obs, RngStream& rng) {
  const auto logp = actor_forward(model, obs);
  const int chosen = sample_categorical(logp, rng.next_double());
  return {static_cast<ActionDelta>(chosen), logp[static_cast<size_t>(chosen)]};
}

ActResult act_deterministic(PolicyModel& model, const LocalObservation& obs) {
  const auto logp = actor_forward(model, obs);
  int best = 0;
  for (int a = 1; a < kNumActions; ++a)
    if (logp[static_cast<size_t>(a)] > logp[static_cast<size_t>(best)]) best = a;
  return {static_cast<ActionDelta>(best), logp[static_cast<size_t>(best)]};
}

}  // namespace stacca
