#include "stacca/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "stacca/errors.hpp"
#include "stacca/util.hpp"

namespace stacca {

using ad::Tape;
using ad::Tensor;

namespace {

std::string fmt_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

struct AgentData {
  const Graph* subgraph = nullptr;  // null for the MLP-actor variant
  int ego_local = 0;
  int n = 0;                   // subgraph node count (graph path)
  std::vector<double> inputs;  // B x n x 5, or B x kMlpActorInput summaries
  std::vector<double> onehot;  // B x kNumActions
  std::vector<double> logp_old;
  std::vector<double> adv;
};

struct ActorData {
  std::vector<AgentData> agents;
  int batch = 0;  // samples per agent
  bool graph_based = true;
};

struct CriticData {
  std::vector<double> features;  // B x N x kCriticFeatures
  std::vector<double> returns;   // B
  int batch = 0;
};

ActorData build_actor_data(PolicyModel& policy, const ObsBuilder& obs,
                           const RolloutBatch& batch, const TrainConfig& cfg) {
  const int num_agents = batch.num_agents();
  const int horizon = batch.horizon();
  const int b_total = static_cast<int>(batch.episodes.size()) * horizon;
  const bool use_cf = cfg.advantage_mode == AdvantageMode::Counterfactual;
  if (use_cf && batch.cf_adv.empty())
    throw std::invalid_argument("actor update: counterfactual advantages missing");
  if (!use_cf && batch.shared_adv_norm.empty())
    throw std::invalid_argument("actor update: normalized shared advantages missing");

  ActorData data;
  data.batch = b_total;
  data.graph_based = policy.graph_based();
  data.agents.resize(static_cast<size_t>(num_agents));
  for (int i = 0; i < num_agents; ++i) {
    AgentData& agent = data.agents[static_cast<size_t>(i)];
    agent.ego_local = obs.subgraph(i).ego_local;
    agent.subgraph = &obs.subgraph(i).graph;
    agent.n = obs.obs_size(i);
    const int in_width = data.graph_based ? agent.n * kObsFeatures : kMlpActorInput;
    agent.inputs.resize(static_cast<size_t>(b_total) * in_width);
    agent.onehot.assign(static_cast<size_t>(b_total) * kNumActions, 0.0);
    agent.logp_old.resize(static_cast<size_t>(b_total));
    agent.adv.resize(static_cast<size_t>(b_total));
    int b = 0;
    for (size_t e = 0; e < batch.episodes.size(); ++e) {
      for (int t = 0; t < horizon; ++t, ++b) {
        const StepRecord& rec = batch.episodes[e].steps[static_cast<size_t>(t)];
        double* row = agent.inputs.data() + static_cast<std::ptrdiff_t>(b) * in_width;
        if (data.graph_based) {
          obs.fill_obs_features(rec.state, i, row);
        } else {
          const auto summary = mlp_actor_summary(obs.observe(rec.state, i));
          std::copy(summary.begin(), summary.end(), row);
        }
        agent.onehot[static_cast<size_t>(b) * kNumActions +
                     static_cast<size_t>(rec.actions[static_cast<size_t>(i)])] = 1.0;
        agent.logp_old[static_cast<size_t>(b)] = rec.logp_old[static_cast<size_t>(i)];
        agent.adv[static_cast<size_t>(b)] =
            use_cf ? batch.cf_adv[e][static_cast<size_t>(t)][static_cast<size_t>(i)]
                   : batch.shared_adv_norm[e][static_cast<size_t>(t)];
      }
    }
  }
  return data;
}

CriticData build_critic_data(const ObsBuilder& obs, const Graph& graph,
                             const RolloutBatch& batch) {
  if (batch.returns.empty())
    throw std::invalid_argument("critic update: returns missing");
  const int horizon = batch.horizon();
  const int b_total = static_cast<int>(batch.episodes.size()) * horizon;
  const int row = graph.num_nodes * kCriticFeatures;
  CriticData data;
  data.batch = b_total;
  data.features.resize(static_cast<size_t>(b_total) * row);
  data.returns.resize(static_cast<size_t>(b_total));
  int b = 0;
  for (size_t e = 0; e < batch.episodes.size(); ++e) {
    for (int t = 0; t < horizon; ++t, ++b) {
      obs.fill_critic_features(batch.episodes[e].steps[static_cast<size_t>(t)].state,
                               data.features.data() + static_cast<std::ptrdiff_t>(b) * row);
      data.returns[static_cast<size_t>(b)] = batch.returns[e][static_cast<size_t>(t)];
    }
  }
  return data;
}

// gathers rows `subset` (empty = identity) of a B x width flat array
std::vector<double> take_rows(const std::vector<double>& flat, int width,
                              const std::vector<int>& subset) {
  if (subset.empty()) return flat;
  std::vector<double> out(subset.size() * static_cast<size_t>(width));
  for (size_t r = 0; r < subset.size(); ++r)
    std::copy_n(flat.data() + static_cast<std::ptrdiff_t>(subset[r]) * width, width,
                out.data() + static_cast<std::ptrdiff_t>(r) * width);
  return out;
}

struct ActorGraphOut {
  Tensor loss;
  double loss_value = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
};

ActorGraphOut actor_graph(Tape& tape, PolicyModel& policy, const ActorData& data,
                          const std::vector<int>& subset, double clip_eps,
                          double entropy_coef) {
  const int b = subset.empty() ? data.batch : static_cast<int>(subset.size());
  Tensor loss_acc;
  double ent_sum = 0.0;
  long clipped = 0;
  for (const AgentData& agent : data.agents) {
    Tensor logp;
    if (data.graph_based) {
      const Tensor feats = tape.constant(
          {b, agent.n, kObsFeatures},
          take_rows(agent.inputs, agent.n * kObsFeatures, subset));
      logp = actor_forward_batch(tape, policy, *agent.subgraph, agent.ego_local, feats);
    } else {
      const Tensor feats = tape.constant(
          {b, kMlpActorInput}, take_rows(agent.inputs, kMlpActorInput, subset));
      logp = mlp_actor_forward_batch(tape, policy, feats);
    }
    const Tensor onehot =
        tape.constant({b, kNumActions}, take_rows(agent.onehot, kNumActions, subset));
    const Tensor chosen = tape.sum_axis(tape.mul(logp, onehot), 1);
    const Tensor logp_old = tape.constant({b}, take_rows(agent.logp_old, 1, subset));
    const Tensor ratio = tape.exp(tape.sub(chosen, logp_old));
    const Tensor adv = tape.constant({b}, take_rows(agent.adv, 1, subset));
    const Tensor surrogate =
        tape.minimum(tape.mul(ratio, adv),
                     tape.mul(tape.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps), adv));
    const Tensor entropy =
        tape.scale(tape.sum_axis(tape.mul(tape.exp(logp), logp), 1), -1.0);
    Tensor contrib = tape.sum_all(surrogate);
    if (entropy_coef != 0.0)
      contrib = tape.add(contrib, tape.scale(tape.sum_all(entropy), entropy_coef));
    loss_acc = loss_acc.defined() ? tape.add(loss_acc, contrib) : contrib;

    ent_sum += pairwise_sum(entropy.data());
    for (double r : ratio.data())
      if (std::abs(r - 1.0) > clip_eps) ++clipped;
  }
  const double total = static_cast<double>(data.agents.size()) * b;
  ActorGraphOut out;
  out.loss = tape.scale(loss_acc, -1.0 / total);
  out.loss_value = out.loss.scalar();
  out.entropy = ent_sum / total;
  out.clip_fraction = static_cast<double>(clipped) / total;
  return out;
}

Tensor critic_graph(Tape& tape, ValueModel& critic, const Graph& graph,
                    const CriticData& data, const std::vector<int>& subset,
                    const TrainConfig& cfg) {
  const int b = subset.empty() ? data.batch : static_cast<int>(subset.size());
  const int row = graph.num_nodes * kCriticFeatures;
  const Tensor feats = tape.constant({b, graph.num_nodes, kCriticFeatures},
                                     take_rows(data.features, row, subset));
  const Tensor values = critic_forward_batch(tape, critic, graph, feats);
  const Tensor target = tape.constant({b}, take_rows(data.returns, 1, subset));
  const Tensor residual = tape.sub(values, target);
  if (cfg.value_loss == ValueLossKind::Huber)
    return tape.mean_all(tape.huber(residual, cfg.huber_delta));
  return tape.mean_all(tape.mul(residual, residual));
}

void zero_grads(const std::vector<ad::Parameter*>& params) {
  for (auto* p : params) p->zero_grad();
}

void apply_adam(const std::vector<ad::Parameter*>& params, double lr, long t) {
  ad::AdamConfig cfg;
  cfg.lr = lr;
  for (auto* p : params) ad::adam_step(*p, cfg, t);
}

std::vector<std::vector<int>> minibatch_plan(int total, int size, RngStream& rng) {
  std::vector<int> order(static_cast<size_t>(total));
  for (int i = 0; i < total; ++i) order[static_cast<size_t>(i)] = i;
  for (int i = total - 1; i > 0; --i)
    std::swap(order[static_cast<size_t>(i)],
              order[static_cast<size_t>(rng.next_int(i + 1))]);
  std::vector<std::vector<int>> plan;
  for (int start = 0; start < total; start += size)
    plan.emplace_back(order.begin() + start,
                      order.begin() + std::min(start + size, total));
  return plan;
}

}  // namespace

std::string metrics_csv_header() {
  return "iter,mean_episode_reward,actor_loss,critic_loss,entropy,clip_fraction";
}

std::string metrics_csv_row(const IterMetrics& m) {
  return std::to_string(m.iter) + "," + fmt_double(m.mean_episode_reward) + "," +
         fmt_double(m.actor_loss) + "," + fmt_double(m.critic_loss) + "," +
         fmt_double(m.entropy) + "," + fmt_double(m.clip_fraction);
}

std::string metrics_json_row(const IterMetrics& m) {
  nlohmann::json j{{"iter", m.iter},
                   {"mean_episode_reward", m.mean_episode_reward},
                   {"actor_loss", m.actor_loss},
                   {"critic_loss", m.critic_loss},
                   {"entropy", m.entropy},
                   {"clip_fraction", m.clip_fraction}};
  return j.dump();
}

Trainer::Trainer(const EnvConfig& env, const Graph& graph,
                 const ModelConfig& model_cfg, TrainConfig cfg)
    : env_(env), graph_(&graph), cfg_(std::move(cfg)), obs_(env, graph) {
  cfg_.validate();
  env_.validate(graph.num_nodes);
  RngStream init_rng(cfg_.seed, Stream::ParamInit);
  policy_ = make_policy_model(model_cfg, init_rng);
  critic_ = make_value_model(model_cfg, init_rng);
}

Trainer::EpochStats Trainer::update(RolloutBatch& batch) {
  const ActorData actor_data = build_actor_data(policy_, obs_, batch, cfg_);
  const CriticData critic_data = build_critic_data(obs_, *graph_, batch);
  const auto actor_params = policy_.params();
  const auto critic_params = critic_.params();
  EpochStats stats;

  RngStream shuffle_rng(cfg_.seed, Stream::Shuffle, static_cast<std::uint64_t>(adam_t_actor));
  for (int epoch = 0; epoch < cfg_.k_pi; ++epoch) {
    std::vector<std::vector<int>> plan{{}};
    if (cfg_.minibatch_size > 0 && cfg_.minibatch_size < actor_data.batch)
      plan = minibatch_plan(actor_data.batch, cfg_.minibatch_size, shuffle_rng);
    for (const auto& subset : plan) {
      Tape tape;
      const ActorGraphOut out =
          actor_graph(tape, policy_, actor_data, subset, cfg_.clip_eps, cfg_.entropy_coef);
      if (epoch == cfg_.k_pi - 1) {
        stats.actor_loss = out.loss_value;
        stats.entropy = out.entropy;
        stats.clip_fraction = out.clip_fraction;
      }
      zero_grads(actor_params);
      tape.backward(out.loss);
      apply_adam(actor_params, cfg_.lr_actor, ++adam_t_actor);
    }
  }

  for (int epoch = 0; epoch < cfg_.k_v; ++epoch) {
    std::vector<std::vector<int>> plan{{}};
    if (cfg_.minibatch_size > 0 && cfg_.minibatch_size < critic_data.batch)
      plan = minibatch_plan(critic_data.batch, cfg_.minibatch_size, shuffle_rng);
    for (const auto& subset : plan) {
      Tape tape;
      const Tensor loss = critic_graph(tape, critic_, *graph_, critic_data, subset, cfg_);
      if (epoch == cfg_.k_v - 1) stats.critic_loss = loss.scalar();
      zero_grads(critic_params);
      tape.backward(loss);
      apply_adam(critic_params, cfg_.lr_critic, ++adam_t_critic);
    }
  }
  return stats;
}

TrainResult Trainer::run(int start_iter, const TrainHooks& hooks) {
  TrainResult result;
  for (int iter = start_iter; iter < cfg_.iters; ++iter) {
    const auto t0 = std::chrono::steady_clock::now();
    RolloutBatch batch = collect_rollouts(env_, *graph_, policy_, critic_, cfg_,
                                          static_cast<std::uint64_t>(iter));
    IterMetrics metrics;
    metrics.iter = iter;
    try {
      gae_returns(batch, cfg_.gamma, cfg_.gae_lambda);
      if (cfg_.advantage_mode == AdvantageMode::Counterfactual)
        counterfactual_advantages(batch, cfg_.gamma, cfg_.norm_eps);
      else
        normalize_shared(batch, cfg_.norm_eps);
      const EpochStats stats = update(batch);
      metrics.actor_loss = stats.actor_loss;
      metrics.critic_loss = stats.critic_loss;
      metrics.entropy = stats.entropy;
      metrics.clip_fraction = stats.clip_fraction;
    } catch (const numeric_error&) {
      if (hooks.on_numeric_error) hooks.on_numeric_error(batch, iter);
      throw;
    }
    std::vector<double> returns(batch.episodes.size());
    for (size_t e = 0; e < batch.episodes.size(); ++e)
      returns[e] = batch.episodes[e].undiscounted_return();
    metrics.mean_episode_reward = pairwise_sum(returns) / returns.size();
    metrics.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
    result.metrics.push_back(metrics);
    if (result.best_iter < 0 || metrics.mean_episode_reward > result.best_reward) {
      result.best_reward = metrics.mean_episode_reward;
      result.best_iter = iter;
    }
    if (hooks.on_iteration && !hooks.on_iteration(metrics)) break;
  }
  return result;
}

Trainer::EpochStats actor_loss_eval(PolicyModel& policy, const ObsBuilder& obs,
                                    const RolloutBatch& batch,
                                    const TrainConfig& cfg) {
  const ActorData data = build_actor_data(policy, obs, batch, cfg);
  Tape tape;
  const ActorGraphOut out =
      actor_graph(tape, policy, data, {}, cfg.clip_eps, cfg.entropy_coef);
  Trainer::EpochStats stats;
  stats.actor_loss = out.loss_value;
  stats.entropy = out.entropy;
  stats.clip_fraction = out.clip_fraction;
  return stats;
}

double critic_loss_eval(ValueModel& critic, const Graph& graph, const EnvConfig& env,
                        const RolloutBatch& batch, const TrainConfig& cfg) {
  const ObsBuilder obs(env, graph);
  const CriticData data = build_critic_data(obs, graph, batch);
  Tape tape;
  return critic_graph(tape, critic, graph, data, {}, cfg).scalar();
}

}  // namespace stacca
