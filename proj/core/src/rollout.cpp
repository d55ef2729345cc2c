#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "stacca/errors.hpp"
#include "stacca/train.hpp"
#include "stacca/util.hpp"

namespace stacca {

double pairwise_sum(const double* x, std::size_t n) {
  if (n == 0) return 0.0;
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

double pairwise_sum(const std::vector<double>& x) {
  return pairwise_sum(x.data(), x.size());
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const int width = std::min(threads, n);
  pool.reserve(static_cast<size_t>(width));
  for (int w = 0; w < width; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::string to_string(AdvantageMode m) {
  return m == AdvantageMode::Counterfactual ? "counterfactual" : "gae_shared";
}

AdvantageMode advantage_mode_from_string(const std::string& s) {
  if (s == "counterfactual") return AdvantageMode::Counterfactual;
  if (s == "gae_shared") return AdvantageMode::GaeShared;
  throw config_error("unknown advantage mode: " + s);
}

std::string to_string(ValueLossKind k) {
  return k == ValueLossKind::Huber ? "huber" : "mse";
}

ValueLossKind value_loss_from_string(const std::string& s) {
  if (s == "huber") return ValueLossKind::Huber;
  if (s == "mse") return ValueLossKind::Mse;
  throw config_error("unknown value loss: " + s);
}

void TrainConfig::validate() const {
  if (gamma <= 0.0 || gamma >= 1.0) throw config_error("train.gamma outside (0,1)");
  if (gae_lambda < 0.0 || gae_lambda > 1.0)
    throw config_error("train.gae_lambda outside [0,1]");
  if (clip_eps <= 0.0) throw config_error("train.clip_eps must be positive");
  if (lr_actor <= 0.0 || lr_critic <= 0.0)
    throw config_error("train learning rates must be positive");
  if (k_pi < 1 || k_v < 1) throw config_error("train epoch counts must be >= 1");
  if (episodes_per_iter < 1) throw config_error("train.episodes_per_iter must be >= 1");
  if (horizon < 1) throw config_error("train.horizon must be >= 1");
  if (iters < 0) throw config_error("train.iters must be >= 0");
  if (huber_delta <= 0.0) throw config_error("train.huber_delta must be positive");
  if (entropy_coef < 0.0) throw config_error("train.entropy_coef must be >= 0");
  if (norm_eps <= 0.0) throw config_error("train.norm_eps must be positive");
  if (minibatch_size < 0) throw config_error("train.minibatch_size must be >= 0");
  if (checkpoint_every < 1) throw config_error("train.checkpoint_every must be >= 1");
  if (threads < 1) throw config_error("train.threads must be >= 1");
}

double EpisodeRecord::undiscounted_return() const {
  std::vector<double> rewards(steps.size());
  for (size_t t = 0; t < steps.size(); ++t) rewards[t] = steps[t].reward;
  return pairwise_sum(rewards);
}

int RolloutBatch::horizon() const {
  return episodes.empty() ? 0 : static_cast<int>(episodes[0].steps.size());
}

int RolloutBatch::num_agents() const {
  return episodes.empty() || episodes[0].steps.empty()
             ? 0
             : episodes[0].steps[0].state.size();
}

namespace {

// gradient-free critic values for a stack of states, chunked to bound memory
constexpr int kCriticChunk = 512;

void critic_values_chunked(ValueModel& critic, const Graph& graph,
                           const std::vector<double>& features, int count,
                           double* out) {
  const int row = graph.num_nodes * kCriticFeatures;
  for (int start = 0; start < count; start += kCriticChunk) {
    const int chunk = std::min(kCriticChunk, count - start);
    ad::Tape tape(/*recording=*/false);
    const ad::Tensor feats = tape.constant(
        {chunk, graph.num_nodes, kCriticFeatures},
        {features.begin() + static_cast<std::ptrdiff_t>(start) * row,
         features.begin() + static_cast<std::ptrdiff_t>(start + chunk) * row});
    const ad::Tensor values = critic_forward_batch(tape, critic, graph, feats);
    std::copy_n(values.data().data(), chunk, out + start);
  }
}

void run_episode(const EnvConfig& env, const Graph& graph, const ObsBuilder& obs,
                 PolicyModel& policy, ValueModel& critic, const TrainConfig& cfg,
                 std::uint64_t episode_index, EpisodeRecord& ep) {
  const int n = graph.num_nodes;
  RngStream reset_rng(cfg.seed, Stream::EnvReset, episode_index);
  RngStream noise_rng(cfg.seed, Stream::EnvNoise, episode_index);
  RngStream act_rng(cfg.seed, Stream::PolicySample, episode_index);

  GlobalState state = reset(env, graph, reset_rng);
  ep.steps.resize(static_cast<size_t>(cfg.horizon));
  for (int t = 0; t < cfg.horizon; ++t) {
    StepRecord& rec = ep.steps[static_cast<size_t>(t)];
    rec.state = state;
    rec.actions.resize(static_cast<size_t>(n));
    rec.logp_old.resize(static_cast<size_t>(n));
    rec.probs_old.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      const auto logp = actor_forward(policy, obs.observe(state, i));
      const int a = sample_categorical(logp, act_rng.next_double());
      rec.actions[static_cast<size_t>(i)] = static_cast<ActionDelta>(a);
      rec.logp_old[static_cast<size_t>(i)] = logp[static_cast<size_t>(a)];
      for (int k = 0; k < kNumActions; ++k)
        rec.probs_old[static_cast<size_t>(i)][static_cast<size_t>(k)] =
            std::exp(logp[static_cast<size_t>(k)]);
    }
    rec.noise = draw_noise(n, noise_rng);
    const StepResult factual = step(env, graph, state, rec.actions, rec.noise);
    rec.reward = factual.reward;
    rec.next_state = factual.next;

    rec.cf_reward.resize(static_cast<size_t>(n));
    rec.cf_value.resize(static_cast<size_t>(n));
    rec.cf_control.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      for (int a = 0; a < kNumActions; ++a) {
        const StepResult branch = branch_from(env, state, rec.actions, factual,
                                              i, static_cast<ActionDelta>(a));
        rec.cf_reward[static_cast<size_t>(i)][static_cast<size_t>(a)] = branch.reward;
        rec.cf_control[static_cast<size_t>(i)][static_cast<size_t>(a)] =
            branch.next.node(i).c;
      }
    }
    state = factual.next;
  }

  // one critic pass over s_0..s_H
  const int row = n * kCriticFeatures;
  std::vector<double> state_feats(static_cast<size_t>(cfg.horizon + 1) * row);
  for (int t = 0; t < cfg.horizon; ++t)
    obs.fill_critic_features(ep.steps[static_cast<size_t>(t)].state,
                             state_feats.data() + static_cast<std::ptrdiff_t>(t) * row);
  obs.fill_critic_features(ep.steps.back().next_state,
                           state_feats.data() + static_cast<std::ptrdiff_t>(cfg.horizon) * row);
  std::vector<double> values(static_cast<size_t>(cfg.horizon + 1));
  critic_values_chunked(critic, graph, state_feats, cfg.horizon + 1, values.data());
  for (int t = 0; t < cfg.horizon; ++t) {
    ep.steps[static_cast<size_t>(t)].value = values[static_cast<size_t>(t)];
    ep.steps[static_cast<size_t>(t)].next_value = values[static_cast<size_t>(t) + 1];
  }
  ep.terminal_value = values[static_cast<size_t>(cfg.horizon)];

  // branch values: feature rows are the factual next state with one control
  // entry edited; branches whose control equals the factual one reuse the
  // factual next value (they are the same state bit for bit)
  struct Pending { int t, agent, action; };
  std::vector<Pending> pending;
  std::vector<double> branch_feats;
  for (int t = 0; t < cfg.horizon; ++t) {
    StepRecord& rec = ep.steps[static_cast<size_t>(t)];
    const double* base = state_feats.data() + static_cast<std::ptrdiff_t>(t + 1) * row;
    for (int i = 0; i < n; ++i) {
      const double c_factual = rec.next_state.node(i).c;
      for (int a = 0; a < kNumActions; ++a) {
        const double c_alt = rec.cf_control[static_cast<size_t>(i)][static_cast<size_t>(a)];
        if (c_alt == c_factual) {
          rec.cf_value[static_cast<size_t>(i)][static_cast<size_t>(a)] = rec.next_value;
          continue;
        }
        pending.push_back({t, i, a});
        const size_t off = branch_feats.size();
        branch_feats.insert(branch_feats.end(), base, base + row);
        branch_feats[off + static_cast<size_t>(i) * kCriticFeatures + 1] = c_alt;
      }
    }
  }
  if (!pending.empty()) {
    std::vector<double> branch_values(pending.size());
    critic_values_chunked(critic, graph, branch_feats,
                          static_cast<int>(pending.size()), branch_values.data());
    for (size_t b = 0; b < pending.size(); ++b) {
      auto& rec = ep.steps[static_cast<size_t>(pending[b].t)];
      rec.cf_value[static_cast<size_t>(pending[b].agent)]
                  [static_cast<size_t>(pending[b].action)] = branch_values[b];
    }
  }
}

}  // namespace

RolloutBatch collect_rollouts(const EnvConfig& env, const Graph& graph,
                              PolicyModel& policy, ValueModel& critic,
                              const TrainConfig& cfg, std::uint64_t iter_index) {
  cfg.validate();
  env.validate(graph.num_nodes);
  const ObsBuilder obs(env, graph);
  RolloutBatch batch;
  batch.episodes.resize(static_cast<size_t>(cfg.episodes_per_iter));
  parallel_for(cfg.episodes_per_iter, cfg.threads, [&](int e) {
    const std::uint64_t episode_index =
        iter_index * static_cast<std::uint64_t>(cfg.episodes_per_iter) +
        static_cast<std::uint64_t>(e);
    run_episode(env, graph, obs, policy, critic, cfg, episode_index,
                batch.episodes[static_cast<size_t>(e)]);
  });
  return batch;
}

void gae_returns(RolloutBatch& batch, double gamma, double gae_lambda) {
  batch.returns.assign(batch.episodes.size(), {});
  batch.shared_adv.assign(batch.episodes.size(), {});
  for (size_t e = 0; e < batch.episodes.size(); ++e) {
    const EpisodeRecord& ep = batch.episodes[e];
    const int h = static_cast<int>(ep.steps.size());
    auto& returns = batch.returns[e];
    auto& adv = batch.shared_adv[e];
    returns.assign(static_cast<size_t>(h), 0.0);
    adv.assign(static_cast<size_t>(h), 0.0);
    double gae = 0.0;
    for (int t = h - 1; t >= 0; --t) {
      const StepRecord& rec = ep.steps[static_cast<size_t>(t)];
      const double delta = rec.reward + gamma * rec.next_value - rec.value;
      gae = delta + gamma * gae_lambda * gae;
      adv[static_cast<size_t>(t)] = gae;
      returns[static_cast<size_t>(t)] = gae + rec.value;
    }
  }
}

void standardize_row(std::vector<double>& row, double eps) {
  const size_t n = row.size();
  if (n == 0) return;
  const double mean = pairwise_sum(row) / static_cast<double>(n);
  double var = 0.0;
  for (double x : row) var += (x - mean) * (x - mean);
  var /= static_cast<double>(n);
  const double denom = std::sqrt(var) + eps;
  for (double& x : row) x = (x - mean) / denom;
}

void counterfactual_advantages(RolloutBatch& batch, double gamma, double norm_eps) {
  batch.cf_adv.assign(batch.episodes.size(), {});
  for (size_t e = 0; e < batch.episodes.size(); ++e) {
    const EpisodeRecord& ep = batch.episodes[e];
    auto& per_t = batch.cf_adv[e];
    per_t.resize(ep.steps.size());
    for (size_t t = 0; t < ep.steps.size(); ++t) {
      const StepRecord& rec = ep.steps[t];
      const int n = rec.state.size();
      if (rec.cf_reward.size() != static_cast<size_t>(n) ||
          rec.cf_value.size() != static_cast<size_t>(n))
        throw std::invalid_argument("counterfactual_advantages: branch records missing");
      auto& row = per_t[t];
      row.resize(static_cast<size_t>(n));
      const double factual = rec.reward + gamma * rec.next_value;
      for (int i = 0; i < n; ++i) {
        double baseline = 0.0;
        for (int a = 0; a < kNumActions; ++a)
          baseline += rec.probs_old[static_cast<size_t>(i)][static_cast<size_t>(a)] *
                      (rec.cf_reward[static_cast<size_t>(i)][static_cast<size_t>(a)] +
                       gamma * rec.cf_value[static_cast<size_t>(i)][static_cast<size_t>(a)]);
        row[static_cast<size_t>(i)] = factual - baseline;
      }
      standardize_row(row, norm_eps);
    }
  }
}

void normalize_shared(RolloutBatch& batch, double norm_eps) {
  std::vector<double> flat;
  for (const auto& ep : batch.shared_adv)
    flat.insert(flat.end(), ep.begin(), ep.end());
  const double mean = flat.empty() ? 0.0 : pairwise_sum(flat) / flat.size();
  double var = 0.0;
  for (double x : flat) var += (x - mean) * (x - mean);
  if (!flat.empty()) var /= static_cast<double>(flat.size());
  const double denom = std::sqrt(var) + norm_eps;
  batch.shared_adv_norm.assign(batch.shared_adv.size(), {});
  for (size_t e = 0; e < batch.shared_adv.size(); ++e) {
    batch.shared_adv_norm[e].resize(batch.shared_adv[e].size());
    for (size_t t = 0; t < batch.shared_adv[e].size(); ++t)
      batch.shared_adv_norm[e][t] = (batch.shared_adv[e][t] - mean) / denom;
  }
}

}  // namespace stacca
