// Acceptance suite: ten numbered criteria, one pass/fail line each, nonzero
// exit if any executed criterion fails. Run a subset with --only 1,5,9.
//
// Criteria 6-8 share one trained checkpoint (criterion 6 trains it; 7 trains
// its own ablation pairs; 8 reuses 6's checkpoint or trains a fresh one).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "stacca/checkpoint.hpp"
#include "stacca/config.hpp"
#include "stacca/env.hpp"
#include "stacca/errors.hpp"
#include "stacca/eval.hpp"
#include "stacca/experiment.hpp"
#include "stacca/graph.hpp"
#include "stacca/models.hpp"
#include "stacca/rng.hpp"
#include "stacca/tensor.hpp"
#include "stacca/train.hpp"
#include "stacca/util.hpp"

namespace fs = std::filesystem;
using namespace stacca;
using ad::Parameter;
using ad::Tape;
using ad::Tensor;

namespace {

// ---------------------------------------------------------------------------
// shared plumbing

struct Criterion {
  int id;
  std::string name;
  std::function<std::string()> run;  // returns "" on pass, else failure detail
};

std::string g_work_dir;

std::string work_dir() {
  if (g_work_dir.empty()) {
    g_work_dir = (fs::temp_directory_path() / "stacca_acceptance").string();
    fs::create_directories(g_work_dir);
  }
  return g_work_dir;
}

std::vector<double> random_vec(RngStream& rng, int n, double lo = -1.0,
                               double hi = 1.0) {
  std::vector<double> out(static_cast<size_t>(n));
  for (auto& x : out) x = rng.next_uniform(lo, hi);
  return out;
}

ModelConfig tiny_model() {
  ModelConfig cfg;
  cfg.d_model = 8;
  cfg.n_gat_layers = 1;
  cfg.n_enc_layers = 1;
  cfg.n_heads = 2;
  cfg.d_ff = 16;
  cfg.actor_hidden = 8;
  cfg.critic_hidden = 8;
  return cfg;
}

// the smoke task pinned by criteria 6 and 7
ExperimentConfig smoke_config(std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.graph.family = GraphFamily::BarabasiAlbert;
  cfg.graph.num_nodes = 10;
  cfg.graph.ba_m = 1;
  cfg.graph.seed = 42;
  cfg.env = EnvConfig::epidemic_defaults();
  cfg.env.horizon = 50;
  cfg.train.horizon = 50;
  cfg.train.episodes_per_iter = 8;
  cfg.train.iters = 60;
  cfg.train.seed = seed;
  cfg.run_name = "smoke_" + std::to_string(seed);
  return cfg;
}

// ---------------------------------------------------------------------------
// criterion 1: gradient correctness

struct FdFailure {
  long checked = 0;
  long bad = 0;
  std::string example;
};

// central finite differences against the tape gradient of a scalar loss
void fd_check(Parameter& p, const std::function<double()>& loss,
              const std::vector<double>& analytic, FdFailure& out) {
  const double eps = 1e-5;
  for (size_t i = 0; i < p.value.size(); ++i) {
    if (std::abs(analytic[i]) <= 1e-6) continue;  // criterion scopes to |grad| > 1e-6
    const double saved = p.value[i];
    p.value[i] = saved + eps;
    const double up = loss();
    p.value[i] = saved - eps;
    const double down = loss();
    p.value[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    ++out.checked;
    const double rel = std::abs(numeric - analytic[i]) /
                       std::max(std::abs(numeric), std::abs(analytic[i]));
    if (rel > 1e-4 && std::abs(numeric - analytic[i]) > 1e-8) {
      ++out.bad;
      if (out.example.empty()) {
        std::ostringstream msg;
        msg << p.name << "[" << i << "] analytic " << analytic[i] << " numeric "
            << numeric;
        out.example = msg.str();
      }
    }
  }
}

void fd_check_build(std::vector<Parameter*> params,
                    const std::function<Tensor(Tape&)>& build, FdFailure& out) {
  for (auto* p : params) p->zero_grad();
  Tape tape;
  tape.backward(build(tape));
  auto loss = [&] {
    Tape fresh;
    return build(fresh).scalar();
  };
  for (auto* p : params) {
    fd_check(*p, loss, p->grad, out);
    p->zero_grad();
  }
}

std::string criterion_gradients() {
  FdFailure fails;
  RngStream rng(8080, Stream::ParamInit);

  // ten randomized instances of every differentiable op
  for (int instance = 0; instance < 10; ++instance) {
    const int r = 2 + rng.next_int(3), c = 2 + rng.next_int(4);
    Parameter a("a", {r, c});
    a.value = random_vec(rng, r * c, 0.1, 1.8);  // positive: shared with log
    Parameter b("b", {r, c});
    b.value = random_vec(rng, r * c, 0.1, 1.8);
    const auto w = random_vec(rng, r * c);
    auto weighted = [&](Tape& t, const Tensor& x) {
      return t.sum_all(t.mul(x, t.constant({r, c}, w)));
    };

    using Unary = std::function<Tensor(Tape&, const Tensor&)>;
    const std::vector<Unary> unaries = {
        [](Tape& t, const Tensor& x) { return t.exp(x); },
        [](Tape& t, const Tensor& x) { return t.log(x); },
        [](Tape& t, const Tensor& x) { return t.tanh(x); },
        [](Tape& t, const Tensor& x) { return t.leaky_relu(x, 0.2); },
        [](Tape& t, const Tensor& x) { return t.elu(x); },
        [](Tape& t, const Tensor& x) { return t.huber(x, 0.7); },
        [](Tape& t, const Tensor& x) { return t.clip(x, 0.3, 1.4); },
        [](Tape& t, const Tensor& x) { return t.scale(x, -1.7); },
        [](Tape& t, const Tensor& x) { return t.add_scalar(x, 0.4); },
        [](Tape& t, const Tensor& x) { return t.softmax_rows(x); },
        [](Tape& t, const Tensor& x) { return t.log_softmax_rows(x); },
        [](Tape& t, const Tensor& x) { return t.standardize_rows(x, 1e-5); },
        [](Tape& t, const Tensor& x) {
          return t.reshape(t.reshape(x, {x.numel(), 1}), x.shape());
        },
    };
    for (const auto& op : unaries)
      fd_check_build({&a}, [&](Tape& t) {
        return t.sum_all(t.mul(op(t, t.watch(a)),
                               t.constant({r, c}, w)));
      }, fails);

    using Binary = std::function<Tensor(Tape&, const Tensor&, const Tensor&)>;
    const std::vector<Binary> binaries = {
        [](Tape& t, const Tensor& x, const Tensor& y) { return t.add(x, y); },
        [](Tape& t, const Tensor& x, const Tensor& y) { return t.sub(x, y); },
        [](Tape& t, const Tensor& x, const Tensor& y) { return t.mul(x, y); },
        [](Tape& t, const Tensor& x, const Tensor& y) { return t.minimum(x, y); },
    };
    for (const auto& op : binaries)
      fd_check_build({&a, &b}, [&](Tape& t) {
        return weighted(t, op(t, t.watch(a), t.watch(b)));
      }, fails);

    // matmul / bmm / reductions / gather / concat / pairwise / masked softmax
    const int k = 2 + rng.next_int(3);
    Parameter ma("ma", {r, k});
    ma.value = random_vec(rng, r * k);
    Parameter mb("mb", {k, c});
    mb.value = random_vec(rng, k * c);
    fd_check_build({&ma, &mb}, [&](Tape& t) {
      return weighted(t, t.matmul(t.watch(ma), t.watch(mb)));
    }, fails);

    Parameter ba("ba", {2, r, k});
    ba.value = random_vec(rng, 2 * r * k);
    Parameter bb("bb", {2, k, c});
    bb.value = random_vec(rng, 2 * k * c);
    const auto w3 = random_vec(rng, 2 * r * c);
    fd_check_build({&ba, &bb}, [&](Tape& t) {
      return t.sum_all(t.mul(t.bmm(t.watch(ba), t.watch(bb)),
                             t.constant({2, r, c}, w3)));
    }, fails);

    const auto wr = random_vec(rng, r);
    const auto wc = random_vec(rng, c);
    fd_check_build({&a}, [&](Tape& t) {
      return t.sum_all(t.mul(t.sum_axis(t.watch(a), 1), t.constant({r}, wr)));
    }, fails);
    fd_check_build({&a}, [&](Tape& t) {
      return t.sum_all(t.mul(t.mean_axis(t.watch(a), 0), t.constant({c}, wc)));
    }, fails);
    fd_check_build({&a}, [&](Tape& t) {
      return t.sum_all(t.mul(t.max_axis(t.watch(a), 1), t.constant({r}, wr)));
    }, fails);
    fd_check_build({&a}, [&](Tape& t) { return t.mean_all(t.watch(a)); }, fails);

    std::vector<int> idx;
    for (int i = 0; i < r + 1; ++i) idx.push_back(rng.next_int(r));
    const auto wg = random_vec(rng, (r + 1) * c);
    fd_check_build({&a}, [&](Tape& t) {
      return t.sum_all(t.mul(t.gather_rows(t.watch(a), idx),
                             t.constant({r + 1, c}, wg)));
    }, fails);
    const auto w2c = random_vec(rng, r * 2 * c);
    fd_check_build({&a, &b}, [&](Tape& t) {
      return t.sum_all(t.mul(t.concat({t.watch(a), t.watch(b)}, 1),
                             t.constant({r, 2 * c}, w2c)));
    }, fails);

    Parameter u("u", {2, r});
    u.value = random_vec(rng, 2 * r);
    Parameter v("v", {2, r});
    v.value = random_vec(rng, 2 * r);
    const auto wp = random_vec(rng, 2 * r * r);
    fd_check_build({&u, &v}, [&](Tape& t) {
      return t.sum_all(t.mul(t.pairwise_sum(t.watch(u), t.watch(v)),
                             t.constant({2, r, r}, wp)));
    }, fails);

    std::vector<double> mask(static_cast<size_t>(r) * c, 1.0);
    mask[0] = 0.0;
    fd_check_build({&a}, [&](Tape& t) {
      const Tensor m = t.constant({r, c}, mask);
      return t.sum_all(t.mul(t.softmax_rows(t.watch(a), &m),
                             t.constant({r, c}, w)));
    }, fails);
  }

  // both full model stacks on a 6-node fixture, ten instances each
  const Graph g =
      Graph::from_edges(6, {{0, 1}, {1, 2}, {2, 3}, {1, 4}, {3, 5}});
  const EnvConfig env = EnvConfig::epidemic_defaults();
  for (int instance = 0; instance < 10; ++instance) {
    RngStream init(static_cast<std::uint64_t>(instance) + 50, Stream::ParamInit);
    ValueModel critic = make_value_model(tiny_model(), init);
    PolicyModel policy = make_policy_model(tiny_model(), init);
    std::vector<NodeState> nodes(6);
    for (auto& node : nodes) {
      node.h = init.next_int(2) ? 1 : 0;
      node.c = 0.1 * init.next_int(11);
    }
    const GlobalState state = GlobalState::from_nodes(std::move(nodes), 0);
    const auto cfeats = critic_features(env, g, state);
    fd_check_build(critic.params(), [&](Tape& t) {
      return t.sum_all(critic_forward_batch(
          t, critic, g, t.constant({1, 6, kCriticFeatures}, cfeats)));
    }, fails);

    const auto obs = observe(env, g, state, 1);
    const int n = obs.subgraph.graph.num_nodes;
    fd_check_build(policy.params(), [&](Tape& t) {
      const Tensor logp = actor_forward_batch(
          t, policy, obs.subgraph.graph, obs.ego_local,
          t.constant({1, n, kObsFeatures}, obs.features));
      return t.sum_all(t.mul(logp, t.constant({1, 3}, {0.4, -1.1, 0.6})));
    }, fails);
  }

  std::ostringstream detail;
  detail << fails.checked << " coordinates checked";
  if (fails.bad > 0)
    return std::to_string(fails.bad) + " of " + detail.str() +
           " exceeded 1e-4 rel-err; first: " + fails.example;
  return "";
}

// ---------------------------------------------------------------------------
// criterion 2: dynamics fidelity

std::string criterion_dynamics() {
  const int draws = 100000;
  int grid_points = 0;
  std::ostringstream failure;

  // epidemic: star center with I flagged neighbors, paper parameters
  {
    const EnvConfig cfg = EnvConfig::epidemic_defaults();  // beta0=.15, eta=.9
    for (const double c : {0.0, 0.5, 1.0}) {
      for (const int infected : {0, 1, 2, 4}) {
        const int n = 5;
        std::vector<std::pair<int, int>> edges;
        for (int leaf = 1; leaf < n; ++leaf) edges.emplace_back(0, leaf);
        const Graph g = Graph::from_edges(n, std::move(edges));
        std::vector<NodeState> nodes(static_cast<size_t>(n));
        nodes[0].c = c;
        for (int leaf = 1; leaf <= infected; ++leaf) nodes[static_cast<size_t>(leaf)].h = 1;
        const GlobalState state = GlobalState::from_nodes(std::move(nodes), 0);
        const double analytic = transition_prob_stay_clear(cfg, state, 0, infected);

        RngStream noise_rng(900 + grid_points, Stream::EnvNoise);
        const std::vector<ActionDelta> maintain(static_cast<size_t>(n),
                                                ActionDelta::Maintain);
        int stay = 0;
        for (int k = 0; k < draws; ++k)
          stay += 1 - step(cfg, g, state, maintain, draw_noise(n, noise_rng))
                          .next.node(0)
                          .h;
        const double p = static_cast<double>(stay) / draws;
        const double se = std::sqrt(std::max(analytic * (1 - analytic), 1e-12) / draws);
        ++grid_points;
        if (std::abs(p - analytic) > 4 * se && std::abs(p - analytic) > 1e-9) {
          failure << "epidemic(c=" << c << ",I=" << infected << "): " << p
                  << " vs " << analytic << "; ";
        }
      }
    }
    // recovery point
    std::vector<NodeState> nodes(3);
    nodes[0].h = 1;
    const Graph g = Graph::from_edges(3, {{0, 1}, {0, 2}});
    const GlobalState state = GlobalState::from_nodes(std::move(nodes), 0);
    RngStream noise_rng(990, Stream::EnvNoise);
    int recovered = 0;
    for (int k = 0; k < draws; ++k)
      recovered += 1 - step(cfg, g, state,
                            std::vector<ActionDelta>(3, ActionDelta::Maintain),
                            draw_noise(3, noise_rng))
                           .next.node(0)
                           .h;
    const double p = static_cast<double>(recovered) / draws;
    const double se = std::sqrt(cfg.delta_recovery * (1 - cfg.delta_recovery) / draws);
    ++grid_points;
    if (std::abs(p - cfg.delta_recovery) > 4 * se)
      failure << "epidemic(recovery): " << p << " vs " << cfg.delta_recovery << "; ";
  }

  // rumor: center with I aware neighbors, extra aware isolates setting h-bar
  {
    const EnvConfig cfg = EnvConfig::rumor_defaults();  // beta0=.25, kappa=3
    const int n = 20;
    int combo = 0;
    for (const double c : {0.3, 0.7, 1.0}) {
      for (const int aware_neighbors : {1, 2, 4}) {
        for (const int extra_aware : {0, 6}) {
          if (++combo > 14) break;  // >= 12 grid points is plenty
          std::vector<std::pair<int, int>> edges;
          for (int leaf = 1; leaf <= 4; ++leaf) edges.emplace_back(0, leaf);
          for (int v = 5; v + 1 < n; v += 2) edges.emplace_back(v, v + 1);
          const Graph g = Graph::from_edges(n, std::move(edges));
          std::vector<NodeState> nodes(static_cast<size_t>(n));
          nodes[0].c = c;
          for (int leaf = 1; leaf <= aware_neighbors; ++leaf)
            nodes[static_cast<size_t>(leaf)].h = 1;
          for (int v = 5; v < 5 + extra_aware; ++v) nodes[static_cast<size_t>(v)].h = 1;
          const GlobalState state = GlobalState::from_nodes(std::move(nodes), 0);
          const double analytic =
              transition_prob_stay_clear(cfg, state, 0, aware_neighbors);

          RngStream noise_rng(1300 + combo, Stream::EnvNoise);
          const std::vector<ActionDelta> maintain(static_cast<size_t>(n),
                                                  ActionDelta::Maintain);
          int stay = 0;
          for (int k = 0; k < draws; ++k)
            stay += 1 - step(cfg, g, state, maintain, draw_noise(n, noise_rng))
                            .next.node(0)
                            .h;
          const double p = static_cast<double>(stay) / draws;
          const double se =
              std::sqrt(std::max(analytic * (1 - analytic), 1e-12) / draws);
          ++grid_points;
          if (std::abs(p - analytic) > 4 * se && std::abs(p - analytic) > 1e-9)
            failure << "rumor(c=" << c << ",I=" << aware_neighbors
                    << ",extra=" << extra_aware << "): " << p << " vs "
                    << analytic << "; ";
        }
      }
    }
  }

  if (!failure.str().empty()) return failure.str();
  if (grid_points < 24) return "grid too small: " + std::to_string(grid_points);
  return "";
}

// ---------------------------------------------------------------------------
// criterion 3: counterfactual advantage oracle equivalence

std::string criterion_cf_oracle() {
  int draws_done = 0;
  double worst = 0.0;
  for (int draw = 0; draw < 110; ++draw) {
    const bool path_fixture = draw % 2 == 0;
    Graph graph;
    if (path_fixture) {
      graph = Graph::from_edges(3, {{0, 1}, {1, 2}});
    } else {
      GraphSpec spec;
      spec.family = GraphFamily::BarabasiAlbert;
      spec.num_nodes = 5;
      spec.ba_m = 2;
      spec.seed = static_cast<std::uint64_t>(draw);
      graph = generate(spec);
    }
    EnvConfig env = EnvConfig::epidemic_defaults();
    env.num_seeds = 1 + draw % graph.num_nodes;
    env.horizon = 2;

    TrainConfig cfg;
    cfg.episodes_per_iter = 1;
    cfg.horizon = 2;
    cfg.iters = 1;
    cfg.seed = static_cast<std::uint64_t>(1000 + draw);  // random state/action/noise
    RngStream init(static_cast<std::uint64_t>(draw), Stream::ParamInit);
    PolicyModel policy = make_policy_model(tiny_model(), init);
    ValueModel critic = make_value_model(tiny_model(), init);

    RolloutBatch batch = collect_rollouts(env, graph, policy, critic, cfg, 0);
    counterfactual_advantages(batch, cfg.gamma, cfg.norm_eps);

    const ObsBuilder obs(env, graph);
    for (size_t t = 0; t < batch.episodes[0].steps.size(); ++t) {
      const StepRecord& rec = batch.episodes[0].steps[t];
      const int n = rec.state.size();
      // brute force: re-simulate every branch from scratch with the same noise
      std::vector<double> oracle(static_cast<size_t>(n));
      for (int i = 0; i < n; ++i) {
        double baseline = 0.0;
        for (int a = 0; a < kNumActions; ++a) {
          std::vector<ActionDelta> actions = rec.actions;
          actions[static_cast<size_t>(i)] = static_cast<ActionDelta>(a);
          const StepResult branch = step(env, graph, rec.state, actions, rec.noise);
          std::vector<double> feats(static_cast<size_t>(n) * kCriticFeatures);
          obs.fill_critic_features(branch.next, feats.data());
          baseline += rec.probs_old[static_cast<size_t>(i)][static_cast<size_t>(a)] *
                      (branch.reward + cfg.gamma * critic_forward(critic, graph, feats));
        }
        oracle[static_cast<size_t>(i)] =
            rec.reward + cfg.gamma * rec.next_value - baseline;
      }

      // Eq. 12 identities before comparing
      std::vector<double> raw = oracle;
      standardize_row(oracle, cfg.norm_eps);
      double mean = 0.0;
      for (double x : batch.cf_adv[0][t]) mean += x;
      mean /= n;
      if (std::abs(mean) > 1e-12)
        return "post-normalization mean " + std::to_string(mean);
      double raw_mean = 0.0, raw_var = 0.0;
      for (double x : raw) raw_mean += x;
      raw_mean /= n;
      for (double x : raw) raw_var += (x - raw_mean) * (x - raw_mean);
      const double raw_std = std::sqrt(raw_var / n);
      if (raw_std > 0.0) {
        double var = 0.0;
        for (double x : batch.cf_adv[0][t]) var += (x - mean) * (x - mean);
        const double pop_std = std::sqrt(var / n);
        // exact algebraic value sigma/(sigma+eps); ~1 once sigma >> eps
        const double expected = raw_std / (raw_std + cfg.norm_eps);
        if (std::abs(pop_std - expected) > 1e-9)
          return "post-normalization std " + std::to_string(pop_std) +
                 " vs expected " + std::to_string(expected);
        if (raw_std > 100.0 * cfg.norm_eps && std::abs(pop_std - 1.0) > 1e-2)
          return "post-normalization std far from 1: " + std::to_string(pop_std);
      }

      for (int i = 0; i < n; ++i)
        worst = std::max(worst, std::abs(batch.cf_adv[0][t][static_cast<size_t>(i)] -
                                         oracle[static_cast<size_t>(i)]));
      ++draws_done;
    }
  }
  if (worst > 1e-12)
    return "pipeline vs brute-force max |diff| = " + std::to_string(worst);
  if (draws_done < 100) return "too few draws: " + std::to_string(draws_done);
  return "";
}

// ---------------------------------------------------------------------------
// criterion 4: factorization property

std::string criterion_factorization() {
  RngStream rng(606, Stream::EnvNoise);
  int trials = 0;
  int violations = 0;
  while (trials < 1000) {
    GraphSpec spec;
    spec.family = trials % 2 ? GraphFamily::BarabasiAlbert : GraphFamily::WattsStrogatz;
    spec.num_nodes = 12 + (trials % 3) * 4;
    spec.ba_m = 2;
    spec.ws_k = 4;
    spec.ws_p = 0.3;
    spec.seed = static_cast<std::uint64_t>(trials / 7);
    const Graph g = generate(spec);
    const int n = g.num_nodes;

    EnvConfig env = EnvConfig::epidemic_defaults();
    env.num_seeds = 1 + trials % 5;
    RngStream reset_rng(static_cast<std::uint64_t>(trials), Stream::EnvReset);
    GlobalState base = reset(env, g, reset_rng);
    // randomize controls too
    {
      auto nodes = base.nodes();
      for (auto& node : nodes) node.c = 0.1 * rng.next_int(11);
      base = GlobalState::from_nodes(std::move(nodes), 0);
    }
    std::vector<ActionDelta> actions(static_cast<size_t>(n));
    for (auto& a : actions) a = static_cast<ActionDelta>(rng.next_int(3));
    const TransitionNoise noise = draw_noise(n, rng);
    const StepResult before = step(env, g, base, actions, noise);

    const int target = rng.next_int(n);
    const auto dist = bfs_distances(g, target);
    std::vector<int> far;
    for (int v = 0; v < n; ++v)
      if (dist[v] > 1) far.push_back(v);
    if (far.empty()) continue;
    auto nodes = base.nodes();
    const int victim = far[static_cast<size_t>(rng.next_int(static_cast<int>(far.size())))];
    nodes[static_cast<size_t>(victim)].h ^= 1;
    nodes[static_cast<size_t>(victim)].c = 0.1 * rng.next_int(11);
    const StepResult after =
        step(env, g, GlobalState::from_nodes(std::move(nodes), 0), actions, noise);
    if (before.next.node(target).h != after.next.node(target).h) ++violations;
    ++trials;
  }
  if (violations > 0)
    return std::to_string(violations) + " violations in 1000 trials";
  return "";
}

// ---------------------------------------------------------------------------
// criterion 5: O(AN) branching

std::string criterion_branch_complexity() {
  std::vector<double> log_n, log_t;
  for (const int n : {10, 50, 250, 1250}) {
    GraphSpec spec;
    spec.family = GraphFamily::BarabasiAlbert;
    spec.num_nodes = n;
    spec.ba_m = 1;
    spec.seed = 7;
    const Graph g = generate(spec);
    EnvConfig env = EnvConfig::epidemic_defaults();
    env.num_seeds = std::max(1, n / 10);
    RngStream reset_rng(1, Stream::EnvReset);
    RngStream noise_rng(1, Stream::EnvNoise);
    const GlobalState state = reset(env, g, reset_rng);
    std::vector<ActionDelta> actions(static_cast<size_t>(n));
    RngStream act_rng(1, Stream::PolicySample);
    for (auto& a : actions) a = static_cast<ActionDelta>(act_rng.next_int(3));
    const TransitionNoise noise = draw_noise(n, noise_rng);
    const StepResult factual = step(env, g, state, actions, noise);

    const int reps = std::max(200, 400000 / n);
    std::vector<double> trials;
    for (int trial = 0; trial < 5; ++trial) {
      double sink = 0.0;
      const auto t0 = std::chrono::steady_clock::now();
      for (int rep = 0; rep < reps; ++rep)
        for (int i = 0; i < n; ++i)
          for (int a = 0; a < kNumActions; ++a)
            sink += branch_from(env, state, actions, factual, i,
                                static_cast<ActionDelta>(a))
                        .reward;
      const double elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      if (!std::isfinite(sink)) return "non-finite branch reward";
      trials.push_back(elapsed / reps);
    }
    std::nth_element(trials.begin(), trials.begin() + 2, trials.end());
    log_n.push_back(std::log(static_cast<double>(n)));
    log_t.push_back(std::log(trials[2]));
  }
  const double mx = std::accumulate(log_n.begin(), log_n.end(), 0.0) / log_n.size();
  const double my = std::accumulate(log_t.begin(), log_t.end(), 0.0) / log_t.size();
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < log_n.size(); ++i) {
    num += (log_n[i] - mx) * (log_t[i] - my);
    den += (log_n[i] - mx) * (log_n[i] - mx);
  }
  const double slope = num / den;
  char buf[96];
  std::snprintf(buf, sizeof buf, "power-law exponent %.3f", slope);
  std::cout << "  [c5] " << buf << "\n";
  if (slope < 0.8 || slope > 1.2) return buf;
  return "";
}

// ---------------------------------------------------------------------------
// criteria 6-8: learning smoke, ablation signal, zero-shot generalization

std::string smoke_checkpoint_path() { return work_dir() + "/smoke_7/ckpt_best.bin"; }

RunResult train_smoke(std::uint64_t seed, AdvantageMode mode) {
  ExperimentConfig cfg = smoke_config(seed);
  cfg.train.advantage_mode = mode;
  cfg.run_name = "smoke_" + std::to_string(seed) +
                 (mode == AdvantageMode::GaeShared ? "_gae" : "");
  return run_training(cfg, work_dir() + "/" + cfg.run_name);
}

EvalScenario smoke_eval_scenario(const std::string& checkpoint) {
  EvalScenario sc;
  sc.name = "smoke_eval";
  sc.graph = smoke_config(7).graph;
  sc.env = smoke_config(7).env;
  sc.horizon = 50;
  sc.episodes = 100;
  sc.checkpoint = checkpoint;
  sc.seed = 12345;
  return sc;
}

std::string criterion_learning_smoke() {
  const RunResult run = train_smoke(7, AdvantageMode::Counterfactual);
  fs::copy_file(run.checkpoint_best, smoke_checkpoint_path(),
                fs::copy_options::overwrite_existing);

  const EvalScenario sc = smoke_eval_scenario(run.checkpoint_best);
  const EvalMetrics trained = evaluate(sc);
  const EvalMetrics random = evaluate_baseline(sc, BaselineKind::RandomPolicy);
  const EvalMetrics zero = evaluate_baseline(sc, BaselineKind::ZeroControl);

  const double reward_gap = trained.reward_mean - random.reward_mean;
  const double pooled_se = std::sqrt(trained.reward_stderr * trained.reward_stderr +
                                     random.reward_stderr * random.reward_stderr);
  const double frac_gap = zero.final_frac - trained.final_frac;
  const double frac_se =
      std::sqrt(zero.std_frac.back() * zero.std_frac.back() / zero.episodes +
                trained.std_frac.back() * trained.std_frac.back() / trained.episodes);

  char buf[256];
  std::snprintf(buf, sizeof buf,
                "reward %.2f vs random %.2f (gap/se=%.1f); final frac %.3f vs "
                "zero-control %.3f (gap/se=%.1f)",
                trained.reward_mean, random.reward_mean, reward_gap / pooled_se,
                trained.final_frac, zero.final_frac, frac_gap / frac_se);
  std::cout << "  [c6] " << buf << "\n";
  if (reward_gap < 3.0 * pooled_se)
    return std::string("reward separation below 3 pooled SE: ") + buf;
  if (!(frac_gap > 0.0) || frac_gap < 3.0 * frac_se)
    return std::string("infected-fraction separation below 3 sigma: ") + buf;
  return "";
}

double trailing_mean(const std::vector<IterMetrics>& metrics, int upto, int window) {
  double sum = 0.0;
  int count = 0;
  for (int i = std::max(0, upto - window + 1); i <= upto; ++i) {
    sum += metrics[static_cast<size_t>(i)].mean_episode_reward;
    ++count;
  }
  return sum / count;
}

std::string criterion_ablation_signal() {
  const std::vector<std::uint64_t> seeds{101, 202, 303};
  struct Pair {
    RunResult cf, gae;
  };
  std::vector<Pair> results(seeds.size());
  // independent single-threaded runs, two at a time
  parallel_for(static_cast<int>(seeds.size()) * 2, 2, [&](int job) {
    const size_t s = static_cast<size_t>(job) / 2;
    if (job % 2 == 0)
      results[s].cf = train_smoke(seeds[s], AdvantageMode::Counterfactual);
    else
      results[s].gae = train_smoke(seeds[s], AdvantageMode::GaeShared);
  });

  int seeds_passing = 0;
  for (size_t s = 0; s < seeds.size(); ++s) {
    const auto& cf = results[s].cf.train.metrics;
    const auto& gae = results[s].gae.train.metrics;
    const double target = trailing_mean(gae, static_cast<int>(gae.size()) - 1, 5);
    int reached = -1;
    for (int i = 0; i < static_cast<int>(cf.size()); ++i) {
      if (trailing_mean(cf, i, 5) >= target) {
        reached = i;
        break;
      }
    }
    char buf[128];
    std::snprintf(buf, sizeof buf,
                  "seed %llu: gae@60 (5-iter mean) %.2f, cf reaches it at iter %d",
                  static_cast<unsigned long long>(seeds[s]), target, reached);
    std::cout << "  [c7] " << buf << "\n";
    if (reached >= 0) ++seeds_passing;
  }
  if (seeds_passing < 2)
    return "counterfactual matched gae_shared final reward in only " +
           std::to_string(seeds_passing) + "/3 seeds";
  return "";
}

std::string criterion_zero_shot() {
  std::string checkpoint = smoke_checkpoint_path();
  if (!fs::exists(checkpoint))
    checkpoint = train_smoke(7, AdvantageMode::Counterfactual).checkpoint_best;

  // mechanical generalization: the four unseen families at both scales
  struct Family {
    const char* name;
    GraphSpec spec;
  };
  const std::vector<Family> families = {
      {"ba_m1", {GraphFamily::BarabasiAlbert, 0, 1, 1}},
      {"ba_m2", {GraphFamily::BarabasiAlbert, 0, 1, 2}},
      {"ws_p01", {GraphFamily::WattsStrogatz, 0, 1, 1, 4, 0.1}},
      {"ws_p05", {GraphFamily::WattsStrogatz, 0, 1, 1, 4, 0.5}},
  };
  for (const auto& family : families) {
    for (const int n : {100, 1000}) {
      EvalScenario sc;
      sc.name = std::string(family.name) + "_" + std::to_string(n);
      sc.graph = family.spec;
      sc.graph.num_nodes = n;
      sc.env = smoke_config(7).env;
      sc.env.num_seeds = 25;  // the generalization studies use 25 seeds
      sc.horizon = n == 1000 ? 30 : 50;
      sc.episodes = n == 1000 ? 1 : 2;
      sc.checkpoint = checkpoint;
      sc.seed = 777;
      try {
        const EvalMetrics m = evaluate(sc);
        if (m.mean_frac.size() != static_cast<size_t>(sc.horizon) + 1)
          return sc.name + ": malformed metrics";
      } catch (const std::exception& e) {
        return sc.name + ": " + e.what();
      }
    }
  }

  // reward separation vs random on BA(m=1) at N=100
  EvalScenario sc;
  sc.name = "ba_m1_100_reward";
  sc.graph = {GraphFamily::BarabasiAlbert, 100, 1, 1};
  sc.env = smoke_config(7).env;
  sc.horizon = 50;
  sc.episodes = 40;
  sc.checkpoint = checkpoint;
  sc.seed = 888;
  const EvalMetrics trained = evaluate(sc);
  const EvalMetrics random = evaluate_baseline(sc, BaselineKind::RandomPolicy);
  const double gap = trained.reward_mean - random.reward_mean;
  const double pooled = std::sqrt(trained.reward_stderr * trained.reward_stderr +
                                  random.reward_stderr * random.reward_stderr);
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "N=100 BA(m=1): trained %.2f vs random %.2f (gap/se=%.1f)",
                trained.reward_mean, random.reward_mean, gap / pooled);
  std::cout << "  [c8] " << buf << "\n";
  if (gap < 3.0 * pooled) return std::string("separation below 3 pooled SE: ") + buf;
  return "";
}

// ---------------------------------------------------------------------------
// criterion 9: permutation invariances

std::string criterion_permutation() {
  RngStream init(4242, Stream::ParamInit);
  const ModelConfig cfg;  // library defaults, full size
  PolicyModel policy = make_policy_model(cfg, init);
  ValueModel critic = make_value_model(cfg, init);
  const EnvConfig env = EnvConfig::epidemic_defaults();

  RngStream rng(31415, Stream::Eval);
  for (int trial = 0; trial < 100; ++trial) {
    GraphSpec spec;
    spec.family = trial % 2 ? GraphFamily::BarabasiAlbert : GraphFamily::WattsStrogatz;
    spec.num_nodes = 8 + trial % 5;
    spec.ba_m = 2;
    spec.ws_k = 4;
    spec.ws_p = 0.2;
    spec.seed = static_cast<std::uint64_t>(trial);
    const Graph g = generate(spec);
    const int n = g.num_nodes;
    std::vector<NodeState> nodes(static_cast<size_t>(n));
    for (auto& node : nodes) {
      node.h = rng.next_int(2) ? 1 : 0;
      node.c = 0.1 * rng.next_int(11);
    }
    const GlobalState state = GlobalState::from_nodes(nodes, 0);

    std::vector<int> perm(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
    for (int i = n - 1; i > 0; --i)
      std::swap(perm[static_cast<size_t>(i)],
                perm[static_cast<size_t>(rng.next_int(i + 1))]);
    std::vector<std::pair<int, int>> edges;
    for (const auto& [a, b] : g.edges)
      edges.emplace_back(perm[static_cast<size_t>(a)], perm[static_cast<size_t>(b)]);
    const Graph pg = Graph::from_edges(n, std::move(edges));
    std::vector<NodeState> pnodes(static_cast<size_t>(n));
    for (int v = 0; v < n; ++v)
      pnodes[static_cast<size_t>(perm[static_cast<size_t>(v)])] = nodes[static_cast<size_t>(v)];
    const GlobalState pstate = GlobalState::from_nodes(std::move(pnodes), 0);

    const double v0 = critic_forward(critic, g, critic_features(env, g, state));
    const double v1 = critic_forward(critic, pg, critic_features(env, pg, pstate));
    if (std::abs(v0 - v1) > 1e-10)
      return "critic value changed by " + std::to_string(std::abs(v0 - v1)) +
             " under relabeling (trial " + std::to_string(trial) + ")";

    const int ego = rng.next_int(n);
    const auto a = actor_forward(policy, observe(env, g, state, ego));
    const auto b = actor_forward(
        policy, observe(env, pg, pstate, perm[static_cast<size_t>(ego)]));
    for (int k = 0; k < kNumActions; ++k)
      if (std::abs(a[static_cast<size_t>(k)] - b[static_cast<size_t>(k)]) > 1e-10)
        return "actor log-probs changed by " +
               std::to_string(std::abs(a[static_cast<size_t>(k)] - b[static_cast<size_t>(k)])) +
               " under relabeling (trial " + std::to_string(trial) + ")";
  }
  return "";
}

// ---------------------------------------------------------------------------
// criterion 10: bitwise determinism of `train`

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string criterion_determinism() {
#ifndef STACCA_CLI_PATH
  return "CLI path not configured";
#else
  const std::string dir = work_dir() + "/determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cfg_path = dir + "/exp.cfg";
  {
    std::ofstream out(cfg_path);
    out << "run_name = det\n"
        << "graph.family = ba\ngraph.n = 10\ngraph.m = 1\ngraph.seed = 42\n"
        << "env.kind = epidemic\nenv.horizon = 20\n"
        << "train.episodes_per_iter = 4\ntrain.iters = 3\ntrain.seed = 9\n"
        << "train.threads = 1\n";
  }
  // two runs of the byte-identical config; stash the first run's artifacts
  const std::string cmd = std::string(STACCA_CLI_PATH) + " train --config " +
                          cfg_path + " --set output_dir=" + dir +
                          "/out >/dev/null 2>&1";
  if (std::system(cmd.c_str()) != 0) return "first train run failed";
  fs::create_directories(dir + "/first");
  const std::vector<std::string> files = {"metrics.csv", "metrics.jsonl",
                                          "ckpt_last.bin", "ckpt_best.bin",
                                          "resolved.cfg", "graph.txt"};
  for (const auto& file : files)
    fs::copy_file(dir + "/out/det/" + file, dir + "/first/" + file,
                  fs::copy_options::overwrite_existing);
  fs::remove_all(dir + "/out");
  if (std::system(cmd.c_str()) != 0) return "second train run failed";
  for (const auto& file : files) {
    const std::string a = slurp(dir + "/first/" + file);
    const std::string b = slurp(dir + "/out/det/" + file);
    if (a.empty()) return file + " missing or empty";
    if (a != b) return file + " differs between identical runs";
  }
  return "";
#endif
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      std::stringstream list(argv[++i]);
      std::string tok;
      while (std::getline(list, tok, ',')) only.insert(std::stoi(tok));
    } else if (arg == "--workdir" && i + 1 < argc) {
      g_work_dir = argv[++i];
      fs::create_directories(g_work_dir);
    } else {
      std::cerr << "usage: acceptance [--only 1,2,...] [--workdir DIR]\n";
      return 2;
    }
  }

  const std::vector<Criterion> criteria = {
      {1, "gradient correctness (finite differences, ops + full stacks)",
       criterion_gradients},
      {2, "dynamics fidelity (Monte-Carlo vs analytic transition laws)",
       criterion_dynamics},
      {3, "counterfactual advantage oracle equivalence", criterion_cf_oracle},
      {4, "factorization of status transitions (1-hop locality)",
       criterion_factorization},
      {5, "O(AN) counterfactual branching", criterion_branch_complexity},
      {6, "learning smoke test vs scripted baselines", criterion_learning_smoke},
      {7, "ablation signal: counterfactual vs shared-GAE advantages",
       criterion_ablation_signal},
      {8, "zero-shot topology/scale generalization", criterion_zero_shot},
      {9, "permutation invariance of critic and actor", criterion_permutation},
      {10, "bitwise determinism of single-threaded training",
       criterion_determinism},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    if (!only.empty() && !only.count(criterion.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    try {
      detail = criterion.run();
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char line[256];
    std::snprintf(line, sizeof line, "criterion %2d [%s] (%.1f s): %s",
                  criterion.id, detail.empty() ? "PASS" : "FAIL", secs,
                  criterion.name.c_str());
    std::cout << line << "\n";
    if (!detail.empty()) {
      std::cout << "    " << detail << "\n";
      ++failures;
    }
    std::cout.flush();
  }
  return failures == 0 ? 0 : 1;
}
