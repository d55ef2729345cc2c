// Forward-pass costs for the two networks: batched critic evaluation (the
// counterfactual-value workhorse) and single-observation actor inference.

#include <benchmark/benchmark.h>

#include "stacca/env.hpp"
#include "stacca/graph.hpp"
#include "stacca/models.hpp"
#include "stacca/rng.hpp"
#include "stacca/tensor.hpp"

using namespace stacca;

namespace {

struct ModelFixture {
  Graph graph;
  EnvConfig env;
  GlobalState state;
  PolicyModel policy;
  ValueModel critic;
  ObsBuilder* obs;

  explicit ModelFixture(int n) {
    GraphSpec spec;
    spec.family = GraphFamily::BarabasiAlbert;
    spec.num_nodes = n;
    spec.ba_m = 1;
    spec.seed = 3;
    graph = generate(spec);
    env = EnvConfig::epidemic_defaults();
    env.num_seeds = std::max(1, n / 10);
    RngStream init(1, Stream::ParamInit);
    ModelConfig cfg;  // library defaults
    policy = make_policy_model(cfg, init);
    critic = make_value_model(cfg, init);
    RngStream reset_rng(2, Stream::EnvReset);
    state = reset(env, graph, reset_rng);
    obs = new ObsBuilder(env, graph);
  }
  ~ModelFixture() { delete obs; }
};

}  // namespace

static void BM_CriticForwardBatched(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  ModelFixture fx(10);
  const int row = fx.graph.num_nodes * kCriticFeatures;
  std::vector<double> feats(static_cast<size_t>(batch) * row);
  for (int b = 0; b < batch; ++b)
    fx.obs->fill_critic_features(fx.state, feats.data() + static_cast<std::ptrdiff_t>(b) * row);
  for (auto _ : state) {
    ad::Tape tape(/*recording=*/false);
    const ad::Tensor f =
        tape.constant({batch, fx.graph.num_nodes, kCriticFeatures}, feats);
    benchmark::DoNotOptimize(
        critic_forward_batch(tape, fx.critic, fx.graph, f).data()[0]);
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_CriticForwardBatched)->Arg(1)->Arg(32)->Arg(512);

static void BM_ActorForwardSingle(benchmark::State& state) {
  ModelFixture fx(static_cast<int>(state.range(0)));
  const auto observation = fx.obs->observe(fx.state, 0);
  for (auto _ : state)
    benchmark::DoNotOptimize(actor_forward(fx.policy, observation)[0]);
}
BENCHMARK(BM_ActorForwardSingle)->Arg(10)->Arg(100)->Arg(1000);

static void BM_ActorUpdateEpochShapedBatch(benchmark::State& state) {
  // one agent's epoch-shaped batch: B observations on a fixed subgraph
  const int batch = static_cast<int>(state.range(0));
  ModelFixture fx(10);
  const auto& sub = fx.obs->subgraph(0);
  const int n = sub.graph.num_nodes;
  std::vector<double> feats(static_cast<size_t>(batch) * n * kObsFeatures);
  for (int b = 0; b < batch; ++b)
    fx.obs->fill_obs_features(fx.state, 0,
                              feats.data() + static_cast<std::ptrdiff_t>(b) * n * kObsFeatures);
  for (auto _ : state) {
    ad::Tape tape;
    const ad::Tensor f = tape.constant({batch, n, kObsFeatures}, feats);
    const ad::Tensor logp =
        actor_forward_batch(tape, fx.policy, sub.graph, sub.ego_local, f);
    const ad::Tensor loss = tape.mean_all(logp);
    tape.backward(loss);
    benchmark::DoNotOptimize(loss.scalar());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_ActorUpdateEpochShapedBatch)->Arg(64)->Arg(400);
