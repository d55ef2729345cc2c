// Counterfactual branch construction: the per-timestep cost of building all
// N x |A| one-step branches from a factual outcome. Expected O(N) per
// timestep at fixed |A|.

#include <benchmark/benchmark.h>

#include "stacca/env.hpp"
#include "stacca/graph.hpp"
#include "stacca/rng.hpp"

using namespace stacca;

namespace {

struct BranchFixture {
  Graph graph;
  EnvConfig env;
  GlobalState state;
  std::vector<ActionDelta> actions;
  TransitionNoise noise;
  StepResult factual;

  explicit BranchFixture(int n) {
    GraphSpec spec;
    spec.family = GraphFamily::BarabasiAlbert;
    spec.num_nodes = n;
    spec.ba_m = 1;
    spec.seed = 7;
    graph = generate(spec);
    env = EnvConfig::epidemic_defaults();
    env.num_seeds = std::max(1, n / 10);
    RngStream reset_rng(1, Stream::EnvReset);
    RngStream noise_rng(1, Stream::EnvNoise);
    RngStream act_rng(1, Stream::PolicySample);
    state = reset(env, graph, reset_rng);
    actions.resize(static_cast<size_t>(n));
    for (auto& a : actions) a = static_cast<ActionDelta>(act_rng.next_int(3));
    noise = draw_noise(n, noise_rng);
    factual = step(env, graph, state, actions, noise);
  }
};

}  // namespace

static void BM_CounterfactualConstructionPerTimestep(benchmark::State& state) {
  const BranchFixture fx(static_cast<int>(state.range(0)));
  const int n = fx.graph.num_nodes;
  for (auto _ : state) {
    double sink = 0.0;
    for (int i = 0; i < n; ++i)
      for (int a = 0; a < kNumActions; ++a)
        sink += branch_from(fx.env, fx.state, fx.actions, fx.factual, i,
                            static_cast<ActionDelta>(a))
                    .reward;
    benchmark::DoNotOptimize(sink);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_CounterfactualConstructionPerTimestep)
    ->Arg(10)
    ->Arg(50)
    ->Arg(250)
    ->Arg(1250)
    ->Complexity(benchmark::oN);

static void BM_EnvStep(benchmark::State& state) {
  const BranchFixture fx(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        step(fx.env, fx.graph, fx.state, fx.actions, fx.noise).reward);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_EnvStep)->Arg(10)->Arg(100)->Arg(1000)->Complexity(benchmark::oN);
