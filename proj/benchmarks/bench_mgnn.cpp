#include <benchmark/benchmark.h>

#include <map>
#include <numeric>
#include <random>

#include "mgnn/encoder.hpp"
#include "mgnn/metrics.hpp"
#include "mgnn/mrig.hpp"
#include "mgnn/synthetic.hpp"
#include "mgnn/training.hpp"

using namespace mgnn;

namespace {

struct Corpus {
  std::vector<Session> sessions;
  Vocabulary vocab;
  Mrig graph;
  std::vector<TrainingExample> examples;
};

const Corpus& corpus(std::size_t items) {
  static std::map<std::size_t, Corpus> cache;
  auto it = cache.find(items);
  if (it == cache.end()) {
    Corpus c;
    c.sessions = successor_corpus(items * 4, items, 8, 11);
    c.vocab = Vocabulary::from_sessions(c.sessions);
    c.graph = build_graph(c.sessions, c.vocab);
    c.examples = make_examples(c.sessions, c.vocab, 3).examples;
    it = cache.emplace(items, std::move(c)).first;
  }
  return it->second;
}

void BM_BuildGraph(benchmark::State& state) {
  const auto& c = corpus(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(build_graph(c.sessions, c.vocab));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(c.sessions.size()));
}
BENCHMARK(BM_BuildGraph)->Arg(1000)->Arg(10000);

void BM_Propagate(benchmark::State& state) {
  const auto& c = corpus(5000);
  Rng rng(1);
  const auto params = ModelParams::random(c.graph.num_nodes(), 64, rng);
  std::vector<TrainingExample> batch(c.examples.begin(), c.examples.begin() + 64);
  const ModelOptions options{static_cast<std::size_t>(state.range(0)), 10, Ablation::none, ScoreEmbedding::raw};
  const auto nodes = required_nodes(batch, options, c.graph.num_nodes());
  for (auto _ : state) benchmark::DoNotOptimize(propagate(c.graph, params, nodes, options.propagation(), rng));
}
BENCHMARK(BM_Propagate)->Arg(1)->Arg(2)->Arg(3);

void BM_ScoreAll(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const auto params = ModelParams::random(n, 64, rng);
  std::vector<double> o(64, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(score_all(params, o));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_ScoreAll)->Arg(1000)->Arg(50000);

void BM_RankTopK(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u;
  std::vector<double> scores(static_cast<std::size_t>(state.range(0)));
  for (auto& s : scores) s = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(rank_topk(scores, 100, ItemIndex{7}));
}
BENCHMARK(BM_RankTopK)->Arg(1000)->Arg(50000);

void BM_TrainBatch(benchmark::State& state) {
  const auto& c = corpus(static_cast<std::size_t>(state.range(0)));
  Rng rng(4);
  auto params = ModelParams::random(c.graph.num_nodes(), 64, rng);
  auto opt = OptimizerState::for_params(params);
  std::vector<TrainingExample> batch(c.examples.begin(), c.examples.begin() + 64);
  const ModelOptions options;
  const auto nodes = required_nodes(batch, options, c.graph.num_nodes());
  for (auto _ : state) {
    const auto prop = propagate(c.graph, params, nodes, options.propagation(), rng);
    const auto bg = batch_gradient(params, prop, batch, options, LossKind::binary_ce);
    adam_step(params, bg.grads, opt);
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_TrainBatch)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
