// Acceptance suite: one PASS/FAIL/SKIP line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "json.hpp"
#include "mgnn/checkpoint.hpp"
#include "mgnn/dataset.hpp"
#include "mgnn/evaluation.hpp"
#include "mgnn/synthetic.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mgnn;

namespace {

enum class Status { pass, fail, skip };

struct Outcome {
  Status status;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Vocabulary vocab_of(std::size_t n) {
  std::vector<std::string> keys;
  for (std::size_t i = 0; i < n; ++i) keys.push_back("v" + std::to_string(i));
  std::sort(keys.begin(), keys.end());
  return Vocabulary(keys);
}

std::vector<ItemIndex> all_items(std::size_t n) {
  std::vector<ItemIndex> v(n);
  std::iota(v.begin(), v.end(), ItemIndex{0});
  return v;
}

// 1 ------------------------------------------------------------------------

Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  const Ablation ablations[] = {Ablation::none, Ablation::no_aux_edges, Ablation::no_aux_seq, Ablation::no_gating};
  double worst = 0.0;
  std::size_t instances = 0, coords = 0;
  for (std::uint64_t i = 0; i < 24; ++i) {
    const auto loss = i % 2 == 0 ? LossKind::binary_ce : LossKind::softmax_ce;
    const auto embed = i % 3 == 2 ? ScoreEmbedding::propagated : ScoreEmbedding::raw;
    auto inst = gradcheck::make_instance(1000 + i, 20, 8, 2, ablations[i % 4], loss, embed);
    const auto r = gradcheck::check(inst, 1e-5);
    worst = std::max(worst, r.max_rel_error);
    coords += r.coordinates;
    ++instances;
  }
  const double elapsed = seconds_since(t0);
  const bool ok = worst < 1e-4 && elapsed < 60.0;
  return {ok ? Status::pass : Status::fail,
          fmt("max relative error %.3g (< 1e-4) over %zu instances, %zu coordinates, %.1f s (< 60 s)", worst,
              instances, coords, elapsed)};
}

// 2 ------------------------------------------------------------------------

Outcome propagation_oracle() {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> nodes(5, 50), sessions(10, 80);
  double worst = 0.0;
  int graphs = 0;
  for (int trial = 0; trial < 24; ++trial) {
    const std::size_t n = nodes(rng);
    const auto vocab = vocab_of(n);
    const auto ss = testutil::random_sessions(sessions(rng), n, 7, rng);
    const auto g = build_graph(ss, vocab);
    const auto triples = oracle::build_triples(ss, vocab);
    const auto params = ModelParams::random(n, 5, rng);
    oracle::Dense e(n);
    for (std::size_t v = 0; v < n; ++v) e[v].assign(params.embed.row(v).begin(), params.embed.row(v).end());
    const std::size_t depth = static_cast<std::size_t>(trial % 4);
    const bool use_aux = trial % 5 != 4;
    const auto expect = oracle::dense_propagate(triples, n, e, depth, use_aux);
    Rng r(trial);
    const auto state = propagate(g, params, all_items(n), {depth, std::max<std::size_t>(1, g.max_degree()), use_aux}, r);
    for (ItemIndex v = 0; v < n; ++v)
      for (std::size_t c = 0; c < 5; ++c) worst = std::max(worst, std::abs(state.output(v)[c] - expect[v][c]));
    ++graphs;
  }
  return {worst <= 1e-10 ? Status::pass : Status::fail,
          fmt("max coordinate difference %.3g (<= 1e-10) over %d graphs, |V| <= 50, K in 0..3", worst, graphs)};
}

// 3 ------------------------------------------------------------------------

Outcome graph_construction() {
  std::mt19937_64 rng(3);
  const std::size_t n = 40;
  // Extra vocabulary entries never appear in a session.
  auto vocab = vocab_of(n + 5);
  const auto ss = testutil::random_sessions(100, n, 8, rng);
  const auto g = build_graph(ss, vocab);
  const auto triples = oracle::build_triples(ss, vocab);
  std::set<ItemIndex> seen;
  for (const auto& s : ss) {
    for (const auto& t : s.target_seq) seen.insert(*vocab.find(t.item));
    for (const auto& t : s.aux_seq) seen.insert(*vocab.find(t.item));
  }
  std::size_t mismatches = 0;
  if (g.num_nodes() != vocab.size()) ++mismatches;
  for (ItemIndex v = 0; v < vocab.size(); ++v) {
    if (g.present()[v] != (seen.count(v) == 1)) ++mismatches;
    for (int grp = 0; grp < 4; ++grp) {
      const auto row = g.neighbors(v, kAllGroups[grp]);
      if (std::vector<ItemIndex>(row.begin(), row.end()) != oracle::scan_group(triples, v, grp)) ++mismatches;
    }
  }
  std::size_t stored = 0;
  for (auto grp : kAllGroups) stored += g.store(grp).num_edges();
  if (stored != 2 * triples.size()) ++mismatches;
  return {mismatches == 0 ? Status::pass : Status::fail,
          fmt("%zu mismatching rows; %zu triples, %zu nodes (%zu present), 100 sessions", mismatches, triples.size(),
              vocab.size(), seen.size())};
}

// 4 ------------------------------------------------------------------------

Outcome depth_zero_and_isolated() {
  std::mt19937_64 rng(4);
  const std::size_t n = 30;
  const auto vocab = vocab_of(n);
  auto ss = testutil::random_sessions(40, 20, 5, rng);  // items v20..v29 stay isolated
  const auto g = build_graph(ss, vocab);
  const auto params = ModelParams::random(n, 6, rng);
  std::size_t violations = 0, isolated = 0;
  for (std::size_t depth = 0; depth <= 3; ++depth) {
    Rng r(depth);
    const auto state = propagate(g, params, all_items(n), {depth, 10, true}, r);
    for (ItemIndex v = 0; v < n; ++v) {
      bool lonely = true;
      for (auto grp : kAllGroups) lonely &= g.neighbors(v, grp).empty();
      if (depth == 1 && lonely) ++isolated;
      if (depth != 0 && !lonely) continue;
      const auto out = state.output(v);
      if (!std::equal(out.begin(), out.end(), params.embed.row(v).begin())) ++violations;
    }
  }
  return {violations == 0 && isolated >= 10 ? Status::pass : Status::fail,
          fmt("%zu inexact rows; depth 0 over all %zu nodes, %zu isolated nodes at depths 1..3", violations, n,
              isolated)};
}

// 5 ------------------------------------------------------------------------

Outcome overfit() {
  const auto t0 = Clock::now();
  const auto sessions = successor_corpus(200, 50, 6, 7);
  const auto vocab = Vocabulary::from_sessions(sessions);
  const auto graph = build_graph(sessions, vocab);
  const auto examples = make_examples(sessions, vocab, 5).examples;

  TrainConfig cfg;
  cfg.max_len = 5;
  cfg.max_epochs = 200;
  cfg.patience = 200;
  cfg.eval_k = 1;
  std::vector<double> losses;
  double best_hr = 0.0;
  std::size_t reached = 0;
  train(examples, examples, graph, cfg, [&](const EpochLog& e, const ModelParams&) {
    losses.push_back(e.mean_loss);
    best_hr = std::max(best_hr, e.validation.hr);
    if (e.validation.hr >= 0.9 && reached == 0) reached = e.epoch;
    return reached == 0 || losses.size() < 5;
  });
  bool monotone = losses.size() >= 5;
  for (std::size_t i = 1; i < std::min<std::size_t>(5, losses.size()); ++i) monotone &= losses[i] < losses[i - 1];
  const double elapsed = seconds_since(t0);
  const bool ok = reached != 0 && monotone && elapsed < 300.0;
  return {ok ? Status::pass : Status::fail,
          fmt("training HR@1 %.3f reached 0.9 at epoch %zu (limit 200); first 5 losses strictly decreasing: %s; "
              "|V|=%zu, %zu examples, %.1f s (< 300 s)",
              best_hr, reached, monotone ? "yes" : "no", vocab.size(), examples.size(), elapsed)};
}

// 6, 7 -----------------------------------------------------------------------

TrainConfig planted_config(std::uint64_t seed) {
  TrainConfig c;
  c.dim = 32;
  c.lr = 0.01;
  c.max_len = 3;
  c.max_epochs = 100;
  c.patience = 10;
  c.eval_k = 10;
  c.seed = seed;
  return c;
}

std::map<std::string, double> planted_means(const std::function<std::vector<Variant>(const TrainConfig&)>& make) {
  std::map<std::string, double> mean;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto data = PreparedData::from_split(planted_signal_corpus({}, seed));
    for (const auto& row : run_experiment(make(planted_config(seed)), data, 10))
      mean[row.variant] += row.metrics.hr / 5.0;
  }
  return mean;
}

Outcome auxiliary_benefit() {
  const auto t0 = Clock::now();
  const auto m = planted_means([](const TrainConfig& c) { return ablation_variants(c); });
  const bool ok = m.at("full") > m.at("w/o asg") && m.at("full") > m.at("w/o ae");
  return {ok ? Status::pass : Status::fail,
          fmt("mean held-out HR@10 over 5 seeds: full %.3f, w/o asg %.3f, w/o ae %.3f, w/o g %.3f (%.1f s)",
              m.at("full"), m.at("w/o asg"), m.at("w/o ae"), m.at("w/o g"), seconds_since(t0))};
}

Outcome depth_sweep() {
  const auto t0 = Clock::now();
  const std::vector<std::size_t> depths{0, 1};
  const auto m = planted_means([&](const TrainConfig& c) { return depth_variants(c, depths); });
  return {m.at("K=1") > m.at("K=0") ? Status::pass : Status::fail,
          fmt("mean held-out HR@10 over 5 seeds: K=1 %.3f, K=0 %.3f (%.1f s)", m.at("K=1"), m.at("K=0"),
              seconds_since(t0))};
}

// 8 ------------------------------------------------------------------------

Outcome metric_correctness() {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> size(1, 400);
  double worst = 0.0;
  for (std::size_t k : {1u, 10u, 100u}) {
    std::vector<RankingResult> results;
    double hit = 0, rr = 0, ndcg = 0;
    for (int i = 0; i < 200; ++i) {
      std::vector<double> s(size(rng));
      for (auto& x : s) x = std::round(u(rng) * 50) / 50;  // ties exercise the index tie-break
      const auto label = static_cast<ItemIndex>(rng() % s.size());
      results.push_back(rank_topk(s, k, label));
      const auto p = oracle::brute_force_point(s, label, k);
      hit += p.hit;
      rr += p.rr;
      ndcg += p.ndcg;
    }
    const auto m = metrics_at_k(results, k);
    worst = std::max({worst, std::abs(m.hr - hit / 200), std::abs(m.mrr - rr / 200), std::abs(m.ndcg - ndcg / 200)});
  }
  RankingResult third;
  third.label_rank = 3;
  const auto m3 = metrics_at_k(std::vector<RankingResult>{third}, 100);
  const bool exact = m3.hr == 1.0 && m3.mrr == 1.0 / 3.0 && m3.ndcg == 0.5;
  return {worst <= 1e-12 && exact ? Status::pass : Status::fail,
          fmt("max deviation from brute force %.3g (<= 1e-12) on 200 lists x K in {1,10,100}; rank 3 -> "
              "(%.17g, %.17g, %.17g)",
              worst, m3.hr, m3.mrr, m3.ndcg)};
}

// 9 ------------------------------------------------------------------------

struct PipelineReport {
  DatasetStats stats;
  MetricsReport metrics;
  bool in_range = false;
};

PipelineReport run_pipeline(std::vector<Session> sessions, std::size_t max_epochs) {
  PipelineReport out;
  const auto data = PreparedData::from_sessions(std::move(sessions));
  TrainConfig cfg;
  cfg.max_epochs = max_epochs;
  out.stats = compute_stats(data, cfg.max_len);
  const auto tr = data.train_examples(cfg.max_len);
  const auto va = data.validation_examples(cfg.max_len);
  const auto te = data.test_examples(cfg.max_len);
  const auto result = train(tr.examples, va.examples, data.graph, cfg);
  Rng rng(cfg.seed ^ 0x2545F4914F6CDD1DULL);
  out.metrics = evaluate_model(result.params, data.graph, te.examples, cfg.model_options(), 100, rng);
  out.metrics.skipped_oov = te.skipped_oov;
  const auto unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  out.in_range = unit(out.metrics.hr) && unit(out.metrics.mrr) && unit(out.metrics.ndcg);
  return out;
}

std::string describe(const PipelineReport& r) {
  const auto& s = r.stats;
  return fmt("items %zu (reference 52,740), sessions %zu (9,249,729 full dump), target edges %zu (225,879), "
             "auxiliary edges %zu (3,277,411), average length of target %.2f (3.31), average length of auxiliary "
             "%.2f (8.56), examples train/val/test %zu/%zu/%zu (163,005/12,985/25,971); test hr@100 %.4f "
             "mrr@100 %.4f ndcg@100 %.4f",
             s.items, s.sessions, s.target_edges, s.aux_edges, s.avg_target_len, s.avg_aux_len, s.train_examples,
             s.validation_examples, s.test_examples, r.metrics.hr, r.metrics.mrr, r.metrics.ndcg);
}

Outcome yoochoose_pipeline() {
  const char* dir = std::getenv("YOOCHOOSE_DIR");
  const std::filesystem::path root = dir ? dir : "";
  const auto clicks = root / "yoochoose-clicks.dat", buys = root / "yoochoose-buys.dat";
  if (dir && std::filesystem::exists(clicks) && std::filesystem::exists(buys)) {
    const auto t0 = Clock::now();
    auto sessions = recent_fraction(ingest_yoochoose(clicks.string(), buys.string()), 0.01);
    const auto r = run_pipeline(std::move(sessions), 5);
    return {r.in_range ? Status::pass : Status::fail,
            "1% most recent sessions: " + describe(r) + fmt(" (%.0f s)", seconds_since(t0))};
  }
  // Without the dump, exercise the same path on the bundled Yoochoose-format fixture.
  const std::string fixtures = MGNN_FIXTURE_DIR;
  const auto r = run_pipeline(ingest_yoochoose(fixtures + "/yoochoose-clicks.dat", fixtures + "/yoochoose-buys.dat"), 5);
  if (!r.in_range) return {Status::fail, "fixture pipeline produced metrics outside [0,1]: " + describe(r)};
  return {Status::skip,
          "Yoochoose dump not found (set YOOCHOOSE_DIR to the directory holding yoochoose-clicks.dat and "
          "yoochoose-buys.dat); pipeline completed on the bundled fixture instead: " +
              describe(r)};
}

// 10 -----------------------------------------------------------------------

Outcome determinism() {
  const std::string fixtures = MGNN_FIXTURE_DIR;
  const auto data = PreparedData::from_sessions(
      ingest_yoochoose(fixtures + "/yoochoose-clicks.dat", fixtures + "/yoochoose-buys.dat"));
  testutil::TempDir dir("accept");
  std::string bytes[2], metrics[2];
  for (int run = 0; run < 2; ++run) {
    TrainConfig cfg;
    cfg.threads = 1;
    cfg.max_epochs = 6;
    cfg.seed = 77;
    const auto tr = data.train_examples(cfg.max_len);
    const auto va = data.validation_examples(cfg.max_len);
    const auto result = train(tr.examples, va.examples, data.graph, cfg);
    const auto path = dir.file("run" + std::to_string(run) + ".ckpt");
    save_checkpoint(path, {cfg, data.vocab, round_to_float(result.params)});
    const auto loaded = load_checkpoint(path);
    Rng rng(cfg.seed ^ 0x2545F4914F6CDD1DULL);
    const auto te = data.test_examples(cfg.max_len);
    metrics[run] = evaluate_model(loaded.params, data.graph, te.examples, cfg.model_options(), 100, rng).to_json();
    bytes[run] = testutil::read_file(path) + testutil::read_file(path + ".json");
  }
  const bool ok = bytes[0] == bytes[1] && metrics[0] == metrics[1];
  return {ok ? Status::pass : Status::fail,
          fmt("checkpoints %s (%zu bytes), metric JSON %s", bytes[0] == bytes[1] ? "identical" : "DIFFER",
              bytes[0].size(), metrics[0] == metrics[1] ? "identical" : "DIFFER") +
              ": " + metrics[0]};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"gradient correctness", gradient_correctness},
      {"propagation oracle equivalence", propagation_oracle},
      {"graph construction fidelity", graph_construction},
      {"depth-0 identity and isolated-node fixed point", depth_zero_and_isolated},
      {"overfit check", overfit},
      {"auxiliary-signal benefit", auxiliary_benefit},
      {"depth sweep sanity", depth_sweep},
      {"metric correctness", metric_correctness},
      {"end-to-end Yoochoose pipeline", yoochoose_pipeline},
      {"determinism", determinism},
  };
  int failures = 0, index = 0;
  for (const auto& [name, fn] : criteria) {
    ++index;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {Status::fail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.status == Status::pass ? "PASS" : o.status == Status::fail ? "FAIL" : "SKIP";
    failures += o.status == Status::fail;
    std::printf("[%s] %2d %s: %s\n", tag, index, name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
