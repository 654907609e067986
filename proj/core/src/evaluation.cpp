#include "mgnn/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace mgnn {

namespace {

using nlohmann::json;

bool ranks_before(std::span<const double> scores, std::size_t a, std::size_t b) {
  if (scores[a] != scores[b]) return scores[a] > scores[b];
  return a < b;
}

}  // namespace

RankingResult rank_topk(std::span<const double> scores, std::size_t k, std::optional<ItemIndex> label) {
  if (k == 0) throw Error("rank_topk: k must be at least 1");
  const std::size_t n = scores.size();
  const std::size_t take = std::min(k, n);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto cmp = [&](std::size_t a, std::size_t b) { return ranks_before(scores, a, b); };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end(), cmp);

  RankingResult out;
  out.items.reserve(take);
  out.scores.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    out.items.push_back(static_cast<ItemIndex>(idx[i]));
    out.scores.push_back(scores[idx[i]]);
  }
  if (label) {
    if (*label >= n) throw Error("rank_topk: label out of range");
    const auto r = full_rank(scores, *label);
    if (r <= take) out.label_rank = r;
  }
  return out;
}

std::size_t full_rank(std::span<const double> scores, ItemIndex label) {
  std::size_t ahead = 0;
  for (std::size_t v = 0; v < scores.size(); ++v)
    if (v != label && ranks_before(scores, v, label)) ++ahead;
  return ahead + 1;
}

std::string MetricsReport::to_json() const {
  const auto ks = std::to_string(k);
  json j;
  j["hr@" + ks] = hr;
  j["mrr@" + ks] = mrr;
  j["ndcg@" + ks] = ndcg;
  j["n"] = n;
  j["skipped_oov"] = skipped_oov;
  // Keep the documented key order rather than json's alphabetical order.
  std::ostringstream out;
  out << "{\"hr@" << ks << "\":" << j["hr@" + ks].dump() << ",\"mrr@" << ks << "\":" << j["mrr@" + ks].dump()
      << ",\"ndcg@" << ks << "\":" << j["ndcg@" + ks].dump() << ",\"n\":" << n << ",\"skipped_oov\":" << skipped_oov
      << "}";
  return out.str();
}

MetricsReport metrics_at_k(std::span<const RankingResult> results, std::size_t k) {
  MetricsReport m;
  m.k = k;
  m.n = results.size();
  if (results.empty()) return m;
  std::vector<double> hit(results.size()), rr(results.size()), gain(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i].label_rank;
    if (r && *r <= k) {
      hit[i] = 1.0;
      rr[i] = 1.0 / static_cast<double>(*r);
      gain[i] = 1.0 / std::log2(static_cast<double>(*r) + 1.0);
    }
  }
  const double n = static_cast<double>(results.size());
  m.hr = pairwise_sum(hit) / n;
  m.mrr = pairwise_sum(rr) / n;
  m.ndcg = pairwise_sum(gain) / n;
  return m;
}

PopRanker::PopRanker(std::span<const TrainingExample> train, std::size_t num_items) : counts_(num_items, 0.0) {
  for (const auto& ex : train) {
    if (ex.label >= num_items) throw Error("PopRanker: label out of range");
    counts_[ex.label] += 1.0;
  }
}

std::vector<double> PopRanker::scores(const TrainingExample&) const { return counts_; }

ItemKnnRanker::ItemKnnRanker(std::span<const Session> train, const Vocabulary& vocab)
    : num_items_(vocab.size()), rows_(vocab.size()) {
  std::vector<double> item_count(num_items_, 0.0);
  std::map<std::pair<ItemIndex, ItemIndex>, double> pair_count;
  std::vector<ItemIndex> items;
  for (const auto& s : train) {
    items.clear();
    for (const auto& t : s.target_seq)
      if (const auto v = vocab.find(t.item)) items.push_back(*v);
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    for (std::size_t a = 0; a < items.size(); ++a) {
      item_count[items[a]] += 1.0;
      for (std::size_t b = a + 1; b < items.size(); ++b) pair_count[{items[a], items[b]}] += 1.0;
    }
  }
  for (const auto& [key, c] : pair_count) {
    const double sim = c / std::sqrt(item_count[key.first] * item_count[key.second]);
    rows_[key.first].push_back({key.second, sim});
    rows_[key.second].push_back({key.first, sim});
  }
  for (auto& row : rows_)
    std::sort(row.begin(), row.end(), [](const Neighbor& a, const Neighbor& b) { return a.item < b.item; });
}

double ItemKnnRanker::similarity(ItemIndex a, ItemIndex b) const {
  if (a >= num_items_ || b >= num_items_) throw Error("ItemKnnRanker: item out of range");
  if (a == b) return 0.0;
  const auto& row = rows_[a];
  const auto it = std::lower_bound(row.begin(), row.end(), b,
                                   [](const Neighbor& n, ItemIndex v) { return n.item < v; });
  return it != row.end() && it->item == b ? it->sim : 0.0;
}

std::vector<double> ItemKnnRanker::scores(const TrainingExample& example) const {
  std::vector<double> s(num_items_, 0.0);
  for (auto u : example.target_input)
    for (const auto& nb : rows_.at(u)) s[nb.item] += nb.sim;
  return s;
}

MetricsReport evaluate_ranker(const Ranker& ranker, std::span<const TrainingExample> examples, std::size_t k) {
  std::vector<RankingResult> results;
  results.reserve(examples.size());
  for (const auto& ex : examples) results.push_back(rank_topk(ranker.scores(ex), k, ex.label));
  return metrics_at_k(results, k);
}

std::vector<RankingResult> rank_with_model(const ModelParams& params, const Mrig& graph,
                                           std::span<const TrainingExample> examples, const ModelOptions& options,
                                           std::size_t k, Rng& rng, std::size_t batch_size, std::size_t threads) {
  if (batch_size == 0) throw Error("batch size must be positive");
  std::vector<RankingResult> results(examples.size());
  const auto prop = options.propagation();
  for (std::size_t start = 0; start < examples.size(); start += batch_size) {
    const auto batch = examples.subspan(start, std::min(batch_size, examples.size() - start));
    const auto nodes = required_nodes(batch, options, graph.num_nodes());
    const auto state = propagate(graph, params, nodes, prop, rng);
    auto work = [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        const auto fw = forward_example(params, state, batch[i], options);
        results[start + i] = rank_topk(fw.scores.s, k, batch[i].label);
      }
    };
    const std::size_t workers = std::clamp<std::size_t>(threads, 1, batch.size());
    if (workers == 1) {
      work(0, batch.size());
    } else {
      const std::size_t chunk = (batch.size() + workers - 1) / workers;
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t b = std::min(batch.size(), w * chunk);
        pool.emplace_back(work, b, std::min(batch.size(), b + chunk));
      }
    }
  }
  return results;
}

MetricsReport evaluate_model(const ModelParams& params, const Mrig& graph, std::span<const TrainingExample> examples,
                             const ModelOptions& options, std::size_t k, Rng& rng, std::size_t batch_size,
                             std::size_t threads) {
  const auto results = rank_with_model(params, graph, examples, options, k, rng, batch_size, threads);
  return metrics_at_k(results, k);
}

std::vector<Variant> ablation_variants(const TrainConfig& base) {
  std::vector<Variant> out;
  const std::pair<const char*, Ablation> table[] = {{"full", Ablation::none},
                                                    {"w/o ae", Ablation::no_aux_edges},
                                                    {"w/o asg", Ablation::no_aux_seq},
                                                    {"w/o g", Ablation::no_gating}};
  for (const auto& [name, ab] : table) {
    Variant v{name, base};
    v.config.ablation = ab;
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<Variant> depth_variants(const TrainConfig& base, std::span<const std::size_t> depths) {
  std::vector<Variant> out;
  for (auto k : depths) {
    Variant v{"K=" + std::to_string(k), base};
    v.config.depth = k;
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<Variant> length_variants(const TrainConfig& base, std::span<const std::size_t> lengths) {
  std::vector<Variant> out;
  for (auto l : lengths) {
    Variant v{"L=" + std::to_string(l), base};
    v.config.max_len = l;
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<ExperimentRow> run_experiment(std::span<const Variant> variants, const PreparedData& data, std::size_t k) {
  std::map<std::size_t, std::array<ExampleSet, 3>> cache;
  std::vector<ExperimentRow> rows;
  for (const auto& v : variants) {
    auto it = cache.find(v.config.max_len);
    if (it == cache.end()) {
      const auto L = v.config.max_len;
      it = cache.emplace(L, std::array<ExampleSet, 3>{data.train_examples(L), data.validation_examples(L),
                                                      data.test_examples(L)})
               .first;
    }
    const auto& [tr, va, te] = it->second;
    const auto trained = train(tr.examples, va.examples, data.graph, v.config);
    Rng eval_rng(v.config.seed ^ 0x2545F4914F6CDD1DULL);
    auto report = evaluate_model(trained.params, data.graph, te.examples, v.config.model_options(), k, eval_rng,
                                 v.config.batch_size, v.config.threads);
    report.skipped_oov = te.skipped_oov;
    rows.push_back({v.name, report});
  }
  return rows;
}

std::string experiment_csv(std::span<const ExperimentRow> rows) {
  std::ostringstream out;
  out.precision(17);
  out << "variant,hr,mrr,ndcg\n";
  for (const auto& r : rows) out << r.variant << ',' << r.metrics.hr << ',' << r.metrics.mrr << ',' << r.metrics.ndcg << '\n';
  return out.str();
}

std::string experiment_json(std::span<const ExperimentRow> rows) {
  json arr = json::array();
  for (const auto& r : rows) arr.push_back({{"variant", r.variant}, {"metrics", json::parse(r.metrics.to_json())}});
  return arr.dump(2);
}

}  // namespace mgnn
