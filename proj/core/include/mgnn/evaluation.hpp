#pragma once

#include <span>
#include <string>
#include <vector>

#include "mgnn/common.hpp"
#include "mgnn/dataset.hpp"
#include "mgnn/encoder.hpp"
#include "mgnn/event_log.hpp"
#include "mgnn/metrics.hpp"
#include "mgnn/mrig.hpp"
#include "mgnn/training.hpp"

namespace mgnn {

/// Scores every item for one query.
class Ranker {
 public:
  virtual ~Ranker() = default;
  virtual std::vector<double> scores(const TrainingExample& example) const = 0;
};

/// Label frequency over the training examples; identical list for every query.
class PopRanker final : public Ranker {
 public:
  PopRanker(std::span<const TrainingExample> train, std::size_t num_items);
  std::vector<double> scores(const TrainingExample&) const override;
  const std::vector<double>& counts() const noexcept { return counts_; }

 private:
  std::vector<double> counts_;
};

/// Cosine over session co-occurrence of target items:
///   sim(i, j) = c(i, j) / sqrt(c(i) c(j)),  i != j,
/// where c counts training sessions whose target stream contains the items.
/// A candidate scores the sum of its similarity to every target input position.
class ItemKnnRanker final : public Ranker {
 public:
  ItemKnnRanker(std::span<const Session> train, const Vocabulary& vocab);
  std::vector<double> scores(const TrainingExample& example) const override;
  double similarity(ItemIndex a, ItemIndex b) const;

 private:
  struct Neighbor {
    ItemIndex item;
    double sim;
  };
  std::size_t num_items_ = 0;
  std::vector<std::vector<Neighbor>> rows_;
};

MetricsReport evaluate_ranker(const Ranker& ranker, std::span<const TrainingExample> examples, std::size_t k);

/// Batched forward passes (fresh neighbor sample per batch drawn from rng),
/// then the label's rank in each example's full-catalog ranking.
std::vector<RankingResult> rank_with_model(const ModelParams& params, const Mrig& graph,
                                           std::span<const TrainingExample> examples, const ModelOptions& options,
                                           std::size_t k, Rng& rng, std::size_t batch_size = 64,
                                           std::size_t threads = 1);

MetricsReport evaluate_model(const ModelParams& params, const Mrig& graph, std::span<const TrainingExample> examples,
                             const ModelOptions& options, std::size_t k, Rng& rng, std::size_t batch_size = 64,
                             std::size_t threads = 1);

struct Variant {
  std::string name;
  TrainConfig config;
};

struct ExperimentRow {
  std::string variant;
  MetricsReport metrics;
};

/// The four ablation settings ("full", "w/o ae", "w/o asg", "w/o g").
std::vector<Variant> ablation_variants(const TrainConfig& base);
std::vector<Variant> depth_variants(const TrainConfig& base, std::span<const std::size_t> depths);
std::vector<Variant> length_variants(const TrainConfig& base, std::span<const std::size_t> lengths);

/// Trains each variant on data's training split (examples rebuilt at the
/// variant's max_len) with validation early stopping and reports test metrics.
std::vector<ExperimentRow> run_experiment(std::span<const Variant> variants, const PreparedData& data, std::size_t k);

/// Header "variant,hr,mrr,ndcg".
std::string experiment_csv(std::span<const ExperimentRow> rows);
std::string experiment_json(std::span<const ExperimentRow> rows);

}  // namespace mgnn
