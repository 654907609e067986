#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mgnn/common.hpp"
#include "mgnn/encoder.hpp"
#include "mgnn/event_log.hpp"
#include "mgnn/metrics.hpp"
#include "mgnn/mrig.hpp"

namespace mgnn {

enum class LossKind : std::uint8_t {
  binary_ce,   // -sum_i [y_i log yhat_i + (1 - y_i) log(1 - yhat_i)]
  softmax_ce,  // -log yhat_label
};

std::string_view to_string(LossKind k);
std::optional<LossKind> parse_loss_kind(std::string_view s);

inline constexpr double kLogClamp = 1e-12;

/// Log arguments are clamped below at kLogClamp.
double loss(const ScoreVector& scores, ItemIndex label, LossKind kind = LossKind::binary_ce);

/// dL/ds, consistent with the clamping in loss().
std::vector<double> loss_gradient(const ScoreVector& scores, ItemIndex label, LossKind kind = LossKind::binary_ce);

/// Gradient rows for the embedding rows a batch touched; absent rows are zero.
struct SparseRowGradient {
  std::vector<ItemIndex> rows;  // ascending
  Matrix values;                // rows.size() x d

  std::optional<std::span<const double>> find(ItemIndex row) const;
};

struct GradientSet {
  SparseRowGradient embed;
  std::vector<double> gate;
  Matrix bilinear;

  bool all_finite() const;
  /// Densifies the embedding part into a |V| x d matrix.
  Matrix dense_embed(std::size_t num_items) const;
};

struct BatchGradient {
  double mean_loss = 0.0;
  GradientSet grads;
};

/// Gradient of the mean loss over `examples`, all read from one shared
/// propagation state. Per-example work is split over `threads` contiguous
/// chunks and reduced in chunk order.
BatchGradient batch_gradient(const ModelParams& params, const PropagationState& state,
                             std::span<const TrainingExample> examples, const ModelOptions& options,
                             LossKind kind, std::size_t threads = 1);

/// Gradient of a single example's loss, given its recorded forward pass.
GradientSet backward(const ModelParams& params, const PropagationState& state, const ExampleForward& forward,
                     const TrainingExample& example, const ModelOptions& options, LossKind kind);

/// Mean loss replayed on a fixed sampled computation graph.
double batch_loss(const ModelParams& params, const ComputationGraph& graph, std::span<const TrainingExample> examples,
                  const ModelOptions& options, LossKind kind);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  AdamConfig config;
  Matrix m_embed, v_embed;
  std::vector<double> m_gate, v_gate;
  Matrix m_bilinear, v_bilinear;
  std::uint64_t step = 0;

  static OptimizerState for_params(const ModelParams& params, AdamConfig config = {});
};

/// Bias-corrected Adam. Embedding rows absent from the gradient keep their
/// parameters and moments untouched. Throws on a non-finite gradient before
/// modifying anything.
void adam_step(ModelParams& params, const GradientSet& grads, OptimizerState& opt);

struct TrainConfig {
  std::size_t dim = 64;
  std::size_t batch_size = 64;
  std::size_t depth = 2;
  std::size_t max_len = 3;
  std::size_t fanout = 10;
  double lr = 1e-3;
  std::size_t max_epochs = 30;
  std::size_t patience = 2;
  std::uint64_t seed = 42;
  Ablation ablation = Ablation::none;
  LossKind loss = LossKind::binary_ce;
  ScoreEmbedding score_embed = ScoreEmbedding::raw;
  std::size_t threads = 1;
  std::size_t eval_k = 100;  // cutoff of the early-stopping metric

  ModelOptions model_options() const { return {depth, fanout, ablation, score_embed}; }
  /// Human-readable problems, empty when valid.
  std::vector<std::string> validate() const;

  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
};

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  MetricsReport validation;
  double wall_seconds = 0.0;

  std::string to_json(bool include_wall_time = true) const;
};

struct TrainResult {
  ModelParams params;  // from the best validation epoch
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
};

/// Called after every epoch with the current parameters; return false to stop.
using EpochCallback = std::function<bool(const EpochLog&, const ModelParams&)>;

/// Seeded shuffling, minibatch Adam, and early stopping on validation HR@eval_k:
/// training stops once more than `patience` consecutive epochs fail to improve
/// it. With no validation examples every epoch counts as the best.
TrainResult train(std::span<const TrainingExample> train_examples, std::span<const TrainingExample> validation,
                  const Mrig& graph, const TrainConfig& config, const EpochCallback& on_epoch = {});

}  // namespace mgnn
