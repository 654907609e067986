#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mgnn/common.hpp"
#include "mgnn/event_log.hpp"
#include "mgnn/mrig.hpp"

namespace mgnn {

enum class Ablation : std::uint8_t {
  none,
  no_aux_edges,  // propagation ignores the two auxiliary neighbor groups
  no_aux_seq,    // o = p
  no_gating,     // o = p + q
};

std::string_view to_string(Ablation a);
/// Accepts both "no-aux-edges" and "no_aux_edges" spellings.
std::optional<Ablation> parse_ablation(std::string_view s);

/// Which item vectors the bilinear scorer matches against.
enum class ScoreEmbedding : std::uint8_t { raw, propagated };

std::string_view to_string(ScoreEmbedding s);
std::optional<ScoreEmbedding> parse_score_embedding(std::string_view s);

struct ModelParams {
  Matrix embed;               // |V| x d
  std::vector<double> gate;   // 2d
  Matrix bilinear;            // d x d

  std::size_t dim() const noexcept { return embed.cols(); }
  std::size_t num_items() const noexcept { return embed.rows(); }

  static ModelParams zeros(std::size_t num_items, std::size_t dim);
  /// Every entry uniform in [-1/sqrt(d), 1/sqrt(d)].
  static ModelParams random(std::size_t num_items, std::size_t dim, Rng& rng);

  bool all_finite() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct PropagationConfig {
  std::size_t depth = 2;
  std::size_t fanout = 10;
  bool use_aux_edges = true;
};

/// Links of one propagation hop: how each node of layer k reads layer k-1.
struct HopLinks {
  std::vector<std::uint32_t> self;           // position of the node itself in layer k-1
  std::vector<std::uint32_t> group_offsets;  // 4 * |layer k| + 1 ranges into members
  std::vector<std::uint32_t> members;        // positions in layer k-1

  std::span<const std::uint32_t> group(std::size_t node, std::size_t g) const {
    const std::size_t slot = node * 4 + g;
    return {members.data() + group_offsets[slot], members.data() + group_offsets[slot + 1]};
  }
};

/// The sampled neighborhood of a batch. layers[K] holds the requested nodes;
/// layers[k-1] is layers[k] plus every neighbor sampled for it. Each layer is
/// ascending by item index. Replaying it reproduces a forward pass exactly.
struct ComputationGraph {
  std::vector<std::vector<ItemIndex>> layers;
  std::vector<HopLinks> hops;  // hops[k - 1] builds layer k

  std::size_t depth() const noexcept { return hops.size(); }
  const std::vector<ItemIndex>& outputs() const { return layers.back(); }
  std::optional<std::uint32_t> output_slot(ItemIndex v) const;
};

/// Samples at most `fanout` members per group per hop, expanding only what the
/// requested nodes need.
ComputationGraph sample_computation(const Mrig& graph, std::span<const ItemIndex> nodes,
                                    const PropagationConfig& config, Rng& rng);

struct PropagationState {
  ComputationGraph graph;
  std::vector<Matrix> h;  // h[k] has one row per node of layers[k]

  /// g_v = h^K_v. Throws if v was not requested.
  std::span<const double> output(ItemIndex v) const;
};

/// h^0 = e; h^k_v = h^{k-1}_v + sum over the four groups of the group mean of h^{k-1}.
/// An empty group contributes zero.
PropagationState propagate(const ModelParams& params, ComputationGraph graph);
PropagationState propagate(const Mrig& graph, const ModelParams& params, std::span<const ItemIndex> nodes,
                           const PropagationConfig& config, Rng& rng);

struct SessionRepr {
  std::vector<double> p;
  std::vector<double> q;
  double alpha = 0.5;
  std::vector<double> o;
};

/// p, q are position means of g over each input (q = 0 for an empty input).
SessionRepr sequence_repr(const PropagationState& state, std::span<const ItemIndex> target_input,
                          std::span<const ItemIndex> aux_input);

enum class FusionMode : std::uint8_t { gated, sum, target_only };
FusionMode fusion_mode(Ablation a);

struct Fusion {
  double alpha = 0.5;
  std::vector<double> o;
};

/// gated: alpha = sigmoid(gate . [p; q]), o = alpha p + (1 - alpha) q.
/// sum: o = p + q. target_only: o = p (alpha reported as 1).
Fusion fuse(const ModelParams& params, std::span<const double> p, std::span<const double> q,
            FusionMode mode = FusionMode::gated);

struct ScoreVector {
  std::vector<double> s;
  std::vector<double> yhat;
};

void softmax(std::span<const double> scores, std::span<double> out);

/// s_v = o' W e_v over every item, then a max-shifted softmax.
ScoreVector score_all(const ModelParams& params, std::span<const double> o);
/// s_v = o' W g_v; the state must have been propagated for every item.
ScoreVector score_all(const ModelParams& params, const PropagationState& state, std::span<const double> o);

struct ModelOptions {
  std::size_t depth = 2;
  std::size_t fanout = 10;
  Ablation ablation = Ablation::none;
  ScoreEmbedding score_embed = ScoreEmbedding::raw;

  PropagationConfig propagation() const {
    return {depth, fanout, ablation != Ablation::no_aux_edges};
  }
};

/// Sorted union of every item the forward pass of these examples reads.
std::vector<ItemIndex> required_nodes(std::span<const TrainingExample> examples, const ModelOptions& options,
                                      std::size_t num_items);

struct ExampleForward {
  SessionRepr repr;
  ScoreVector scores;
};

ExampleForward forward_example(const ModelParams& params, const PropagationState& state,
                               const TrainingExample& example, const ModelOptions& options);

}  // namespace mgnn
