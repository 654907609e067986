#include "mgnn/encoder.hpp"

#include <algorithm>
#include <cmath>

namespace mgnn {

namespace {

void sort_unique(std::vector<ItemIndex>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

std::uint32_t position_of(const std::vector<ItemIndex>& layer, ItemIndex v) {
  const auto it = std::lower_bound(layer.begin(), layer.end(), v);
  return static_cast<std::uint32_t>(it - layer.begin());
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void add_mean(const Matrix& prev, std::span<const std::uint32_t> members, std::span<double> out) {
  if (members.empty()) return;
  const double inv = 1.0 / static_cast<double>(members.size());
  for (auto m : members) axpy(inv, prev.row(m), out);
}

}  // namespace

std::string_view to_string(Ablation a) {
  switch (a) {
    case Ablation::none: return "none";
    case Ablation::no_aux_edges: return "no-aux-edges";
    case Ablation::no_aux_seq: return "no-aux-seq";
    case Ablation::no_gating: return "no-gating";
  }
  return "?";
}

std::optional<Ablation> parse_ablation(std::string_view s) {
  if (s == "none") return Ablation::none;
  if (s == "no-aux-edges" || s == "no_aux_edges") return Ablation::no_aux_edges;
  if (s == "no-aux-seq" || s == "no_aux_seq") return Ablation::no_aux_seq;
  if (s == "no-gating" || s == "no_gating") return Ablation::no_gating;
  return std::nullopt;
}

std::string_view to_string(ScoreEmbedding s) { return s == ScoreEmbedding::raw ? "raw" : "propagated"; }

std::optional<ScoreEmbedding> parse_score_embedding(std::string_view s) {
  if (s == "raw") return ScoreEmbedding::raw;
  if (s == "propagated") return ScoreEmbedding::propagated;
  return std::nullopt;
}

ModelParams ModelParams::zeros(std::size_t num_items, std::size_t dim) {
  ModelParams p;
  p.embed = Matrix(num_items, dim);
  p.gate.assign(2 * dim, 0.0);
  p.bilinear = Matrix(dim, dim);
  return p;
}

ModelParams ModelParams::random(std::size_t num_items, std::size_t dim, Rng& rng) {
  if (dim == 0) throw Error("embedding dimension must be positive");
  auto p = zeros(num_items, dim);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (auto& x : p.embed.flat()) x = u(rng);
  for (auto& x : p.gate) x = u(rng);
  for (auto& x : p.bilinear.flat()) x = u(rng);
  return p;
}

bool ModelParams::all_finite() const {
  return mgnn::all_finite(embed.flat()) && mgnn::all_finite(gate) && mgnn::all_finite(bilinear.flat());
}

std::optional<std::uint32_t> ComputationGraph::output_slot(ItemIndex v) const {
  const auto& out = layers.back();
  const auto it = std::lower_bound(out.begin(), out.end(), v);
  if (it == out.end() || *it != v) return std::nullopt;
  return static_cast<std::uint32_t>(it - out.begin());
}

ComputationGraph sample_computation(const Mrig& graph, std::span<const ItemIndex> nodes,
                                    const PropagationConfig& config, Rng& rng) {
  ComputationGraph cg;
  std::vector<ItemIndex> top(nodes.begin(), nodes.end());
  sort_unique(top);
  for (auto v : top)
    if (v >= graph.num_nodes())
      throw Error("node " + std::to_string(v) + " out of range for graph with " +
                  std::to_string(graph.num_nodes()) + " nodes");

  // Built from the output layer downwards, then reversed.
  std::vector<std::vector<ItemIndex>> layers{std::move(top)};
  std::vector<HopLinks> hops;
  std::vector<std::vector<ItemIndex>> sampled;
  for (std::size_t k = config.depth; k >= 1; --k) {
    const auto& cur = layers.back();
    sampled.assign(cur.size() * 4, {});
    std::vector<ItemIndex> prev = cur;
    for (std::size_t i = 0; i < cur.size(); ++i) {
      for (std::size_t g = 0; g < 4; ++g) {
        if (!config.use_aux_edges && g >= 2) continue;
        sampled[i * 4 + g] = sample_neighbors(graph, cur[i], kAllGroups[g], config.fanout, rng);
        prev.insert(prev.end(), sampled[i * 4 + g].begin(), sampled[i * 4 + g].end());
      }
    }
    sort_unique(prev);

    HopLinks hop;
    hop.self.reserve(cur.size());
    hop.group_offsets.reserve(cur.size() * 4 + 1);
    hop.group_offsets.push_back(0);
    for (std::size_t i = 0; i < cur.size(); ++i) {
      hop.self.push_back(position_of(prev, cur[i]));
      for (std::size_t g = 0; g < 4; ++g) {
        for (auto u : sampled[i * 4 + g]) hop.members.push_back(position_of(prev, u));
        hop.group_offsets.push_back(static_cast<std::uint32_t>(hop.members.size()));
      }
    }
    hops.push_back(std::move(hop));
    layers.push_back(std::move(prev));
  }
  std::reverse(layers.begin(), layers.end());
  std::reverse(hops.begin(), hops.end());
  cg.layers = std::move(layers);
  cg.hops = std::move(hops);
  return cg;
}

std::span<const double> PropagationState::output(ItemIndex v) const {
  const auto slot = graph.output_slot(v);
  if (!slot) throw Error("item " + std::to_string(v) + " was not propagated in this batch");
  return h.back().row(*slot);
}

PropagationState propagate(const ModelParams& params, ComputationGraph graph) {
  const std::size_t d = params.dim();
  PropagationState st;
  st.h.reserve(graph.layers.size());

  Matrix h0(graph.layers[0].size(), d);
  for (std::size_t i = 0; i < graph.layers[0].size(); ++i) {
    const auto src = params.embed.row(graph.layers[0][i]);
    std::copy(src.begin(), src.end(), h0.row(i).begin());
  }
  st.h.push_back(std::move(h0));

  for (std::size_t k = 1; k <= graph.depth(); ++k) {
    const auto& hop = graph.hops[k - 1];
    const Matrix& prev = st.h[k - 1];
    Matrix cur(graph.layers[k].size(), d);
    for (std::size_t i = 0; i < graph.layers[k].size(); ++i) {
      auto out = cur.row(i);
      const auto self = prev.row(hop.self[i]);
      std::copy(self.begin(), self.end(), out.begin());
      for (std::size_t g = 0; g < 4; ++g) add_mean(prev, hop.group(i, g), out);
    }
    st.h.push_back(std::move(cur));
  }
  st.graph = std::move(graph);
  return st;
}

PropagationState propagate(const Mrig& graph, const ModelParams& params, std::span<const ItemIndex> nodes,
                           const PropagationConfig& config, Rng& rng) {
  if (graph.num_nodes() != params.num_items())
    throw Error("graph has " + std::to_string(graph.num_nodes()) + " nodes but the model has " +
                std::to_string(params.num_items()) + " items");
  return propagate(params, sample_computation(graph, nodes, config, rng));
}

SessionRepr sequence_repr(const PropagationState& state, std::span<const ItemIndex> target_input,
                          std::span<const ItemIndex> aux_input) {
  if (target_input.empty()) throw Error("sequence_repr: target input is empty");
  const std::size_t d = state.h.back().cols();
  SessionRepr r;
  r.p.assign(d, 0.0);
  r.q.assign(d, 0.0);
  for (auto v : target_input) axpy(1.0, state.output(v), r.p);
  for (auto& x : r.p) x /= static_cast<double>(target_input.size());
  if (!aux_input.empty()) {
    for (auto v : aux_input) axpy(1.0, state.output(v), r.q);
    for (auto& x : r.q) x /= static_cast<double>(aux_input.size());
  }
  return r;
}

FusionMode fusion_mode(Ablation a) {
  switch (a) {
    case Ablation::no_aux_seq: return FusionMode::target_only;
    case Ablation::no_gating: return FusionMode::sum;
    default: return FusionMode::gated;
  }
}

Fusion fuse(const ModelParams& params, std::span<const double> p, std::span<const double> q, FusionMode mode) {
  const std::size_t d = p.size();
  Fusion f;
  f.o.resize(d);
  switch (mode) {
    case FusionMode::gated: {
      const std::span<const double> gate(params.gate);
      const double z = dot(gate.first(d), p) + dot(gate.subspan(d, d), q);
      f.alpha = sigmoid(z);
      for (std::size_t i = 0; i < d; ++i) f.o[i] = f.alpha * p[i] + (1.0 - f.alpha) * q[i];
      break;
    }
    case FusionMode::sum:
      for (std::size_t i = 0; i < d; ++i) f.o[i] = p[i] + q[i];
      break;
    case FusionMode::target_only:
      f.alpha = 1.0;
      std::copy(p.begin(), p.end(), f.o.begin());
      break;
  }
  return f;
}

void softmax(std::span<const double> scores, std::span<double> out) {
  const double mx = *std::max_element(scores.begin(), scores.end());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = std::exp(scores[i] - mx);
  const double z = pairwise_sum(out);
  for (auto& y : out) y /= z;
}

namespace {

// u = W' o, so that s_v = u . x_v.
std::vector<double> project(const ModelParams& params, std::span<const double> o) {
  const std::size_t d = params.dim();
  std::vector<double> u(d, 0.0);
  for (std::size_t a = 0; a < d; ++a) axpy(o[a], params.bilinear.row(a), u);
  return u;
}

}  // namespace

ScoreVector score_all(const ModelParams& params, std::span<const double> o) {
  const auto u = project(params, o);
  ScoreVector sv;
  sv.s.resize(params.num_items());
  for (std::size_t v = 0; v < params.num_items(); ++v) sv.s[v] = dot(u, params.embed.row(v));
  sv.yhat.resize(sv.s.size());
  softmax(sv.s, sv.yhat);
  return sv;
}

ScoreVector score_all(const ModelParams& params, const PropagationState& state, std::span<const double> o) {
  if (state.graph.outputs().size() != params.num_items())
    throw Error("propagated scoring needs every item in the propagation state");
  const auto u = project(params, o);
  const Matrix& g = state.h.back();
  ScoreVector sv;
  sv.s.resize(params.num_items());
  // Outputs cover 0..|V|-1 in order, so slot == item.
  for (std::size_t v = 0; v < params.num_items(); ++v) sv.s[v] = dot(u, g.row(v));
  sv.yhat.resize(sv.s.size());
  softmax(sv.s, sv.yhat);
  return sv;
}

std::vector<ItemIndex> required_nodes(std::span<const TrainingExample> examples, const ModelOptions& options,
                                      std::size_t num_items) {
  std::vector<ItemIndex> nodes;
  if (options.score_embed == ScoreEmbedding::propagated) {
    nodes.resize(num_items);
    for (std::size_t v = 0; v < num_items; ++v) nodes[v] = static_cast<ItemIndex>(v);
    return nodes;
  }
  const bool use_aux = fusion_mode(options.ablation) != FusionMode::target_only;
  for (const auto& ex : examples) {
    nodes.insert(nodes.end(), ex.target_input.begin(), ex.target_input.end());
    if (use_aux) nodes.insert(nodes.end(), ex.aux_input.begin(), ex.aux_input.end());
  }
  sort_unique(nodes);
  return nodes;
}

ExampleForward forward_example(const ModelParams& params, const PropagationState& state,
                               const TrainingExample& example, const ModelOptions& options) {
  const auto mode = fusion_mode(options.ablation);
  ExampleForward fw;
  fw.repr = sequence_repr(state, example.target_input,
                          mode == FusionMode::target_only ? std::span<const ItemIndex>{}
                                                          : std::span<const ItemIndex>(example.aux_input));
  auto fused = fuse(params, fw.repr.p, fw.repr.q, mode);
  fw.repr.alpha = fused.alpha;
  fw.repr.o = std::move(fused.o);
  fw.scores = options.score_embed == ScoreEmbedding::raw ? score_all(params, fw.repr.o)
                                                          : score_all(params, state, fw.repr.o);
  return fw;
}

}  // namespace mgnn
