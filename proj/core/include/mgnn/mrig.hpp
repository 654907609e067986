#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mgnn/common.hpp"
#include "mgnn/event_log.hpp"

namespace mgnn {

/// The four typed neighbor groups of a node.
///   target_fwd: heads u of target edges (u, v)   -- predecessors, "t+"
///   target_bwd: tails w of target edges (v, w)   -- successors,   "t-"
///   aux_fwd / aux_bwd: the same for auxiliary edges ("a+", "a-")
enum class NeighborGroup : std::uint8_t { target_fwd = 0, target_bwd = 1, aux_fwd = 2, aux_bwd = 3 };

inline constexpr std::array<NeighborGroup, 4> kAllGroups = {
    NeighborGroup::target_fwd, NeighborGroup::target_bwd, NeighborGroup::aux_fwd, NeighborGroup::aux_bwd};

std::string_view to_string(NeighborGroup g);

/// Compressed row adjacency: offsets has num_nodes + 1 entries.
struct CsrAdjacency {
  std::vector<std::uint64_t> offsets;
  std::vector<ItemIndex> neighbors;

  std::span<const ItemIndex> row(std::size_t node) const {
    return {neighbors.data() + offsets[node], neighbors.data() + offsets[node + 1]};
  }
  std::size_t num_edges() const noexcept { return neighbors.size(); }

  friend bool operator==(const CsrAdjacency&, const CsrAdjacency&) = default;
};

/// A directed edge (head, tail) of one behavior type, in dense indices.
struct TypedEdge {
  ItemIndex head;
  ItemIndex tail;
  BehaviorType type;

  friend auto operator<=>(const TypedEdge&, const TypedEdge&) = default;
};

/// Multi-relational item graph. Immutable once built; rows are sorted and
/// deduplicated, and each backward store is the transpose of its forward store.
class Mrig {
 public:
  Mrig() = default;

  /// Edge-set semantics: duplicate triples collapse.
  static Mrig from_edges(std::size_t num_nodes, std::vector<TypedEdge> edges);

  std::size_t num_nodes() const noexcept { return num_nodes_; }
  std::size_t num_edges(BehaviorType type) const;

  std::span<const ItemIndex> neighbors(ItemIndex node, NeighborGroup group) const;
  const CsrAdjacency& store(NeighborGroup group) const { return stores_[static_cast<std::size_t>(group)]; }

  /// Largest group size over all nodes and groups.
  std::size_t max_degree() const;

  /// Items that appear in at least one sequence used to build the graph.
  const std::vector<bool>& present() const noexcept { return present_; }

  /// "MRIG", u32 version, u64 |V|, then four (offsets u64 x (|V|+1), neighbors u32 x m) stores, little-endian.
  void save(const std::string& path) const;
  static Mrig load(const std::string& path);

  friend bool operator==(const Mrig& a, const Mrig& b) {
    return a.num_nodes_ == b.num_nodes_ && a.stores_ == b.stores_;
  }

 private:
  std::size_t num_nodes_ = 0;
  std::array<CsrAdjacency, 4> stores_;
  std::vector<bool> present_;

  friend Mrig build_graph(std::span<const Session>, const Vocabulary&);
};

inline constexpr std::uint32_t kMrigFormatVersion = 1;

/// Adds an edge for every consecutive pair inside each behavior stream.
/// Items missing from the vocabulary are skipped; pairs are formed over the
/// remaining in-vocabulary items of the stream.
Mrig build_graph(std::span<const Session> sessions, const Vocabulary& vocab);

/// Uniform sample without replacement of at most `fanout` members, ascending.
/// Returns the whole group when it has at most `fanout` members.
std::vector<ItemIndex> sample_neighbors(const Mrig& graph, ItemIndex node, NeighborGroup group,
                                        std::size_t fanout, Rng& rng);

}  // namespace mgnn
