#include "mgnn/mrig.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <optional>

#include "binary_io.hpp"

namespace mgnn {

namespace {

constexpr char kMagic[4] = {'M', 'R', 'I', 'G'};

CsrAdjacency make_csr(std::size_t num_nodes, std::vector<std::pair<ItemIndex, ItemIndex>>& pairs) {
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  CsrAdjacency csr;
  csr.offsets.assign(num_nodes + 1, 0);
  csr.neighbors.reserve(pairs.size());
  for (const auto& [row, col] : pairs) {
    ++csr.offsets[row + 1];
    csr.neighbors.push_back(col);
  }
  std::partial_sum(csr.offsets.begin(), csr.offsets.end(), csr.offsets.begin());
  return csr;
}

void check_csr(const CsrAdjacency& csr, std::size_t num_nodes) {
  if (csr.offsets.size() != num_nodes + 1 || csr.offsets.front() != 0 ||
      csr.offsets.back() != csr.neighbors.size())
    throw Error("graph file: inconsistent offsets");
  for (std::size_t v = 0; v < num_nodes; ++v) {
    if (csr.offsets[v] > csr.offsets[v + 1]) throw Error("graph file: offsets not monotone");
    const auto r = csr.row(v);
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (r[i] >= num_nodes) throw Error("graph file: neighbor index out of range");
      if (i > 0 && r[i - 1] >= r[i]) throw Error("graph file: row not strictly ascending");
    }
  }
}

}  // namespace

std::string_view to_string(NeighborGroup g) {
  switch (g) {
    case NeighborGroup::target_fwd: return "t+";
    case NeighborGroup::target_bwd: return "t-";
    case NeighborGroup::aux_fwd: return "a+";
    case NeighborGroup::aux_bwd: return "a-";
  }
  return "?";
}

Mrig Mrig::from_edges(std::size_t num_nodes, std::vector<TypedEdge> edges) {
  std::array<std::vector<std::pair<ItemIndex, ItemIndex>>, 4> rows;
  for (const auto& e : edges) {
    if (e.head >= num_nodes || e.tail >= num_nodes) throw Error("edge endpoint out of range");
    const bool target = e.type == BehaviorType::target;
    // Forward groups are keyed by the tail (it lists predecessors), backward by the head.
    rows[target ? 0 : 2].emplace_back(e.tail, e.head);
    rows[target ? 1 : 3].emplace_back(e.head, e.tail);
  }
  Mrig g;
  g.num_nodes_ = num_nodes;
  for (std::size_t i = 0; i < 4; ++i) g.stores_[i] = make_csr(num_nodes, rows[i]);
  g.present_.assign(num_nodes, false);
  for (const auto& e : edges) g.present_[e.head] = g.present_[e.tail] = true;
  return g;
}

std::size_t Mrig::num_edges(BehaviorType type) const {
  return store(type == BehaviorType::target ? NeighborGroup::target_bwd : NeighborGroup::aux_bwd).num_edges();
}

std::span<const ItemIndex> Mrig::neighbors(ItemIndex node, NeighborGroup group) const {
  if (node >= num_nodes_)
    throw Error("node " + std::to_string(node) + " out of range for graph with " + std::to_string(num_nodes_) +
                " nodes");
  return store(group).row(node);
}

std::size_t Mrig::max_degree() const {
  std::size_t best = 0;
  for (const auto& s : stores_)
    for (std::size_t v = 0; v < num_nodes_; ++v) best = std::max<std::size_t>(best, s.offsets[v + 1] - s.offsets[v]);
  return best;
}

void Mrig::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path, "cannot write");
  out.write(kMagic, 4);
  detail::put_le(out, kMrigFormatVersion);
  detail::put_le(out, static_cast<std::uint64_t>(num_nodes_));
  for (const auto& s : stores_) {
    for (auto o : s.offsets) detail::put_le(out, o);
    for (auto n : s.neighbors) detail::put_le(out, n);
  }
  if (!out) throw IoError(path, "write failed");
}

Mrig Mrig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open");
  char magic[4];
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) throw Error(path + ": not an MRIG file");
  const auto version = detail::get_le<std::uint32_t>(in, "version");
  if (version != kMrigFormatVersion)
    throw Error(path + ": unsupported MRIG version " + std::to_string(version));
  Mrig g;
  g.num_nodes_ = detail::get_le<std::uint64_t>(in, "node count");
  for (auto& s : g.stores_) {
    s.offsets.resize(g.num_nodes_ + 1);
    for (auto& o : s.offsets) o = detail::get_le<std::uint64_t>(in, "offsets");
    if (s.offsets.back() > (std::uint64_t{1} << 40)) throw Error(path + ": implausible edge count");
    s.neighbors.resize(s.offsets.back());
    for (auto& n : s.neighbors) n = detail::get_le<std::uint32_t>(in, "neighbors");
    check_csr(s, g.num_nodes_);
  }
  g.present_.assign(g.num_nodes_, false);
  for (const auto& s : g.stores_)
    for (std::size_t v = 0; v < g.num_nodes_; ++v)
      if (!s.row(v).empty()) g.present_[v] = true;
  return g;
}

Mrig build_graph(std::span<const Session> sessions, const Vocabulary& vocab) {
  std::vector<TypedEdge> edges;
  std::vector<bool> present(vocab.size(), false);
  auto walk = [&](const std::vector<TimedItem>& seq, BehaviorType type) {
    std::optional<ItemIndex> prev;
    for (const auto& t : seq) {
      const auto cur = vocab.find(t.item);
      if (!cur) continue;
      present[*cur] = true;
      if (prev) edges.push_back({*prev, *cur, type});
      prev = cur;
    }
  };
  for (const auto& s : sessions) {
    walk(s.target_seq, BehaviorType::target);
    walk(s.aux_seq, BehaviorType::auxiliary);
  }
  Mrig g = Mrig::from_edges(vocab.size(), std::move(edges));
  g.present_ = std::move(present);
  return g;
}

std::vector<ItemIndex> sample_neighbors(const Mrig& graph, ItemIndex node, NeighborGroup group,
                                        std::size_t fanout, Rng& rng) {
  if (fanout == 0) throw Error("fanout must be at least 1");
  const auto all = graph.neighbors(node, group);
  std::vector<ItemIndex> out(all.begin(), all.end());
  if (out.size() <= fanout) return out;
  // Partial Fisher-Yates: the first `fanout` slots end up a uniform sample.
  for (std::size_t i = 0; i < fanout; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, out.size() - 1);
    std::swap(out[i], out[pick(rng)]);
  }
  out.resize(fanout);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace mgnn
