#pragma once

// Reference implementations used only by tests. Each is written without
// calling the library routine it checks.

#include <algorithm>
#include <array>
#include <cmath>
#include <ctime>
#include <functional>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "mgnn/common.hpp"
#include "mgnn/event_log.hpp"

namespace oracle {

using mgnn::ItemIndex;

// (head, tail, is_target)
using Triple = std::tuple<ItemIndex, ItemIndex, bool>;

/// Set-of-triples graph construction straight from the consecutive-pair rule.
inline std::set<Triple> build_triples(const std::vector<mgnn::Session>& sessions, const mgnn::Vocabulary& vocab) {
  std::set<Triple> edges;
  for (const auto& s : sessions) {
    for (int pass = 0; pass < 2; ++pass) {
      const auto& seq = pass == 0 ? s.target_seq : s.aux_seq;
      std::vector<ItemIndex> ids;
      for (const auto& t : seq)
        if (auto v = vocab.find(t.item)) ids.push_back(*v);
      for (std::size_t i = 1; i < ids.size(); ++i) edges.insert({ids[i - 1], ids[i], pass == 0});
    }
  }
  return edges;
}

/// Group g of node v by scanning the triple set: 0 t+, 1 t-, 2 a+, 3 a-.
inline std::vector<ItemIndex> scan_group(const std::set<Triple>& edges, ItemIndex v, int g) {
  std::vector<ItemIndex> out;
  const bool target = g < 2;
  const bool forward = g % 2 == 0;
  for (const auto& [h, t, is_target] : edges) {
    if (is_target != target) continue;
    if (forward && t == v) out.push_back(h);
    if (!forward && h == v) out.push_back(t);
  }
  std::sort(out.begin(), out.end());
  return out;
}

using Dense = std::vector<std::vector<double>>;

/// Full-graph propagation with dense row-normalized adjacency matrices:
/// H_k = H_{k-1} + sum_g A_g H_{k-1}.
inline Dense dense_propagate(const std::set<Triple>& edges, std::size_t n, const Dense& e, std::size_t depth,
                             bool use_aux = true) {
  const std::size_t d = e.empty() ? 0 : e[0].size();
  std::array<Dense, 4> adj;
  for (int g = 0; g < 4; ++g) {
    adj[g].assign(n, std::vector<double>(n, 0.0));
    if (!use_aux && g >= 2) continue;
    for (std::size_t v = 0; v < n; ++v) {
      const auto members = scan_group(edges, static_cast<ItemIndex>(v), g);
      for (auto u : members) adj[g][v][u] = 1.0 / static_cast<double>(members.size());
    }
  }
  Dense h = e;
  for (std::size_t k = 0; k < depth; ++k) {
    Dense next = h;
    for (int g = 0; g < 4; ++g)
      for (std::size_t v = 0; v < n; ++v)
        for (std::size_t u = 0; u < n; ++u)
          if (adj[g][v][u] != 0.0)
            for (std::size_t c = 0; c < d; ++c) next[v][c] += adj[g][v][u] * h[u][c];
    h = std::move(next);
  }
  return h;
}

/// Metrics for one example from its label's 1-based rank by full sort.
struct PointMetrics {
  double hit, rr, ndcg;
};

inline PointMetrics brute_force_point(const std::vector<double>& scores, ItemIndex label, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t i = 0; i < scores.size(); ++i) order.push_back({-scores[i], i});
  std::sort(order.begin(), order.end());
  std::size_t rank = 0;
  for (std::size_t i = 0; i < order.size(); ++i)
    if (order[i].second == label) rank = i + 1;
  if (rank > k) return {0, 0, 0};
  return {1.0, 1.0 / static_cast<double>(rank), std::log(2.0) / std::log(static_cast<double>(rank) + 1.0)};
}

/// Milliseconds since the epoch via POSIX timegm, for ISO-8601 "YYYY-MM-DDTHH:MM:SS.mmmZ".
inline long long timegm_ms(const std::string& iso) {
  std::tm tm{};
  std::istringstream in(iso.substr(0, 19));
  in >> std::get_time(&tm, "%Y-%m-%dT%H:%M:%S");
  long long ms = 0;
  if (iso.size() > 20 && iso[19] == '.') ms = std::stoll(iso.substr(20, 3));
  return static_cast<long long>(timegm(&tm)) * 1000 + ms;
}

/// Central finite difference of f at x[i].
inline double central_difference(const std::function<double()>& f, double& x, double eps) {
  const double saved = x;
  x = saved + eps;
  const double up = f();
  x = saved - eps;
  const double down = f();
  x = saved;
  return (up - down) / (2.0 * eps);
}

/// Scalar Adam reference trace.
inline std::vector<double> scalar_adam(double w, const std::vector<double>& grads, double lr = 1e-3,
                                       double b1 = 0.9, double b2 = 0.999, double eps = 1e-8) {
  std::vector<double> trace;
  double m = 0, v = 0;
  for (std::size_t t = 1; t <= grads.size(); ++t) {
    const double g = grads[t - 1];
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, static_cast<double>(t)));
    const double vh = v / (1 - std::pow(b2, static_cast<double>(t)));
    w -= lr * mh / (std::sqrt(vh) + eps);
    trace.push_back(w);
  }
  return trace;
}

}  // namespace oracle
