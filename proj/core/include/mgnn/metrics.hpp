#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mgnn/common.hpp"

namespace mgnn {

/// Top-K items by (score desc, index asc) and the 1-based rank of the label
/// when it lies inside the top K.
struct RankingResult {
  std::vector<ItemIndex> items;
  std::vector<double> scores;
  std::optional<std::size_t> label_rank;
};

RankingResult rank_topk(std::span<const double> scores, std::size_t k, std::optional<ItemIndex> label = {});

/// 1-based rank of `label` over all items under the same ordering.
std::size_t full_rank(std::span<const double> scores, ItemIndex label);

struct MetricsReport {
  std::size_t k = 100;
  double hr = 0.0;
  double mrr = 0.0;
  double ndcg = 0.0;
  std::size_t n = 0;
  std::size_t skipped_oov = 0;

  /// {"hr@K":..,"mrr@K":..,"ndcg@K":..,"n":..,"skipped_oov":..}
  std::string to_json() const;
};

/// Means of hit, reciprocal rank and 1/log2(r+1) over the results, using
/// pairwise summation. An empty list yields zeros.
MetricsReport metrics_at_k(std::span<const RankingResult> results, std::size_t k);

}  // namespace mgnn
