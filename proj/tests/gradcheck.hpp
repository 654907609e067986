#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mgnn/encoder.hpp"
#include "mgnn/mrig.hpp"
#include "mgnn/training.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace gradcheck {

/// Coordinates whose gradients are both below this magnitude are compared on
/// an absolute scale of kFloor * tolerance.
inline constexpr double kFloor = 1e-5;

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kFloor});
}

struct Instance {
  mgnn::Mrig graph;
  mgnn::ModelParams params;
  std::vector<mgnn::TrainingExample> examples;
  mgnn::ModelOptions options;
  mgnn::LossKind loss = mgnn::LossKind::binary_ce;
  mgnn::ComputationGraph sample;
};

inline Instance make_instance(std::uint64_t seed, std::size_t num_items, std::size_t dim, std::size_t depth,
                              mgnn::Ablation ablation, mgnn::LossKind loss, mgnn::ScoreEmbedding score_embed,
                              std::size_t fanout = 3) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> keys;
  for (std::size_t i = 0; i < num_items; ++i) keys.push_back("v" + std::to_string(i));
  std::sort(keys.begin(), keys.end());
  const mgnn::Vocabulary vocab(keys);
  const auto sessions = testutil::random_sessions(25, num_items, 6, rng);

  Instance inst;
  inst.graph = mgnn::build_graph(sessions, vocab);
  inst.params = mgnn::ModelParams::random(num_items, dim, rng);
  inst.options = {depth, fanout, ablation, score_embed};
  inst.loss = loss;
  std::uniform_int_distribution<std::size_t> item(0, num_items - 1), len(1, 3), alen(0, 3);
  for (int e = 0; e < 3; ++e) {
    mgnn::TrainingExample ex;
    for (std::size_t i = len(rng); i > 0; --i) ex.target_input.push_back(static_cast<mgnn::ItemIndex>(item(rng)));
    for (std::size_t i = alen(rng); i > 0; --i) ex.aux_input.push_back(static_cast<mgnn::ItemIndex>(item(rng)));
    ex.label = static_cast<mgnn::ItemIndex>(item(rng));
    inst.examples.push_back(ex);
  }
  const auto nodes = mgnn::required_nodes(inst.examples, inst.options, num_items);
  inst.sample = mgnn::sample_computation(inst.graph, nodes, inst.options.propagation(), rng);
  return inst;
}

struct Report {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
};

/// Compares every parameter coordinate of the analytic batch gradient with a
/// central difference of the replayed loss.
inline Report check(Instance& inst, double eps = 1e-5) {
  const auto state = mgnn::propagate(inst.params, inst.sample);
  const auto bg = mgnn::batch_gradient(inst.params, state, inst.examples, inst.options, inst.loss);
  const auto d_embed = bg.grads.dense_embed(inst.params.num_items());
  const auto f = [&] { return mgnn::batch_loss(inst.params, inst.sample, inst.examples, inst.options, inst.loss); };

  Report r;
  auto visit = [&](double& x, double analytic) {
    const double numeric = oracle::central_difference(f, x, eps);
    r.max_rel_error = std::max(r.max_rel_error, relative_error(analytic, numeric));
    ++r.coordinates;
  };
  auto embed = inst.params.embed.flat();
  for (std::size_t i = 0; i < embed.size(); ++i) visit(embed[i], d_embed.flat()[i]);
  for (std::size_t i = 0; i < inst.params.gate.size(); ++i) visit(inst.params.gate[i], bg.grads.gate[i]);
  auto bil = inst.params.bilinear.flat();
  for (std::size_t i = 0; i < bil.size(); ++i) visit(bil[i], bg.grads.bilinear.flat()[i]);
  return r;
}

}  // namespace gradcheck
