#include "mgnn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

#include "json.hpp"
#include "mgnn/evaluation.hpp"

namespace mgnn {

namespace {

using nlohmann::json;

// Per-thread gradient accumulator. d_embed collects the raw-scoring path over
// all items; d_out collects gradients w.r.t. the propagated outputs g.
struct Accumulator {
  Matrix d_embed;
  Matrix d_out;
  std::vector<double> d_gate;
  Matrix d_bilinear;
  double loss_sum = 0.0;

  Accumulator(const ModelParams& params, const PropagationState& state, const ModelOptions& options)
      : d_out(state.h.back().rows(), params.dim()),
        d_gate(2 * params.dim(), 0.0),
        d_bilinear(params.dim(), params.dim()) {
    if (options.score_embed == ScoreEmbedding::raw) d_embed = Matrix(params.num_items(), params.dim());
  }

  void add(const Accumulator& other) {
    axpy(1.0, other.d_embed.flat(), d_embed.flat());
    axpy(1.0, other.d_out.flat(), d_out.flat());
    axpy(1.0, other.d_gate, d_gate);
    axpy(1.0, other.d_bilinear.flat(), d_bilinear.flat());
    loss_sum += other.loss_sum;
  }
};

void accumulate_example(const ModelParams& params, const PropagationState& state, const ExampleForward& fw,
                        const TrainingExample& ex, const ModelOptions& options, LossKind kind, double weight,
                        Accumulator& acc) {
  const std::size_t d = params.dim();
  const std::size_t n = params.num_items();
  acc.loss_sum += weight * loss(fw.scores, ex.label, kind);
  auto ds = loss_gradient(fw.scores, ex.label, kind);
  for (auto& x : ds) x *= weight;

  const auto& o = fw.repr.o;
  std::vector<double> u(d, 0.0);  // W' o
  for (std::size_t a = 0; a < d; ++a) axpy(o[a], params.bilinear.row(a), u);

  // s_v = u . x_v, x = e (raw) or g (propagated); r = sum_v ds_v x_v.
  std::vector<double> r(d, 0.0);
  if (options.score_embed == ScoreEmbedding::raw) {
    for (std::size_t v = 0; v < n; ++v) {
      if (ds[v] == 0.0) continue;
      axpy(ds[v], params.embed.row(v), r);
      axpy(ds[v], u, acc.d_embed.row(v));
    }
  } else {
    const Matrix& g = state.h.back();
    for (std::size_t v = 0; v < n; ++v) {
      if (ds[v] == 0.0) continue;
      axpy(ds[v], g.row(v), r);
      axpy(ds[v], u, acc.d_out.row(v));
    }
  }

  std::vector<double> d_o(d);
  for (std::size_t a = 0; a < d; ++a) {
    axpy(o[a], r, acc.d_bilinear.row(a));
    d_o[a] = dot(params.bilinear.row(a), r);
  }

  const auto& p = fw.repr.p;
  const auto& q = fw.repr.q;
  std::vector<double> dp(d, 0.0), dq(d, 0.0);
  switch (fusion_mode(options.ablation)) {
    case FusionMode::gated: {
      const double alpha = fw.repr.alpha;
      double d_alpha = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        dp[i] = alpha * d_o[i];
        dq[i] = (1.0 - alpha) * d_o[i];
        d_alpha += d_o[i] * (p[i] - q[i]);
      }
      const double dz = d_alpha * alpha * (1.0 - alpha);
      for (std::size_t i = 0; i < d; ++i) {
        acc.d_gate[i] += dz * p[i];
        acc.d_gate[d + i] += dz * q[i];
        dp[i] += dz * params.gate[i];
        dq[i] += dz * params.gate[d + i];
      }
      break;
    }
    case FusionMode::sum:
      dp = d_o;
      dq = d_o;
      break;
    case FusionMode::target_only:
      dp = d_o;
      break;
  }

  const auto scatter_mean = [&](std::span<const ItemIndex> items, std::span<const double> grad) {
    if (items.empty()) return;
    const double inv = 1.0 / static_cast<double>(items.size());
    for (auto v : items) axpy(inv, grad, acc.d_out.row(*state.graph.output_slot(v)));
  };
  scatter_mean(ex.target_input, dp);
  if (fusion_mode(options.ablation) != FusionMode::target_only) scatter_mean(ex.aux_input, dq);
}

// Transposes the propagation hops and assembles the sparse embedding gradient.
GradientSet finish(const ModelParams& params, const PropagationState& state, Accumulator&& acc) {
  const std::size_t d = params.dim();
  const auto& cg = state.graph;
  Matrix upper = std::move(acc.d_out);
  for (std::size_t k = cg.depth(); k >= 1; --k) {
    const auto& hop = cg.hops[k - 1];
    Matrix lower(cg.layers[k - 1].size(), d);
    for (std::size_t i = 0; i < cg.layers[k].size(); ++i) {
      const auto gi = upper.row(i);
      axpy(1.0, gi, lower.row(hop.self[i]));
      for (std::size_t g = 0; g < 4; ++g) {
        const auto members = hop.group(i, g);
        if (members.empty()) continue;
        const double inv = 1.0 / static_cast<double>(members.size());
        for (auto m : members) axpy(inv, gi, lower.row(m));
      }
    }
    upper = std::move(lower);
  }

  GradientSet out;
  out.gate = std::move(acc.d_gate);
  out.bilinear = std::move(acc.d_bilinear);
  const auto& base = cg.layers[0];
  if (acc.d_embed.rows() == params.num_items()) {
    for (std::size_t i = 0; i < base.size(); ++i) axpy(1.0, upper.row(i), acc.d_embed.row(base[i]));
    out.embed.rows.resize(params.num_items());
    std::iota(out.embed.rows.begin(), out.embed.rows.end(), ItemIndex{0});
    out.embed.values = std::move(acc.d_embed);
  } else {
    out.embed.rows = base;
    out.embed.values = std::move(upper);
  }
  return out;
}

}  // namespace

std::string_view to_string(LossKind k) { return k == LossKind::binary_ce ? "eq10" : "softmax-ce"; }

std::optional<LossKind> parse_loss_kind(std::string_view s) {
  if (s == "eq10") return LossKind::binary_ce;
  if (s == "softmax-ce" || s == "softmax_ce") return LossKind::softmax_ce;
  return std::nullopt;
}

double loss(const ScoreVector& scores, ItemIndex label, LossKind kind) {
  const auto& y = scores.yhat;
  if (label >= y.size()) throw Error("label out of range");
  double total = -std::log(std::max(y[label], kLogClamp));
  if (kind == LossKind::binary_ce) {
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (i == label) continue;
      const double rest = 1.0 - y[i];
      total -= rest < kLogClamp ? std::log(kLogClamp) : std::log1p(-y[i]);
    }
  }
  return total;
}

std::vector<double> loss_gradient(const ScoreVector& scores, ItemIndex label, LossKind kind) {
  const auto& y = scores.yhat;
  if (label >= y.size()) throw Error("label out of range");
  // a_j = yhat_j * dL/dyhat_j; then dL/ds_j = a_j - yhat_j * sum_i a_i.
  std::vector<double> a(y.size(), 0.0);
  a[label] = y[label] < kLogClamp ? 0.0 : -1.0;
  if (kind == LossKind::binary_ce) {
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (i == label) continue;
      const double rest = 1.0 - y[i];
      a[i] = rest < kLogClamp ? 0.0 : y[i] / rest;
    }
  }
  const double c = pairwise_sum(a);
  std::vector<double> ds(y.size());
  for (std::size_t j = 0; j < y.size(); ++j) ds[j] = a[j] - y[j] * c;
  return ds;
}

std::optional<std::span<const double>> SparseRowGradient::find(ItemIndex row) const {
  const auto it = std::lower_bound(rows.begin(), rows.end(), row);
  if (it == rows.end() || *it != row) return std::nullopt;
  return values.row(static_cast<std::size_t>(it - rows.begin()));
}

bool GradientSet::all_finite() const {
  return mgnn::all_finite(embed.values.flat()) && mgnn::all_finite(gate) && mgnn::all_finite(bilinear.flat());
}

Matrix GradientSet::dense_embed(std::size_t num_items) const {
  Matrix out(num_items, embed.values.cols());
  for (std::size_t i = 0; i < embed.rows.size(); ++i) {
    const auto src = embed.values.row(i);
    std::copy(src.begin(), src.end(), out.row(embed.rows[i]).begin());
  }
  return out;
}

BatchGradient batch_gradient(const ModelParams& params, const PropagationState& state,
                             std::span<const TrainingExample> examples, const ModelOptions& options,
                             LossKind kind, std::size_t threads) {
  if (examples.empty()) throw Error("batch_gradient: empty batch");
  const double weight = 1.0 / static_cast<double>(examples.size());
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, examples.size());

  auto run_chunk = [&](std::size_t begin, std::size_t end, Accumulator& acc) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto fw = forward_example(params, state, examples[i], options);
      accumulate_example(params, state, fw, examples[i], options, kind, weight, acc);
    }
  };

  std::vector<Accumulator> accs;
  accs.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) accs.emplace_back(params, state, options);
  const std::size_t chunk = (examples.size() + workers - 1) / workers;
  if (workers == 1) {
    run_chunk(0, examples.size(), accs[0]);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t b = std::min(examples.size(), w * chunk);
      const std::size_t e = std::min(examples.size(), b + chunk);
      pool.emplace_back([&, b, e, w] { run_chunk(b, e, accs[w]); });
    }
  }
  for (std::size_t w = 1; w < workers; ++w) accs[0].add(accs[w]);

  BatchGradient out;
  out.mean_loss = accs[0].loss_sum;
  out.grads = finish(params, state, std::move(accs[0]));
  return out;
}

GradientSet backward(const ModelParams& params, const PropagationState& state, const ExampleForward& forward,
                     const TrainingExample& example, const ModelOptions& options, LossKind kind) {
  Accumulator acc(params, state, options);
  accumulate_example(params, state, forward, example, options, kind, 1.0, acc);
  return finish(params, state, std::move(acc));
}

double batch_loss(const ModelParams& params, const ComputationGraph& graph, std::span<const TrainingExample> examples,
                  const ModelOptions& options, LossKind kind) {
  const auto state = propagate(params, graph);
  double total = 0.0;
  for (const auto& ex : examples) total += loss(forward_example(params, state, ex, options).scores, ex.label, kind);
  return total / static_cast<double>(examples.size());
}

OptimizerState OptimizerState::for_params(const ModelParams& params, AdamConfig config) {
  OptimizerState s;
  s.config = config;
  s.m_embed = s.v_embed = Matrix(params.num_items(), params.dim());
  s.m_gate.assign(params.gate.size(), 0.0);
  s.v_gate = s.m_gate;
  s.m_bilinear = s.v_bilinear = Matrix(params.dim(), params.dim());
  return s;
}

void adam_step(ModelParams& params, const GradientSet& grads, OptimizerState& opt) {
  if (!grads.all_finite())
    throw Error("non-finite gradient at optimizer step " + std::to_string(opt.step + 1));
  const std::size_t d = params.dim();
  if (grads.gate.size() != params.gate.size() || grads.bilinear.rows() != d || grads.bilinear.cols() != d ||
      (!grads.embed.rows.empty() && grads.embed.values.cols() != d) || opt.m_embed.rows() != params.num_items())
    throw Error("adam_step: gradient and parameter shapes differ");

  ++opt.step;
  const auto& c = opt.config;
  const double t = static_cast<double>(opt.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  const auto update = [&](double& w, double& m, double& v, double g) {
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g * g;
    w -= c.lr * (m / bc1) / (std::sqrt(v / bc2) + c.eps);
  };

  for (std::size_t i = 0; i < grads.embed.rows.size(); ++i) {
    const auto row = grads.embed.rows[i];
    if (row >= params.num_items()) throw Error("adam_step: gradient row out of range");
    auto w = params.embed.row(row);
    auto m = opt.m_embed.row(row);
    auto v = opt.v_embed.row(row);
    const auto g = grads.embed.values.row(i);
    for (std::size_t j = 0; j < d; ++j) update(w[j], m[j], v[j], g[j]);
  }
  for (std::size_t i = 0; i < params.gate.size(); ++i) update(params.gate[i], opt.m_gate[i], opt.v_gate[i], grads.gate[i]);
  auto wb = params.bilinear.flat();
  auto mb = opt.m_bilinear.flat();
  auto vb = opt.v_bilinear.flat();
  const auto gb = grads.bilinear.flat();
  for (std::size_t i = 0; i < wb.size(); ++i) update(wb[i], mb[i], vb[i], gb[i]);
}

std::vector<std::string> TrainConfig::validate() const {
  std::vector<std::string> errors;
  if (dim == 0) errors.emplace_back("--dim must be positive");
  if (batch_size == 0) errors.emplace_back("--batch must be positive");
  if (max_len == 0) errors.emplace_back("--max-len must be positive");
  if (fanout == 0) errors.emplace_back("--fanout must be positive");
  if (!(lr > 0.0) || !std::isfinite(lr)) errors.emplace_back("--lr must be a positive finite number");
  if (max_epochs == 0) errors.emplace_back("--max-epochs must be positive");
  if (threads == 0) errors.emplace_back("--threads must be positive");
  if (eval_k == 0) errors.emplace_back("evaluation cutoff must be positive");
  return errors;
}

std::string TrainConfig::to_json() const {
  json j = {{"dim", dim},
            {"batch_size", batch_size},
            {"depth", depth},
            {"max_len", max_len},
            {"fanout", fanout},
            {"lr", lr},
            {"max_epochs", max_epochs},
            {"patience", patience},
            {"seed", seed},
            {"ablation", std::string(to_string(ablation))},
            {"loss", std::string(to_string(loss))},
            {"score_embed", std::string(to_string(score_embed))},
            {"threads", threads},
            {"eval_k", eval_k}};
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  TrainConfig c;
  try {
    const auto j = json::parse(text);
    c.dim = j.value("dim", c.dim);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.depth = j.value("depth", c.depth);
    c.max_len = j.value("max_len", c.max_len);
    c.fanout = j.value("fanout", c.fanout);
    c.lr = j.value("lr", c.lr);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    c.eval_k = j.value("eval_k", c.eval_k);
    const auto ab = parse_ablation(j.value("ablation", std::string("none")));
    const auto lk = parse_loss_kind(j.value("loss", std::string("eq10")));
    const auto se = parse_score_embedding(j.value("score_embed", std::string("raw")));
    if (!ab || !lk || !se) throw Error("unknown enumeration value in training config");
    c.ablation = *ab;
    c.loss = *lk;
    c.score_embed = *se;
  } catch (const json::exception& e) {
    throw Error(std::string("invalid training config: ") + e.what());
  }
  return c;
}

std::string EpochLog::to_json(bool include_wall_time) const {
  const auto k = std::to_string(validation.k);
  json j = {{"epoch", epoch},
            {"loss", mean_loss},
            {"hr@" + k, validation.hr},
            {"mrr@" + k, validation.mrr},
            {"ndcg@" + k, validation.ndcg}};
  if (include_wall_time) j["wall_time_s"] = wall_seconds;
  return j.dump();
}

TrainResult train(std::span<const TrainingExample> train_examples, std::span<const TrainingExample> validation,
                  const Mrig& graph, const TrainConfig& config, const EpochCallback& on_epoch) {
  if (const auto errors = config.validate(); !errors.empty()) throw Error("invalid training config: " + errors.front());
  if (train_examples.empty()) throw Error("no training examples");

  Rng rng(config.seed);
  TrainResult result;
  ModelParams params = ModelParams::random(graph.num_nodes(), config.dim, rng);
  OptimizerState opt = OptimizerState::for_params(params, AdamConfig{config.lr});
  const ModelOptions options = config.model_options();
  const auto prop = options.propagation();

  std::vector<std::size_t> order(train_examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<TrainingExample> batch;
  double best_hr = -1.0;
  std::size_t bad_epochs = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(train_examples[order[i]]);
      const auto nodes = required_nodes(batch, options, graph.num_nodes());
      const auto state = propagate(params, sample_computation(graph, nodes, prop, rng));
      const auto bg = batch_gradient(params, state, batch, options, config.loss, config.threads);
      adam_step(params, bg.grads, opt);
      loss_sum += bg.mean_loss * static_cast<double>(batch.size());
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.mean_loss = loss_sum / static_cast<double>(order.size());
    Rng eval_rng(config.seed ^ 0x5851F42D4C957F2DULL);
    if (!validation.empty())
      entry.validation = evaluate_model(params, graph, validation, options, config.eval_k, eval_rng,
                                        config.batch_size, config.threads);
    entry.validation.k = config.eval_k;
    entry.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(entry);

    const bool improved = validation.empty() || entry.validation.hr > best_hr;
    if (improved) {
      best_hr = entry.validation.hr;
      result.params = params;
      result.best_epoch = epoch;
      bad_epochs = 0;
    } else {
      ++bad_epochs;
    }
    if (on_epoch && !on_epoch(entry, params)) break;
    if (!validation.empty() && bad_epochs > config.patience) break;
  }
  return result;
}

}  // namespace mgnn
