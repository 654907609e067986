// mgnn: ingest, train, evaluate, predict, and run experiment sweeps.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mgnn/checkpoint.hpp"
#include "mgnn/dataset.hpp"
#include "mgnn/evaluation.hpp"
#include "mgnn/synthetic.hpp"
#include "mgnn/training.hpp"

namespace {

using nlohmann::json;
using namespace mgnn;

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr std::uint64_t kEvalSeedMix = 0x2545F4914F6CDD1DULL;

/// Raised for bad flags or missing inputs; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void require_file(const std::string& path) {
  if (path.empty()) throw UsageError("missing input path");
  if (!std::filesystem::is_regular_file(path)) throw UsageError("no such file: " + path);
}

std::string default_events_path() {
  if (const char* dir = std::getenv("MGNN_DATA_DIR"); dir && *dir)
    return (std::filesystem::path(dir) / "events.jsonl").string();
  return {};
}

std::vector<Session> load_events(const std::string& path) {
  if (path.empty()) throw UsageError("--events is required (or set MGNN_DATA_DIR)");
  require_file(path);
  return ingest_jsonl(path);
}

// Training flags shared by `train` and `experiment`.
struct TrainFlags {
  TrainConfig config;
  std::string ablation = "none";
  std::string loss = "eq10";
  std::string score_embed = "raw";

  void add_to(CLI::App* cmd) {
    cmd->add_option("--dim", config.dim, "Embedding dimension")->capture_default_str();
    cmd->add_option("--depth", config.depth, "Propagation depth K")->capture_default_str();
    cmd->add_option("--batch", config.batch_size, "Minibatch size")->capture_default_str();
    cmd->add_option("--max-len", config.max_len, "Keep the last L items of each input")->capture_default_str();
    cmd->add_option("--lr", config.lr, "Adam learning rate")->capture_default_str();
    cmd->add_option("--fanout", config.fanout, "Sampled neighbors per group per hop")->capture_default_str();
    cmd->add_option("--seed", config.seed, "Random seed")->capture_default_str();
    cmd->add_option("--max-epochs", config.max_epochs, "Epoch limit")->capture_default_str();
    cmd->add_option("--patience", config.patience, "Non-improving epochs tolerated")->capture_default_str();
    cmd->add_option("--eval-k", config.eval_k, "Cutoff of the validation HR used for early stopping")
        ->capture_default_str();
    cmd->add_option("--threads", config.threads, "Worker threads (1 reproduces runs bit for bit)")
        ->capture_default_str();
    cmd->add_option("--ablation", ablation, "Model variant")
        ->check(CLI::IsMember({"none", "no-aux-edges", "no-aux-seq", "no-gating"}))
        ->capture_default_str();
    cmd->add_option("--loss", loss, "Objective")->check(CLI::IsMember({"eq10", "softmax-ce"}))->capture_default_str();
    cmd->add_option("--score-embed", score_embed, "Item vectors matched by the bilinear scorer")
        ->check(CLI::IsMember({"raw", "propagated"}))
        ->capture_default_str();
  }

  TrainConfig resolve() const {
    TrainConfig c = config;
    c.ablation = *parse_ablation(ablation);
    c.loss = *parse_loss_kind(loss);
    c.score_embed = *parse_score_embedding(score_embed);
    if (const auto errors = c.validate(); !errors.empty()) {
      std::string msg = "invalid configuration:";
      for (const auto& e : errors) msg += "\n  " + e;
      throw UsageError(msg);
    }
    return c;
  }
};

std::vector<std::string> key_list(const std::vector<ItemIndex>& items, const Vocabulary& vocab) {
  std::vector<std::string> out;
  out.reserve(items.size());
  for (auto v : items) out.push_back(vocab.key(v));
  return out;
}

// ---------------------------------------------------------------- ingest

struct IngestArgs {
  std::string format = "jsonl";
  std::vector<std::string> inputs;
  std::string out;
  double recent = 1.0;
};

int cmd_ingest(const IngestArgs& a) {
  for (const auto& p : a.inputs) require_file(p);
  std::vector<Session> sessions;
  if (a.format == "yoochoose") {
    if (a.inputs.size() != 2) throw UsageError("yoochoose ingest takes exactly two inputs: CLICKS BUYS");
    sessions = ingest_yoochoose(a.inputs[0], a.inputs[1]);
  } else {
    std::vector<Event> events;
    for (const auto& p : a.inputs)
      for (const auto& s : ingest_jsonl(p)) {
        for (const auto& t : s.target_seq) events.push_back({s.id, t.item, BehaviorType::target, t.timestamp});
        for (const auto& t : s.aux_seq) events.push_back({s.id, t.item, BehaviorType::auxiliary, t.timestamp});
      }
    sessions = group_sessions(std::move(events));
  }
  if (a.recent < 1.0) {
    sessions = recent_fraction(std::move(sessions), a.recent);
    std::sort(sessions.begin(), sessions.end(), [](const Session& x, const Session& y) { return x.id < y.id; });
  }
  std::ofstream out(a.out, std::ios::binary);
  if (!out) throw IoError(a.out, "cannot write");
  write_events_jsonl(out, sessions);
  if (!out) throw IoError(a.out, "write failed");
  std::cout << json{{"sessions", sessions.size()}, {"events", count_events(sessions)}}.dump() << '\n';
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  TrainFlags flags;
  std::string events = default_events_path();
  std::string out = "model.ckpt";
  std::string log;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
  const TrainConfig cfg = a.flags.resolve();
  const auto data = PreparedData::from_sessions(load_events(a.events));
  const auto train_set = data.train_examples(cfg.max_len);
  const auto val_set = data.validation_examples(cfg.max_len);
  if (train_set.examples.empty()) throw Error("the training split yields no examples");

  const std::string log_path = a.log.empty() ? a.out + ".log.jsonl" : a.log;
  std::ofstream log(log_path);
  if (!log) throw IoError(log_path, "cannot write");
  const auto on_epoch = [&](const EpochLog& e, const ModelParams&) {
    log << e.to_json() << '\n' << std::flush;
    if (!a.quiet)
      std::cerr << "epoch " << e.epoch << "  loss " << e.mean_loss << "  val hr@" << cfg.eval_k << ' '
                << e.validation.hr << '\n';
    return true;
  };
  const auto result = train(train_set.examples, val_set.examples, data.graph, cfg, on_epoch);

  Checkpoint ckpt{cfg, data.vocab, round_to_float(result.params)};
  save_checkpoint(a.out, ckpt);
  data.graph.save(a.out + ".mrig");

  const auto& best = result.log[result.best_epoch - 1];
  json summary = {{"checkpoint", a.out},
                  {"epochs", result.log.size()},
                  {"best_epoch", result.best_epoch},
                  {"train_examples", train_set.examples.size()},
                  {"validation", json::parse(best.validation.to_json())}};
  std::cout << summary.dump() << '\n';
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string checkpoint;
  std::string events = default_events_path();
  std::string split = "test";
  std::size_t k = 100;
  std::string baseline = "model";
  std::size_t threads = 1;
  std::string dump;
};

int cmd_eval(const EvalArgs& a) {
  require_file(a.checkpoint);
  if (a.k == 0) throw UsageError("--k must be positive");
  const auto ckpt = load_checkpoint(a.checkpoint);
  const auto data = PreparedData::from_sessions(load_events(a.events));
  if (data.vocab.size() != ckpt.vocab.size())
    throw Error("checkpoint has " + std::to_string(ckpt.vocab.size()) + " items but the training split of " +
                a.events + " has " + std::to_string(data.vocab.size()));
  if (!(data.vocab == ckpt.vocab)) throw Error("checkpoint vocabulary differs from the training split of " + a.events);

  const auto L = ckpt.config.max_len;
  const auto set = a.split == "test" ? data.test_examples(L) : data.validation_examples(L);
  MetricsReport report;
  std::vector<RankingResult> rankings;
  if (a.baseline == "model") {
    Rng rng(ckpt.config.seed ^ kEvalSeedMix);
    rankings = rank_with_model(ckpt.params, data.graph, set.examples, ckpt.config.model_options(), a.k, rng,
                               ckpt.config.batch_size, a.threads);
  } else {
    std::unique_ptr<Ranker> ranker;
    if (a.baseline == "pop")
      ranker = std::make_unique<PopRanker>(data.train_examples(L).examples, data.vocab.size());
    else
      ranker = std::make_unique<ItemKnnRanker>(data.split.train, data.vocab);
    for (const auto& ex : set.examples) rankings.push_back(rank_topk(ranker->scores(ex), a.k, ex.label));
  }
  report = metrics_at_k(rankings, a.k);
  report.skipped_oov = set.skipped_oov;

  if (!a.dump.empty()) {
    std::ofstream dump(a.dump);
    if (!dump) throw IoError(a.dump, "cannot write");
    for (std::size_t i = 0; i < rankings.size(); ++i) {
      const auto& ex = set.examples[i];
      dump << json{{"target", key_list(ex.target_input, data.vocab)},
                   {"auxiliary", key_list(ex.aux_input, data.vocab)},
                   {"label", data.vocab.key(ex.label)},
                   {"items", key_list(rankings[i].items, data.vocab)},
                   {"scores", rankings[i].scores}}
                  .dump()
           << '\n';
    }
  }
  std::cout << report.to_json() << '\n';
  return 0;
}

// ---------------------------------------------------------------- predict

struct PredictArgs {
  std::string checkpoint;
  std::string graph;
  std::size_t k = 10;
};

std::vector<ItemIndex> known_items(const json& list, const char* field, const Vocabulary& vocab,
                                   std::size_t& unknown) {
  std::vector<ItemIndex> out;
  if (list.is_null()) return out;
  if (!list.is_array()) throw Error(std::string("\"") + field + "\" must be an array");
  for (const auto& v : list) {
    std::string key;
    if (v.is_string())
      key = v.get<std::string>();
    else if (v.is_number_integer())
      key = std::to_string(v.get<std::int64_t>());
    else
      throw Error(std::string("\"") + field + "\" entries must be strings or integers");
    if (const auto idx = vocab.find(key)) {
      out.push_back(*idx);
    } else {
      ++unknown;
      std::cerr << "warning: dropping unknown " << field << " item '" << key << "'\n";
    }
  }
  return out;
}

int cmd_predict(const PredictArgs& a) {
  require_file(a.checkpoint);
  const std::string graph_path = a.graph.empty() ? a.checkpoint + ".mrig" : a.graph;
  require_file(graph_path);
  if (a.k == 0) throw UsageError("--k must be positive");
  const auto ckpt = load_checkpoint(a.checkpoint);
  const auto graph = Mrig::load(graph_path);
  if (graph.num_nodes() != ckpt.vocab.size()) throw Error("graph and checkpoint disagree on the item count");

  const std::string text(std::istreambuf_iterator<char>(std::cin), {});
  json query;
  try {
    query = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("stdin is not a JSON object: ") + e.what());
  }
  if (!query.is_object()) throw Error("stdin must hold {\"target\": [...], \"auxiliary\": [...]}");
  std::size_t unknown_target = 0, unknown_aux = 0;
  TrainingExample ex;
  ex.target_input = known_items(query.value("target", json()), "target", ckpt.vocab, unknown_target);
  ex.aux_input = known_items(query.value("auxiliary", json()), "auxiliary", ckpt.vocab, unknown_aux);
  if (ex.target_input.empty())
    throw Error("no target item is in the model vocabulary (" + std::to_string(unknown_target) +
                " given, vocabulary has " + std::to_string(ckpt.vocab.size()) + " items)");
  auto keep_last = [L = ckpt.config.max_len](std::vector<ItemIndex>& v) {
    if (v.size() > L) v.erase(v.begin(), v.end() - static_cast<std::ptrdiff_t>(L));
  };
  keep_last(ex.target_input);
  keep_last(ex.aux_input);

  Rng rng(ckpt.config.seed ^ kEvalSeedMix);
  const std::vector<TrainingExample> batch{ex};
  const auto ranked = rank_with_model(ckpt.params, graph, batch, ckpt.config.model_options(), a.k, rng);
  json items = json::array();
  for (std::size_t i = 0; i < ranked[0].items.size(); ++i)
    items.push_back({{"item", ckpt.vocab.key(ranked[0].items[i])}, {"score", ranked[0].scores[i]}});
  std::cout << json{{"items", items}}.dump() << '\n';
  return 0;
}

// ---------------------------------------------------------------- experiment

struct ExperimentArgs {
  TrainFlags flags;
  std::string events = default_events_path();
  std::optional<std::uint64_t> planted;
  std::string sweep = "ablation";
  std::vector<std::size_t> values;
  std::size_t k = 100;
  std::string csv;
  std::string json_out;
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError(path, "cannot write");
  out << text;
}

int cmd_experiment(const ExperimentArgs& a) {
  const TrainConfig base = a.flags.resolve();
  const PreparedData data = a.planted ? PreparedData::from_split(planted_signal_corpus({}, *a.planted))
                                      : PreparedData::from_sessions(load_events(a.events));
  std::vector<Variant> variants;
  if (a.sweep == "ablation") {
    variants = ablation_variants(base);
  } else {
    if (a.values.empty()) throw UsageError("--values is required for a " + a.sweep + " sweep");
    variants = a.sweep == "depth" ? depth_variants(base, a.values) : length_variants(base, a.values);
  }
  const auto rows = run_experiment(variants, data, a.k);
  const auto csv = experiment_csv(rows);
  if (a.csv.empty())
    std::cout << csv;
  else
    write_text(a.csv, csv);
  if (!a.json_out.empty()) write_text(a.json_out, experiment_json(rows) + "\n");
  return 0;
}

// ---------------------------------------------------------------- stats

struct StatsArgs {
  std::string events = default_events_path();
  std::size_t max_len = 3;
};

int cmd_stats(const StatsArgs& a) {
  const auto data = PreparedData::from_sessions(load_events(a.events));
  std::cout << compute_stats(data, a.max_len).to_json() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-relational item graph model for next target-behavior prediction"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "mgnn 0.1.0");

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Convert raw logs to canonical event JSONL");
  c_ingest->add_option("--format", ingest.format, "Input format")
      ->check(CLI::IsMember({"yoochoose", "jsonl"}))
      ->capture_default_str();
  c_ingest->add_option("inputs", ingest.inputs, "Input files (yoochoose: CLICKS BUYS)")->required();
  c_ingest->add_option("--out", ingest.out, "Output JSONL path")->required();
  c_ingest->add_option("--recent-fraction", ingest.recent, "Keep only the most recent fraction of sessions")
      ->check(CLI::Range(1e-9, 1.0))
      ->capture_default_str();

  TrainArgs train_args;
  auto* c_train = app.add_subcommand("train", "Split, build the graph, train, and write a checkpoint");
  train_args.flags.add_to(c_train);
  c_train->add_option("--events", train_args.events, "Canonical event JSONL")->capture_default_str();
  c_train->add_option("--out", train_args.out, "Checkpoint path")->capture_default_str();
  c_train->add_option("--log", train_args.log, "Epoch log path (default: <out>.log.jsonl)");
  c_train->add_flag("--quiet", train_args.quiet, "No per-epoch progress on stderr");

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "Ranking metrics of a checkpoint or a baseline");
  c_eval->add_option("--checkpoint", eval.checkpoint, "Checkpoint path (vocabulary source)")->required();
  c_eval->add_option("--events", eval.events, "Canonical event JSONL")->capture_default_str();
  c_eval->add_option("--split", eval.split, "Evaluation split")
      ->check(CLI::IsMember({"test", "validation"}))
      ->capture_default_str();
  c_eval->add_option("--k", eval.k, "Ranking cutoff")->capture_default_str();
  c_eval->add_option("--baseline", eval.baseline, "Ranker")
      ->check(CLI::IsMember({"model", "pop", "itemknn"}))
      ->capture_default_str();
  c_eval->add_option("--threads", eval.threads, "Worker threads")->capture_default_str();
  c_eval->add_option("--dump-rankings", eval.dump, "Write each example's top-K as JSONL");

  PredictArgs predict;
  auto* c_predict = app.add_subcommand("predict", "Top-K items for a session read as JSON from stdin");
  c_predict->add_option("--checkpoint", predict.checkpoint, "Checkpoint path")->required();
  c_predict->add_option("--graph", predict.graph, "Graph path (default: <checkpoint>.mrig)");
  c_predict->add_option("--k", predict.k, "Number of items")->capture_default_str();

  ExperimentArgs exp;
  auto* c_exp = app.add_subcommand("experiment", "Train and compare variants on one dataset");
  exp.flags.add_to(c_exp);
  c_exp->add_option("--events", exp.events, "Canonical event JSONL")->capture_default_str();
  c_exp->add_option("--planted", exp.planted, "Use the planted-signal synthetic corpus with this seed");
  c_exp->add_option("--sweep", exp.sweep, "Variant family")
      ->check(CLI::IsMember({"ablation", "depth", "length"}))
      ->capture_default_str();
  c_exp->add_option("--values", exp.values, "Depths or lengths to sweep")->delimiter(',');
  c_exp->add_option("--k", exp.k, "Ranking cutoff")->capture_default_str();
  c_exp->add_option("--csv", exp.csv, "CSV output path (default: stdout)");
  c_exp->add_option("--json", exp.json_out, "JSON output path");

  StatsArgs stats;
  auto* c_stats = app.add_subcommand("stats", "Dataset statistics after the chronological split");
  c_stats->add_option("--events", stats.events, "Canonical event JSONL")->capture_default_str();
  c_stats->add_option("--max-len", stats.max_len, "Input truncation length")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (c_ingest->parsed()) return cmd_ingest(ingest);
    if (c_train->parsed()) return cmd_train(train_args);
    if (c_eval->parsed()) return cmd_eval(eval);
    if (c_predict->parsed()) return cmd_predict(predict);
    if (c_exp->parsed()) return cmd_experiment(exp);
    if (c_stats->parsed()) return cmd_stats(stats);
  } catch (const UsageError& e) {
    std::cerr << "mgnn: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "mgnn: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "mgnn: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
