#include "mgnn/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace mgnn {

PreparedData PreparedData::from_split(Split split) {
  PreparedData d;
  d.split = std::move(split);
  d.vocab = Vocabulary::from_sessions(d.split.train);
  d.graph = build_graph(d.split.train, d.vocab);
  return d;
}

PreparedData PreparedData::from_sessions(std::vector<Session> sessions) {
  return from_split(chronological_split(std::move(sessions)));
}

ExampleSet PreparedData::train_examples(std::size_t max_len) const { return make_examples(split.train, vocab, max_len); }
ExampleSet PreparedData::validation_examples(std::size_t max_len) const {
  return make_examples(split.validation, vocab, max_len);
}
ExampleSet PreparedData::test_examples(std::size_t max_len) const { return make_examples(split.test, vocab, max_len); }

std::string DatasetStats::to_json() const {
  nlohmann::ordered_json j = {{"items", items},
                              {"sessions", sessions},
                              {"target_edges", target_edges},
                              {"aux_edges", aux_edges},
                              {"avg_target_len", avg_target_len},
                              {"avg_aux_len", avg_aux_len},
                              {"train_examples", train_examples},
                              {"validation_examples", validation_examples},
                              {"test_examples", test_examples},
                              {"skipped_oov", skipped_oov}};
  return j.dump();
}

DatasetStats compute_stats(const PreparedData& data, std::size_t max_len) {
  DatasetStats st;
  st.items = data.vocab.size();
  st.target_edges = data.graph.num_edges(BehaviorType::target);
  st.aux_edges = data.graph.num_edges(BehaviorType::auxiliary);
  std::size_t n_target = 0, n_aux = 0, len_target = 0, len_aux = 0;
  for (const auto* part : {&data.split.train, &data.split.validation, &data.split.test}) {
    st.sessions += part->size();
    for (const auto& s : *part) {
      if (!s.target_seq.empty()) {
        ++n_target;
        len_target += s.target_seq.size();
      }
      if (!s.aux_seq.empty()) {
        ++n_aux;
        len_aux += s.aux_seq.size();
      }
    }
  }
  st.avg_target_len = n_target ? static_cast<double>(len_target) / static_cast<double>(n_target) : 0.0;
  st.avg_aux_len = n_aux ? static_cast<double>(len_aux) / static_cast<double>(n_aux) : 0.0;
  const auto tr = data.train_examples(max_len);
  const auto va = data.validation_examples(max_len);
  const auto te = data.test_examples(max_len);
  st.train_examples = tr.examples.size();
  st.validation_examples = va.examples.size();
  st.test_examples = te.examples.size();
  st.skipped_oov = va.skipped_oov + te.skipped_oov;
  return st;
}

std::vector<Session> recent_fraction(std::vector<Session> sessions, double fraction) {
  if (!(fraction > 0.0) || fraction > 1.0) throw Error("fraction must lie in (0, 1]");
  std::sort(sessions.begin(), sessions.end(), [](const Session& a, const Session& b) {
    const auto ta = a.start_time(), tb = b.start_time();
    if (ta != tb) return ta < tb;
    return a.id < b.id;
  });
  auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(sessions.size())));
  keep = std::min(sessions.size(), std::max<std::size_t>(keep, 7));
  sessions.erase(sessions.begin(), sessions.end() - static_cast<std::ptrdiff_t>(keep));
  return sessions;
}

}  // namespace mgnn
