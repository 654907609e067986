#pragma once

#include <map>
#include <string>
#include <vector>

#include "mgnn/event_log.hpp"
#include "mgnn/mrig.hpp"

namespace mgnn {

/// Splits, the training vocabulary, and the graph built from training sessions only.
struct PreparedData {
  Split split;
  Vocabulary vocab;
  Mrig graph;

  static PreparedData from_split(Split split);
  static PreparedData from_sessions(std::vector<Session> sessions);

  ExampleSet train_examples(std::size_t max_len) const;
  ExampleSet validation_examples(std::size_t max_len) const;
  ExampleSet test_examples(std::size_t max_len) const;
};

struct DatasetStats {
  std::size_t items = 0;
  std::size_t sessions = 0;
  std::size_t target_edges = 0;
  std::size_t aux_edges = 0;
  double avg_target_len = 0.0;  // over sessions with a nonempty target stream
  double avg_aux_len = 0.0;     // over sessions with a nonempty auxiliary stream
  std::size_t train_examples = 0;
  std::size_t validation_examples = 0;
  std::size_t test_examples = 0;
  std::size_t skipped_oov = 0;  // validation + test labels outside the vocabulary

  std::string to_json() const;
};

DatasetStats compute_stats(const PreparedData& data, std::size_t max_len);

/// The most recent `fraction` of sessions by start time (at least 7 when available).
std::vector<Session> recent_fraction(std::vector<Session> sessions, double fraction);

}  // namespace mgnn
