#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mgnn/common.hpp"

namespace mgnn {

enum class BehaviorType : std::uint8_t { target, auxiliary };

std::string_view to_string(BehaviorType b);
std::optional<BehaviorType> parse_behavior(std::string_view s);

struct Event {
  std::string session_id;
  std::string item;
  BehaviorType behavior = BehaviorType::target;
  std::int64_t timestamp = 0;  // milliseconds
};

struct TimedItem {
  std::string item;
  std::int64_t timestamp = 0;

  friend bool operator==(const TimedItem&, const TimedItem&) = default;
};

/// One session: the target behavior stream and the auxiliary stream, each
/// sorted by (timestamp, item key).
struct Session {
  std::string id;
  std::vector<TimedItem> target_seq;
  std::vector<TimedItem> aux_seq;

  /// Minimum timestamp over both streams.
  std::int64_t start_time() const;

  friend bool operator==(const Session&, const Session&) = default;
};

/// Bijection between external item keys and dense indices.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> keys);

  /// Every item of both streams of the given sessions, in ascending key order.
  static Vocabulary from_sessions(std::span<const Session> sessions);

  std::size_t size() const noexcept { return keys_.size(); }
  std::optional<ItemIndex> find(std::string_view key) const;
  const std::string& key(ItemIndex index) const { return keys_.at(index); }
  const std::vector<std::string>& keys() const noexcept { return keys_; }

  /// One key per line; line number is the dense index.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.keys_ == b.keys_; }

 private:
  std::vector<std::string> keys_;
  std::unordered_map<std::string, ItemIndex> index_;
};

struct TrainingExample {
  std::vector<ItemIndex> target_input;
  std::vector<ItemIndex> aux_input;
  ItemIndex label = 0;

  friend bool operator==(const TrainingExample&, const TrainingExample&) = default;
};

struct ExampleSet {
  std::vector<TrainingExample> examples;
  /// Candidate labels dropped because they are not in the vocabulary.
  std::size_t skipped_oov = 0;
};

struct Split {
  std::vector<Session> train;
  std::vector<Session> validation;
  std::vector<Session> test;
};

/// Parses "YYYY-MM-DDTHH:MM:SS[.fff][Z|+HH:MM|-HH:MM]" into milliseconds since the epoch.
std::optional<std::int64_t> parse_iso8601_ms(std::string_view text);

/// Groups events into sessions ordered by id; each stream sorted by (ts, item).
std::vector<Session> group_sessions(std::vector<Event> events);

/// Yoochoose click/buy dumps. Buys become the target stream, clicks the auxiliary stream.
std::vector<Session> ingest_yoochoose(const std::string& clicks_path, const std::string& buys_path);

/// Canonical event JSONL: {"session": str, "item": str, "behavior": "target"|"auxiliary", "ts": int}.
std::vector<Session> ingest_jsonl(const std::string& path);
std::vector<Session> ingest_jsonl(std::istream& in, const std::string& name);

/// Writes canonical JSONL, sessions in the given order, events merged by (ts, behavior, item).
void write_events_jsonl(std::ostream& out, std::span<const Session> sessions);

std::size_t count_events(std::span<const Session> sessions);

/// First floor(6n/7) sessions by (start time, id) train; a third of the rest validates.
Split chronological_split(std::vector<Session> sessions);

/// Each target item p_i (i >= 2) becomes a label for the preceding target items
/// and the auxiliary items strictly earlier than p_i; inputs keep the last max_len items.
ExampleSet make_examples(const Session& session, const Vocabulary& vocab, std::size_t max_len);
ExampleSet make_examples(std::span<const Session> sessions, const Vocabulary& vocab, std::size_t max_len);

}  // namespace mgnn
