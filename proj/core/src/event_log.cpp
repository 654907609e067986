#include "mgnn/event_log.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "json.hpp"

namespace mgnn {

namespace {

using nlohmann::json;

// Howard Hinnant's days_from_civil.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

bool read_fixed(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  for (std::size_t i = pos; i < pos + len; ++i)
    if (s[i] < '0' || s[i] > '9') return false;
  auto [p, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, out);
  return ec == std::errc{} && p == s.data() + pos + len;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

std::string_view trim_cr(std::string_view line) {
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.remove_suffix(1);
  return line;
}

bool item_before(const TimedItem& a, const TimedItem& b) {
  if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
  return a.item < b.item;
}

void read_yoochoose_file(const std::string& path, std::size_t expected_fields, BehaviorType behavior,
                         std::vector<Event>& out) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open");
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim_cr(raw);
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != expected_fields)
      throw ParseError(path, line_no,
                       "expected " + std::to_string(expected_fields) + " fields, got " +
                           std::to_string(fields.size()));
    if (fields[0].empty()) throw ParseError(path, line_no, "empty session id");
    if (fields[2].empty()) throw ParseError(path, line_no, "empty item id");
    const auto ts = parse_iso8601_ms(fields[1]);
    if (!ts) throw ParseError(path, line_no, "unparseable timestamp '" + std::string(fields[1]) + "'");
    if (*ts < 0) throw ParseError(path, line_no, "timestamp before epoch");
    out.push_back(Event{std::string(fields[0]), std::string(fields[2]), behavior, *ts});
  }
}

std::string key_from_json(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  throw std::invalid_argument("must be a string or integer");
}

}  // namespace

std::string_view to_string(BehaviorType b) {
  return b == BehaviorType::target ? "target" : "auxiliary";
}

std::optional<BehaviorType> parse_behavior(std::string_view s) {
  if (s == "target") return BehaviorType::target;
  if (s == "auxiliary") return BehaviorType::auxiliary;
  return std::nullopt;
}

std::int64_t Session::start_time() const {
  std::int64_t t = INT64_MAX;
  if (!target_seq.empty()) t = std::min(t, target_seq.front().timestamp);
  if (!aux_seq.empty()) t = std::min(t, aux_seq.front().timestamp);
  return t;
}

Vocabulary::Vocabulary(std::vector<std::string> keys) : keys_(std::move(keys)) {
  index_.reserve(keys_.size());
  for (std::size_t i = 0; i < keys_.size(); ++i) {
    if (keys_[i].empty()) throw Error("vocabulary key at index " + std::to_string(i) + " is empty");
    if (!index_.emplace(keys_[i], static_cast<ItemIndex>(i)).second)
      throw Error("duplicate vocabulary key '" + keys_[i] + "'");
  }
}

Vocabulary Vocabulary::from_sessions(std::span<const Session> sessions) {
  std::vector<std::string> keys;
  for (const auto& s : sessions) {
    for (const auto& t : s.target_seq) keys.push_back(t.item);
    for (const auto& t : s.aux_seq) keys.push_back(t.item);
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  return Vocabulary(std::move(keys));
}

std::optional<ItemIndex> Vocabulary::find(std::string_view key) const {
  const auto it = index_.find(std::string(key));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path, "cannot write");
  for (const auto& k : keys_) out << k << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open");
  std::vector<std::string> keys;
  std::string line;
  while (std::getline(in, line)) keys.push_back(line);
  return Vocabulary(std::move(keys));
}

std::optional<std::int64_t> parse_iso8601_ms(std::string_view s) {
  int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
  if (!read_fixed(s, 0, 4, year) || s.size() < 19 || s[4] != '-' || !read_fixed(s, 5, 2, month) ||
      s[7] != '-' || !read_fixed(s, 8, 2, day) || (s[10] != 'T' && s[10] != ' ') ||
      !read_fixed(s, 11, 2, hour) || s[13] != ':' || !read_fixed(s, 14, 2, minute) || s[16] != ':' ||
      !read_fixed(s, 17, 2, second))
    return std::nullopt;
  if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 || second > 60)
    return std::nullopt;

  std::size_t pos = 19;
  std::int64_t millis = 0;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    std::size_t digits = 0;
    std::int64_t scale = 100;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
      if (digits < 3) {
        millis += (s[pos] - '0') * scale;
        scale /= 10;
      }
      ++digits;
      ++pos;
    }
    if (digits == 0) return std::nullopt;
  }

  std::int64_t offset_minutes = 0;
  if (pos < s.size()) {
    if (s[pos] == 'Z' && pos + 1 == s.size()) {
      ++pos;
    } else if (s[pos] == '+' || s[pos] == '-') {
      int oh = 0, om = 0;
      const int sign = s[pos] == '+' ? 1 : -1;
      if (!read_fixed(s, pos + 1, 2, oh)) return std::nullopt;
      std::size_t after = pos + 3;
      if (after < s.size() && s[after] == ':') ++after;
      if (!read_fixed(s, after, 2, om) || after + 2 != s.size()) return std::nullopt;
      offset_minutes = sign * (oh * 60 + om);
      pos = s.size();
    } else {
      return std::nullopt;
    }
  }
  if (pos != s.size()) return std::nullopt;

  const std::int64_t days = days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day));
  const std::int64_t secs = days * 86400 + hour * 3600 + minute * 60 + second - offset_minutes * 60;
  return secs * 1000 + millis;
}

std::vector<Session> group_sessions(std::vector<Event> events) {
  std::map<std::string, Session> by_id;
  for (auto& e : events) {
    auto& s = by_id[e.session_id];
    auto& seq = e.behavior == BehaviorType::target ? s.target_seq : s.aux_seq;
    seq.push_back(TimedItem{std::move(e.item), e.timestamp});
  }
  std::vector<Session> sessions;
  sessions.reserve(by_id.size());
  for (auto& [id, s] : by_id) {
    s.id = id;
    std::sort(s.target_seq.begin(), s.target_seq.end(), item_before);
    std::sort(s.aux_seq.begin(), s.aux_seq.end(), item_before);
    sessions.push_back(std::move(s));
  }
  return sessions;
}

std::vector<Session> ingest_yoochoose(const std::string& clicks_path, const std::string& buys_path) {
  std::vector<Event> events;
  read_yoochoose_file(clicks_path, 4, BehaviorType::auxiliary, events);
  read_yoochoose_file(buys_path, 5, BehaviorType::target, events);
  return group_sessions(std::move(events));
}

std::vector<Session> ingest_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open");
  return ingest_jsonl(in, path);
}

std::vector<Session> ingest_jsonl(std::istream& in, const std::string& name) {
  std::vector<Event> events;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim_cr(raw);
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(name, line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) throw ParseError(name, line_no, "expected a JSON object");
    Event ev;
    try {
      ev.session_id = key_from_json(obj.at("session"));
      ev.item = key_from_json(obj.at("item"));
      const auto& ts = obj.at("ts");
      if (!ts.is_number_integer()) throw std::invalid_argument("ts must be an integer");
      ev.timestamp = ts.get<std::int64_t>();
      const auto& b = obj.at("behavior");
      if (!b.is_string()) throw std::invalid_argument("behavior must be a string");
      const auto behavior = parse_behavior(b.get<std::string>());
      if (!behavior) throw std::invalid_argument("unknown behavior '" + b.get<std::string>() + "'");
      ev.behavior = *behavior;
    } catch (const json::exception& e) {
      throw ParseError(name, line_no, e.what());
    } catch (const std::invalid_argument& e) {
      throw ParseError(name, line_no, e.what());
    }
    if (ev.item.empty()) throw ParseError(name, line_no, "empty item key");
    if (ev.timestamp < 0) throw ParseError(name, line_no, "negative timestamp");
    events.push_back(std::move(ev));
  }
  return group_sessions(std::move(events));
}

void write_events_jsonl(std::ostream& out, std::span<const Session> sessions) {
  struct Row {
    const TimedItem* item;
    BehaviorType behavior;
  };
  std::vector<Row> rows;
  for (const auto& s : sessions) {
    rows.clear();
    for (const auto& t : s.target_seq) rows.push_back({&t, BehaviorType::target});
    for (const auto& t : s.aux_seq) rows.push_back({&t, BehaviorType::auxiliary});
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
      if (a.item->timestamp != b.item->timestamp) return a.item->timestamp < b.item->timestamp;
      if (a.behavior != b.behavior) return a.behavior < b.behavior;
      return a.item->item < b.item->item;
    });
    const std::string sid = json(s.id).dump();
    for (const auto& r : rows) {
      out << "{\"session\":" << sid << ",\"item\":" << json(r.item->item).dump() << ",\"behavior\":\""
          << to_string(r.behavior) << "\",\"ts\":" << r.item->timestamp << "}\n";
    }
  }
}

std::size_t count_events(std::span<const Session> sessions) {
  std::size_t n = 0;
  for (const auto& s : sessions) n += s.target_seq.size() + s.aux_seq.size();
  return n;
}

Split chronological_split(std::vector<Session> sessions) {
  const std::size_t n = sessions.size();
  if (n < 7) throw Error("chronological split needs at least 7 sessions, got " + std::to_string(n));
  std::sort(sessions.begin(), sessions.end(), [](const Session& a, const Session& b) {
    const auto ta = a.start_time(), tb = b.start_time();
    if (ta != tb) return ta < tb;
    return a.id < b.id;
  });
  const std::size_t n_train = 6 * n / 7;
  const std::size_t n_val = (n - n_train) / 3;
  Split split;
  auto first = std::make_move_iterator(sessions.begin());
  split.train.assign(first, first + static_cast<std::ptrdiff_t>(n_train));
  split.validation.assign(first + static_cast<std::ptrdiff_t>(n_train),
                          first + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.test.assign(first + static_cast<std::ptrdiff_t>(n_train + n_val), std::make_move_iterator(sessions.end()));
  return split;
}

namespace {

void keep_last(std::vector<ItemIndex>& v, std::size_t max_len) {
  if (v.size() > max_len) v.erase(v.begin(), v.end() - static_cast<std::ptrdiff_t>(max_len));
}

}  // namespace

ExampleSet make_examples(const Session& session, const Vocabulary& vocab, std::size_t max_len) {
  if (max_len == 0) throw Error("max_len must be at least 1");
  ExampleSet out;
  const auto& target = session.target_seq;
  const auto& aux = session.aux_seq;

  std::vector<std::optional<ItemIndex>> target_idx(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) target_idx[i] = vocab.find(target[i].item);
  std::vector<std::optional<ItemIndex>> aux_idx(aux.size());
  for (std::size_t i = 0; i < aux.size(); ++i) aux_idx[i] = vocab.find(aux[i].item);

  for (std::size_t i = 1; i < target.size(); ++i) {
    if (!target_idx[i]) {
      ++out.skipped_oov;
      continue;
    }
    TrainingExample ex;
    ex.label = *target_idx[i];
    for (std::size_t j = 0; j < i; ++j)
      if (target_idx[j]) ex.target_input.push_back(*target_idx[j]);
    if (ex.target_input.empty()) continue;
    const std::int64_t label_ts = target[i].timestamp;
    for (std::size_t j = 0; j < aux.size() && aux[j].timestamp < label_ts; ++j)
      if (aux_idx[j]) ex.aux_input.push_back(*aux_idx[j]);
    keep_last(ex.target_input, max_len);
    keep_last(ex.aux_input, max_len);
    out.examples.push_back(std::move(ex));
  }
  return out;
}

ExampleSet make_examples(std::span<const Session> sessions, const Vocabulary& vocab, std::size_t max_len) {
  ExampleSet out;
  for (const auto& s : sessions) {
    auto part = make_examples(s, vocab, max_len);
    out.skipped_oov += part.skipped_oov;
    out.examples.insert(out.examples.end(), std::make_move_iterator(part.examples.begin()),
                        std::make_move_iterator(part.examples.end()));
  }
  return out;
}

}  // namespace mgnn
