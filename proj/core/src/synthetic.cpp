#include "mgnn/synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace mgnn {

namespace {

std::string product(std::size_t i) { return "p" + std::to_string(i); }
std::string cue(std::size_t p, std::size_t j) { return "c" + std::to_string(p) + "_" + std::to_string(j); }
std::string noise(std::size_t i) { return "n" + std::to_string(i); }

std::string session_id(const char* prefix, std::size_t i) {
  std::string n = std::to_string(i);
  return prefix + std::string(6 - std::min<std::size_t>(6, n.size()), '0') + n;
}

}  // namespace

std::vector<Session> successor_corpus(std::size_t num_sessions, std::size_t num_items, std::size_t max_target_len,
                                      std::uint64_t seed) {
  if (num_items < 2 || max_target_len < 2) throw Error("successor_corpus: need at least 2 items and length 2");
  Rng rng(seed);
  std::vector<std::size_t> next(num_items);
  std::iota(next.begin(), next.end(), std::size_t{0});
  std::shuffle(next.begin(), next.end(), rng);
  std::uniform_int_distribution<std::size_t> pick_item(0, num_items - 1);
  std::uniform_int_distribution<std::size_t> pick_len(2, max_target_len);

  std::vector<Session> sessions;
  sessions.reserve(num_sessions);
  for (std::size_t s = 0; s < num_sessions; ++s) {
    Session sess;
    sess.id = session_id("s", s);
    const std::int64_t base = static_cast<std::int64_t>(s) * 1000;
    // Cover every item as a first purchase before drawing at random.
    std::size_t item = s < num_items ? s : pick_item(rng);
    const std::size_t len = pick_len(rng);
    for (std::size_t j = 0; j < len; ++j) {
      const std::int64_t ts = base + static_cast<std::int64_t>(j) * 10;
      sess.aux_seq.push_back({"i" + std::to_string(item), ts + 7});
      sess.target_seq.push_back({"i" + std::to_string(item), ts + 6});
      item = next[item];
    }
    sessions.push_back(std::move(sess));
  }
  return sessions;
}

Split planted_signal_corpus(const PlantedSignalConfig& cfg, std::uint64_t seed) {
  if (cfg.products < 2 || cfg.cues_per_product < 2 || cfg.noise_items < 1)
    throw Error("planted_signal_corpus: need 2 products, 2 cues per product and a noise item");
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick_product(0, cfg.products - 1);
  std::uniform_int_distribution<std::size_t> pick_noise(0, cfg.noise_items - 1);
  const std::size_t train_cues = cfg.cues_per_product / 2;
  std::uniform_int_distribution<std::size_t> pick_heldout_cue(train_cues, cfg.cues_per_product - 1);

  std::int64_t clock = 0;
  std::size_t counter = 0;
  const auto purchase = [&](std::size_t label, std::size_t cue_index) {
    std::size_t context = pick_product(rng);
    while (context == label) context = pick_product(rng);
    Session s;
    s.id = session_id("s", counter++);
    const std::int64_t t = clock;
    clock += 100;
    s.target_seq = {{product(context), t}, {product(label), t + 10}};
    s.aux_seq = {{noise(pick_noise(rng)), t + 2}, {cue(label, cue_index), t + 4}, {product(label), t + 12}};
    return s;
  };

  Split split;
  std::vector<Session> train;
  for (std::size_t p = 0; p < cfg.products; ++p) {
    for (std::size_t j = 0; j < train_cues; ++j)
      for (std::size_t r = 0; r < cfg.train_sessions_per_cue; ++r) train.push_back(purchase(p, j));
    for (std::size_t j = train_cues; j < cfg.cues_per_product; ++j)
      for (std::size_t r = 0; r < cfg.browse_sessions_per_cue; ++r) {
        Session s;
        s.id = session_id("s", counter++);
        const std::int64_t t = clock;
        clock += 100;
        s.aux_seq = {{noise(pick_noise(rng)), t}, {cue(p, j), t + 2}, {product(p), t + 4}};
        train.push_back(std::move(s));
      }
  }
  std::shuffle(train.begin(), train.end(), rng);
  // Re-stamp so the shuffled order is also the chronological order.
  for (std::size_t i = 0; i < train.size(); ++i) {
    const std::int64_t shift = static_cast<std::int64_t>(i) * 100 - train[i].start_time();
    for (auto& t : train[i].target_seq) t.timestamp += shift;
    for (auto& t : train[i].aux_seq) t.timestamp += shift;
  }
  clock = static_cast<std::int64_t>(train.size()) * 100;
  split.train = std::move(train);
  for (std::size_t i = 0; i < cfg.validation_sessions; ++i)
    split.validation.push_back(purchase(pick_product(rng), pick_heldout_cue(rng)));
  for (std::size_t i = 0; i < cfg.test_sessions; ++i)
    split.test.push_back(purchase(pick_product(rng), pick_heldout_cue(rng)));
  return split;
}

}  // namespace mgnn
