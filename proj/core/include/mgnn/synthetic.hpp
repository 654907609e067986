#pragma once

#include <cstdint>
#include <vector>

#include "mgnn/event_log.hpp"

namespace mgnn {

/// Sessions whose purchases walk a fixed random successor permutation over
/// `num_items` items ("i0", "i1", ...). Each purchase is followed by a click on
/// the same item, so every next purchase is a deterministic function of the
/// inputs. Target streams have between 2 and max_target_len items.
std::vector<Session> successor_corpus(std::size_t num_sessions, std::size_t num_items, std::size_t max_target_len,
                                      std::uint64_t seed);

struct PlantedSignalConfig {
  std::size_t products = 30;
  std::size_t cues_per_product = 4;   // the first half is used in training purchases
  std::size_t noise_items = 30;
  std::size_t train_sessions_per_cue = 5;
  std::size_t browse_sessions_per_cue = 3;  // click-only sessions for held-out cues
  std::size_t validation_sessions = 60;
  std::size_t test_sessions = 120;
};

/// A corpus where the auxiliary stream determines the label. Each purchase
/// session buys a random context product, clicks a noise item and then a cue
/// item of the label product, buys the label, and finally clicks the label.
/// Training purchases use the first half of each product's cues; held-out
/// sessions use the other half, which reach the label only through click
/// transitions recorded by click-only training sessions.
Split planted_signal_corpus(const PlantedSignalConfig& config, std::uint64_t seed);

}  // namespace mgnn
