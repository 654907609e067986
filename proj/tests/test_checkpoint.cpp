#include <random>

#include "doctest.h"
#include "json.hpp"
#include "mgnn/checkpoint.hpp"
#include "test_util.hpp"

using namespace mgnn;

namespace {

Checkpoint sample_checkpoint() {
  std::mt19937_64 rng(60);
  Checkpoint c;
  c.config.dim = 4;
  c.config.depth = 1;
  c.config.max_len = 5;
  c.config.seed = 9;
  c.config.ablation = Ablation::no_gating;
  c.vocab = Vocabulary({"alpha", "beta", "gamma"});
  c.params = round_to_float(ModelParams::random(3, 4, rng));
  return c;
}

}  // namespace

TEST_CASE("round_to_float is idempotent and close") {
  std::mt19937_64 rng(61);
  const auto p = ModelParams::random(5, 3, rng);
  const auto r = round_to_float(p);
  CHECK(round_to_float(r) == r);
  for (std::size_t i = 0; i < p.embed.size(); ++i)
    CHECK(std::abs(p.embed.flat()[i] - r.embed.flat()[i]) <= 1e-7 * std::abs(p.embed.flat()[i]) + 1e-30);
}

TEST_CASE("checkpoint round trip is exact") {
  testutil::TempDir dir("ckpt");
  const auto c = sample_checkpoint();
  save_checkpoint(dir.file("m.ckpt"), c);
  const auto back = load_checkpoint(dir.file("m.ckpt"));
  CHECK(back.params == c.params);
  CHECK(back.vocab == c.vocab);
  CHECK(back.config.to_json() == c.config.to_json());

  const auto sidecar = nlohmann::json::parse(testutil::read_file(dir.file("m.ckpt.json")));
  CHECK(sidecar["dim"] == 4);
  CHECK(sidecar["ablation"] == "no-gating");

  // Saving what was loaded reproduces the same bytes.
  save_checkpoint(dir.file("again.ckpt"), back);
  CHECK(testutil::read_file(dir.file("again.ckpt")) == testutil::read_file(dir.file("m.ckpt")));
}

TEST_CASE("corrupt checkpoints are rejected") {
  testutil::TempDir dir("ckpt");
  save_checkpoint(dir.file("m.ckpt"), sample_checkpoint());
  const auto bytes = testutil::read_file(dir.file("m.ckpt"));

  auto version = bytes;
  version[4] = static_cast<char>(2);
  testutil::write_file(dir.file("v.ckpt"), version);
  CHECK_THROWS_WITH_AS(load_checkpoint(dir.file("v.ckpt")), doctest::Contains("version"), Error);

  auto magic = bytes;
  magic[0] = 'Z';
  testutil::write_file(dir.file("m2.ckpt"), magic);
  CHECK_THROWS_AS(load_checkpoint(dir.file("m2.ckpt")), Error);

  testutil::write_file(dir.file("t.ckpt"), bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(load_checkpoint(dir.file("t.ckpt")), Error);
  testutil::write_file(dir.file("x.ckpt"), bytes + "extra");
  CHECK_THROWS_AS(load_checkpoint(dir.file("x.ckpt")), Error);
  CHECK_THROWS_AS(load_checkpoint(dir.file("none.ckpt")), IoError);
}

TEST_CASE("shape mismatches cannot be saved") {
  testutil::TempDir dir("ckpt");
  auto c = sample_checkpoint();
  c.vocab = Vocabulary({"only"});
  CHECK_THROWS_AS(save_checkpoint(dir.file("bad.ckpt"), c), Error);
}
