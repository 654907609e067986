#include "mgnn/checkpoint.hpp"

#include <algorithm>
#include <fstream>

#include "binary_io.hpp"

namespace mgnn {

namespace {

constexpr char kMagic[4] = {'M', 'G', 'N', 'C'};

void put_block(std::ostream& out, std::span<const double> values) {
  for (double v : values) detail::put_f32(out, static_cast<float>(v));
}

void get_block(std::istream& in, std::span<double> values, const std::string& what) {
  for (auto& v : values) v = detail::get_f32(in, what);
}

}  // namespace

ModelParams round_to_float(ModelParams params) {
  const auto round = [](std::span<double> xs) {
    for (auto& x : xs) x = static_cast<double>(static_cast<float>(x));
  };
  round(params.embed.flat());
  round(params.gate);
  round(params.bilinear.flat());
  return params;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const auto& p = ckpt.params;
  if (p.num_items() != ckpt.vocab.size())
    throw Error("checkpoint: vocabulary has " + std::to_string(ckpt.vocab.size()) + " keys but the model has " +
                std::to_string(p.num_items()) + " items");
  if (p.dim() != ckpt.config.dim) throw Error("checkpoint: model dimension differs from config");

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path, "cannot write");
  out.write(kMagic, 4);
  detail::put_le(out, kCheckpointVersion);
  detail::put_le(out, static_cast<std::uint64_t>(p.dim()));
  detail::put_le(out, static_cast<std::uint64_t>(p.num_items()));
  detail::put_le(out, static_cast<std::uint32_t>(ckpt.config.depth));
  detail::put_le(out, static_cast<std::uint32_t>(ckpt.config.max_len));
  detail::put_le(out, static_cast<std::uint64_t>(ckpt.config.seed));
  const auto config_json = ckpt.config.to_json();
  detail::put_string(out, config_json);
  detail::put_le(out, static_cast<std::uint64_t>(ckpt.vocab.size()));
  for (const auto& k : ckpt.vocab.keys()) detail::put_string(out, k);
  put_block(out, p.embed.flat());
  put_block(out, p.gate);
  put_block(out, p.bilinear.flat());
  if (!out) throw IoError(path, "write failed");

  std::ofstream side(path + ".json", std::ios::binary);
  if (!side) throw IoError(path + ".json", "cannot write");
  side << config_json << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open");
  char magic[4];
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) throw Error(path + ": not a checkpoint file");
  const auto version = detail::get_le<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion)
    throw Error(path + ": checkpoint version " + std::to_string(version) + " is not supported (expected " +
                std::to_string(kCheckpointVersion) + ")");
  const auto dim = detail::get_le<std::uint64_t>(in, "dimension");
  const auto items = detail::get_le<std::uint64_t>(in, "item count");
  const auto depth = detail::get_le<std::uint32_t>(in, "depth");
  const auto max_len = detail::get_le<std::uint32_t>(in, "max length");
  const auto seed = detail::get_le<std::uint64_t>(in, "seed");
  if (dim == 0 || dim > (1u << 16) || items > (std::uint64_t{1} << 32)) throw Error(path + ": implausible dimensions");

  Checkpoint ckpt;
  ckpt.config = TrainConfig::from_json(detail::get_string(in, "config"));
  if (ckpt.config.dim != dim || ckpt.config.depth != depth || ckpt.config.max_len != max_len ||
      ckpt.config.seed != seed)
    throw Error(path + ": header dimensions disagree with the embedded config");

  const auto n_keys = detail::get_le<std::uint64_t>(in, "key count");
  if (n_keys != items) throw Error(path + ": vocabulary size differs from item count");
  std::vector<std::string> keys;
  keys.reserve(n_keys);
  for (std::uint64_t i = 0; i < n_keys; ++i) keys.push_back(detail::get_string(in, "vocabulary key"));
  ckpt.vocab = Vocabulary(std::move(keys));

  ckpt.params = ModelParams::zeros(items, dim);
  get_block(in, ckpt.params.embed.flat(), "embeddings");
  get_block(in, ckpt.params.gate, "gate");
  get_block(in, ckpt.params.bilinear.flat(), "bilinear");
  if (in.peek() != std::char_traits<char>::eof()) throw Error(path + ": trailing bytes after parameters");
  return ckpt;
}

}  // namespace mgnn
