#include "swm/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <map>
#include "json.hpp"
#include <vector>

namespace swm {

namespace {

constexpr char kMagic[8] = {'S', 'W', 'M', 'C', 'K', 'P', 'T', '\n'};

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

std::uint64_t get_u64(const unsigned char* b) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

nlohmann::json config_json(const SwmConfig& c) {
  return {{"word_vocab_size", c.word_vocab_size},
          {"sememe_vocab_size", c.sememe_vocab_size},
          {"word_dim", c.word_dim},
          {"sememe_dim", c.sememe_dim},
          {"hidden", c.hidden},
          {"attention_dim", c.attention_dim},
          {"num_classes", c.num_classes},
          {"dropout", c.dropout},
          {"max_length", c.max_length}};
}

SwmConfig config_from_json(const nlohmann::json& j) {
  SwmConfig c;
  c.word_vocab_size = j.at("word_vocab_size").get<std::size_t>();
  c.sememe_vocab_size = j.at("sememe_vocab_size").get<std::size_t>();
  c.word_dim = j.at("word_dim").get<std::size_t>();
  c.sememe_dim = j.at("sememe_dim").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.attention_dim = j.at("attention_dim").get<std::size_t>();
  c.num_classes = j.at("num_classes").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  c.max_length = j.at("max_length").get<std::size_t>();
  return c;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  nlohmann::json arrays = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, p] : ckpt.params.named()) {
    arrays.push_back({{"name", name}, {"shape", p->shape()}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(p->size()) * 8;
  }
  nlohmann::json header = {{"format_version", kCheckpointVersion},
                           {"config", config_json(ckpt.config)},
                           {"variant", std::string(variant_name(ckpt.variant))},
                           {"word_vocab", ckpt.word_vocab.tokens()},
                           {"sememe_vocab", ckpt.sememe_vocab.tokens()},
                           {"arrays", arrays}};
  const std::string text = header.dump();
  out.write(kMagic, sizeof kMagic);
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, p] : ckpt.params.named()) {
    const double* d = p->values().data();
    for (ad::Index i = 0; i < p->size(); ++i) put_u64(out, std::bit_cast<std::uint64_t>(d[i]));
  }
  if (!out) throw CheckpointError("failed writing checkpoint");
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open '" + path + "' for writing");
  write_checkpoint(out, ckpt);
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || !std::equal(magic, magic + 8, kMagic)) throw CheckpointError("not a checkpoint (bad magic)");
  unsigned char len_bytes[8];
  if (!in.read(reinterpret_cast<char*>(len_bytes), 8)) throw CheckpointError("truncated checkpoint header");
  const std::uint64_t len = get_u64(len_bytes);
  if (len > (1ull << 32)) throw CheckpointError("implausible checkpoint header length");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw CheckpointError("truncated checkpoint header");
  std::vector<char> payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  }
  try {
    const int version = header.at("format_version").get<int>();
    if (version != kCheckpointVersion)
      throw CheckpointError("unsupported checkpoint format_version " + std::to_string(version));
    SwmConfig config = config_from_json(header.at("config"));
    config.validate();
    auto variant = parse_variant(header.at("variant").get<std::string>());
    if (!variant) throw CheckpointError("unknown variant in checkpoint");
    auto words = Vocabulary::from_tokens(header.at("word_vocab").get<std::vector<std::string>>());
    auto sememes = Vocabulary::from_tokens(header.at("sememe_vocab").get<std::vector<std::string>>());
    if (words.size() != config.word_vocab_size)
      throw CheckpointError("word_vocab has " + std::to_string(words.size()) + " tokens, config says " +
                            std::to_string(config.word_vocab_size));
    if (sememes.size() != config.sememe_vocab_size)
      throw CheckpointError("sememe_vocab has " + std::to_string(sememes.size()) + " tokens, config says " +
                            std::to_string(config.sememe_vocab_size));

    std::map<std::string, std::pair<ad::Shape, std::uint64_t>> stored;
    for (const auto& a : header.at("arrays"))
      stored[a.at("name").get<std::string>()] = {a.at("shape").get<ad::Shape>(), a.at("offset").get<std::uint64_t>()};

    SwmParams params(config);
    for (auto& [name, p] : params.named()) {
      auto it = stored.find(name);
      if (it == stored.end()) throw CheckpointError("checkpoint is missing parameter '" + name + "'");
      const auto& [shape, offset] = it->second;
      if (shape != p->shape())
        throw CheckpointError("parameter '" + name + "' has shape " + ad::to_string(shape) + ", config implies " +
                              ad::to_string(p->shape()));
      const std::uint64_t bytes = static_cast<std::uint64_t>(p->size()) * 8;
      if (offset + bytes > payload.size()) throw CheckpointError("payload truncated at parameter '" + name + "'");
      double* d = p->values().data();
      const auto* src = reinterpret_cast<const unsigned char*>(payload.data() + offset);
      for (ad::Index i = 0; i < p->size(); ++i) d[i] = std::bit_cast<double>(get_u64(src + 8 * i));
    }
    return Checkpoint(config, *variant, std::move(words), std::move(sememes), std::move(params));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(e.what());
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  return read_checkpoint(in);
}

}  // namespace swm
