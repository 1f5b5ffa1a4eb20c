#include "rlid/checkpoint.hpp"

#include <bit>
#include <cstring>

#include <json.hpp>

#include "rlid/error.hpp"
#include "rlid/io.hpp"

namespace rlid::train {

namespace {

constexpr std::size_t kPreambleSize = 16;

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

uint32_t get_u32(std::string_view bytes, std::size_t offset) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  return v;
}

std::string_view header_view(std::string_view bytes) {
  if (bytes.size() < kCheckpointMagic.size() || bytes.substr(0, kCheckpointMagic.size()) != kCheckpointMagic) {
    throw DataError("bad magic: not a checkpoint file");
  }
  if (bytes.size() < kPreambleSize) throw DataError("truncated payload: file ends inside the preamble");
  const uint32_t version = get_u32(bytes, 8);
  if (version != kCheckpointVersion) {
    throw DataError("unsupported version " + std::to_string(version) + " (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  const uint32_t header_len = get_u32(bytes, 12);
  if (bytes.size() - kPreambleSize < header_len) throw DataError("truncated payload: file ends inside the header");
  return bytes.substr(kPreambleSize, header_len);
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ck) {
  nlohmann::json manifest = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& t : ck.params) {
    const std::size_t length = t.size() * sizeof(float);
    manifest.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}, {"length", length}});
    offset += length;
  }
  const nlohmann::json header{{"format", "rlid-checkpoint"},
                              {"config", ck.config.to_json()},
                              {"labels", ck.labels.names()},
                              {"vocabulary", ck.vocab.to_json()},
                              {"tensors", manifest}};
  const std::string header_text = header.dump();

  std::string out;
  out.reserve(kPreambleSize + header_text.size() + offset);
  out += kCheckpointMagic;
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<uint32_t>(header_text.size()));
  out += header_text;
  for (const auto& t : ck.params) {
    for (float x : t.data) put_u32(out, std::bit_cast<uint32_t>(x));
  }
  return out;
}

std::string read_checkpoint_header(std::string_view bytes) { return std::string(header_view(bytes)); }

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  const std::string_view header_text = header_view(bytes);
  const std::string_view payload = bytes.substr(kPreambleSize + header_text.size());

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint header: ") + e.what());
  }

  Checkpoint ck;
  try {
    ck.config = model::ModelConfig::from_json(header.at("config"));
    ck.labels = LabelSet(header.at("labels").get<std::vector<std::string>>());
    ck.vocab = tokenizer::Vocabulary::from_json(header.at("vocabulary"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint header: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError(std::string("malformed checkpoint header: ") + e.what());
  }
  if (ck.labels.size() != ck.config.n_classes) {
    throw DataError("manifest mismatch: " + std::to_string(ck.labels.size()) + " labels for " +
                    std::to_string(ck.config.n_classes) + " classes");
  }
  if (ck.vocab.size() != ck.config.vocab_size) {
    throw DataError("manifest mismatch: vocabulary of " + std::to_string(ck.vocab.size()) + " tokens for vocab_size " +
                    std::to_string(ck.config.vocab_size));
  }

  const auto layout = model::parameter_layout(ck.config);
  const auto& manifest = header.at("tensors");
  if (!manifest.is_array() || manifest.size() != layout.size()) {
    throw DataError("manifest mismatch: expected " + std::to_string(layout.size()) + " tensors");
  }

  std::size_t expected_offset = 0;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& spec = layout[i];
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t offset = 0, length = 0;
    try {
      name = manifest[i].at("name").get<std::string>();
      shape = manifest[i].at("shape").get<std::vector<std::size_t>>();
      offset = manifest[i].at("offset").get<std::size_t>();
      length = manifest[i].at("length").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError("manifest mismatch: entry " + std::to_string(i) + ": " + e.what());
    }
    std::size_t elements = 1;
    for (auto d : spec.shape) elements *= d;
    if (name != spec.name) {
      throw DataError("manifest mismatch: entry " + std::to_string(i) + " is '" + name + "', expected '" + spec.name + "'");
    }
    if (shape != spec.shape || length != elements * sizeof(float) || offset != expected_offset) {
      throw DataError("manifest mismatch: tensor '" + name + "' disagrees with the model config (length " +
                      std::to_string(length) + ", expected " + std::to_string(elements * sizeof(float)) + ")");
    }
    if (offset + length > payload.size()) {
      throw DataError("truncated payload: tensor '" + name + "' extends past the end of the file");
    }
    std::vector<float> data(elements);
    for (std::size_t j = 0; j < elements; ++j) data[j] = std::bit_cast<float>(get_u32(payload, offset + 4 * j));
    ck.params.push_back({spec.name, spec.shape, spec.kind, std::move(data)});
    expected_offset += length;
  }
  if (expected_offset != payload.size()) {
    throw DataError("manifest mismatch: " + std::to_string(payload.size() - expected_offset) +
                    " trailing payload bytes");
  }
  if (!ck.params.all_finite()) throw DataError("checkpoint contains non-finite parameters");
  return ck;
}

void save_checkpoint(const model::ModelParameters& params, const model::ModelConfig& config,
                     const tokenizer::Vocabulary& vocab, const LabelSet& labels, const std::filesystem::path& path) {
  io::write_file(path, serialize_checkpoint({config, vocab, labels, params}));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = io::read_file(path);
  try {
    return deserialize_checkpoint(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace rlid::train
