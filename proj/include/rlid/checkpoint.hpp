#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "rlid/labels.hpp"
#include "rlid/model.hpp"
#include "rlid/tokenizer.hpp"

// Checkpoint file layout (all integers little-endian):
//
//   bytes 0..7    "RLIDCKPT"
//   bytes 8..11   u32 format version (1)
//   bytes 12..15  u32 header length N
//   next N bytes  UTF-8 JSON header: config, labels, vocabulary and a tensor
//                 manifest {name, shape, offset, length}; offsets are relative
//                 to the first payload byte
//   rest          float32 payloads in manifest order
namespace rlid::train {

inline constexpr std::string_view kCheckpointMagic = "RLIDCKPT";
inline constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  model::ModelConfig config;
  tokenizer::Vocabulary vocab;
  LabelSet labels;
  model::ModelParameters params;
};

std::string serialize_checkpoint(const Checkpoint& checkpoint);

// DataError whose message starts with "bad magic", "unsupported version",
// "truncated payload" or "manifest mismatch".
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const model::ModelParameters& params, const model::ModelConfig& config,
                     const tokenizer::Vocabulary& vocab, const LabelSet& labels, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// The JSON header alone, for inspection.
std::string read_checkpoint_header(std::string_view bytes);

}  // namespace rlid::train
