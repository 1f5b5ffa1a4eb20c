#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "rlid/corpus.hpp"

// Character-level vocabulary and BERT-style framing: [CLS] chars... [SEP]
// followed by [PAD] up to a fixed length, with an attention mask over the
// framed span.
namespace rlid::tokenizer {

inline constexpr int32_t kPadId = 0;
inline constexpr int32_t kUnkId = 1;
inline constexpr int32_t kClsId = 2;
inline constexpr int32_t kSepId = 3;
inline constexpr std::size_t kNumSpecials = 4;
inline constexpr std::size_t kMinVocabSize = 5;
inline constexpr std::size_t kDefaultMaxLen = 64;

inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::string_view kSepToken = "[SEP]";

class Vocabulary {
 public:
  Vocabulary() = default;

  // Specials first, then `characters` in the given order. Each character must
  // be a single code point and appear once.
  static Vocabulary from_characters(const std::vector<std::string>& characters);

  std::size_t size() const { return id_to_token_.size(); }
  std::optional<int32_t> find(std::string_view token) const;
  int32_t id_or_unk(std::string_view token) const;
  const std::string& token(int32_t id) const;  // DataError when out of range
  const std::vector<std::string>& tokens() const { return id_to_token_; }
  static bool is_special(int32_t id) { return id >= 0 && id < static_cast<int32_t>(kNumSpecials); }

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& doc);
  std::string serialize() const;  // pretty JSON, trailing newline
  static Vocabulary deserialize(std::string_view content);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.id_to_token_ == b.id_to_token_; }

 private:
  std::unordered_map<std::string, int32_t> token_to_id_;
  std::vector<std::string> id_to_token_;
};

struct TokenSequence {
  std::vector<int32_t> ids;   // length max_len
  std::vector<uint8_t> mask;  // 1 for [CLS]..[SEP], 0 for padding
  std::size_t true_length = 0;

  std::size_t max_len() const { return ids.size(); }
  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

// Tokens are single code points of normalized text, ordered by descending
// frequency then ascending code point, truncated so that the vocabulary
// (specials included) has at most `max_size` entries. UsageError when
// max_size < 5, DataError on an empty corpus.
Vocabulary build_vocab(const std::vector<corpus::LabeledSentence>& corpus, std::size_t max_size);
Vocabulary build_vocab(const std::vector<std::string>& texts, std::size_t max_size);

// Never fails on text content; UsageError when max_len < 3.
TokenSequence encode(std::string_view text, const Vocabulary& vocab, std::size_t max_len = kDefaultMaxLen);

struct Decoded {
  std::string text;
  bool lossy = false;  // at least one [UNK] was rendered
};

// Concatenates non-special tokens within true_length; [UNK] renders as the
// literal "[UNK]" and sets `lossy`. DataError for ids outside the vocabulary.
Decoded decode(const TokenSequence& seq, const Vocabulary& vocab);

// Empty when `seq` satisfies every TokenSequence invariant, otherwise the
// first violation.
std::optional<std::string> check_sequence(const TokenSequence& seq, std::size_t vocab_size);

}  // namespace rlid::tokenizer
