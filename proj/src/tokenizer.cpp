#include "rlid/tokenizer.hpp"

#include <algorithm>
#include <map>

#include "rlid/error.hpp"
#include "rlid/io.hpp"
#include "rlid/text.hpp"

namespace rlid::tokenizer {

namespace {

constexpr int kVocabFormatVersion = 1;
constexpr std::string_view kVocabFormat = "rlid-vocabulary";

}  // namespace

Vocabulary Vocabulary::from_characters(const std::vector<std::string>& characters) {
  Vocabulary v;
  for (auto special : {kPadToken, kUnkToken, kClsToken, kSepToken}) {
    v.token_to_id_.emplace(std::string(special), static_cast<int32_t>(v.id_to_token_.size()));
    v.id_to_token_.emplace_back(special);
  }
  for (const auto& c : characters) {
    if (text::code_point_count(c) != 1 || text::find_invalid_utf8(c)) {
      throw DataError("vocabulary token '" + c + "' is not a single character");
    }
    if (!v.token_to_id_.emplace(c, static_cast<int32_t>(v.id_to_token_.size())).second) {
      throw DataError("duplicate vocabulary token '" + c + "'");
    }
    v.id_to_token_.push_back(c);
  }
  return v;
}

std::optional<int32_t> Vocabulary::find(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  if (it == token_to_id_.end()) return std::nullopt;
  return it->second;
}

int32_t Vocabulary::id_or_unk(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw DataError("token id " + std::to_string(id) + " outside vocabulary of size " +
                    std::to_string(id_to_token_.size()));
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

nlohmann::json Vocabulary::to_json() const {
  return nlohmann::json{
      {"format", kVocabFormat},
      {"version", kVocabFormatVersion},
      {"specials", {{"pad", kPadId}, {"unk", kUnkId}, {"cls", kClsId}, {"sep", kSepId}}},
      {"tokens", id_to_token_},
  };
}

Vocabulary Vocabulary::from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format").get<std::string>() != kVocabFormat) throw DataError("not a vocabulary document");
    if (doc.at("version").get<int>() != kVocabFormatVersion) {
      throw DataError("unsupported vocabulary version " + doc.at("version").dump());
    }
    const auto& specials = doc.at("specials");
    if (specials.at("pad") != kPadId || specials.at("unk") != kUnkId || specials.at("cls") != kClsId ||
        specials.at("sep") != kSepId) {
      throw DataError("vocabulary special ids must be pad=0 unk=1 cls=2 sep=3");
    }
    const auto tokens = doc.at("tokens").get<std::vector<std::string>>();
    if (tokens.size() < kMinVocabSize) throw DataError("vocabulary needs at least 5 tokens");
    const std::vector<std::string_view> expected{kPadToken, kUnkToken, kClsToken, kSepToken};
    for (std::size_t i = 0; i < kNumSpecials; ++i) {
      if (tokens[i] != expected[i]) throw DataError("vocabulary token " + std::to_string(i) + " must be " + std::string(expected[i]));
    }
    return from_characters({tokens.begin() + kNumSpecials, tokens.end()});
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed vocabulary document: ") + e.what());
  }
}

std::string Vocabulary::serialize() const { return to_json().dump(2) + "\n"; }

Vocabulary Vocabulary::deserialize(std::string_view content) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(content);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed vocabulary document: ") + e.what());
  }
  return from_json(doc);
}

void Vocabulary::save(const std::filesystem::path& path) const { io::write_file(path, serialize()); }

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  const std::string content = io::read_file(path);
  try {
    return deserialize(content);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Vocabulary build_vocab(const std::vector<std::string>& texts, std::size_t max_size) {
  if (max_size < kMinVocabSize) throw UsageError("vocabulary max_size must be at least 5");
  if (texts.empty()) throw DataError("cannot build a vocabulary from an empty corpus");

  std::map<char32_t, std::size_t> counts;
  for (const auto& t : texts) {
    for (char32_t cp : text::decode_utf8(text::normalize(t))) ++counts[cp];
  }
  std::vector<std::pair<char32_t, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  const std::size_t keep = std::min(ranked.size(), max_size - kNumSpecials);
  std::vector<std::string> characters;
  characters.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) characters.push_back(text::encode_utf8(ranked[i].first));
  return Vocabulary::from_characters(characters);
}

Vocabulary build_vocab(const std::vector<corpus::LabeledSentence>& corpus, std::size_t max_size) {
  std::vector<std::string> texts;
  texts.reserve(corpus.size());
  for (const auto& s : corpus) texts.push_back(s.text);
  return build_vocab(texts, max_size);
}

TokenSequence encode(std::string_view input, const Vocabulary& vocab, std::size_t max_len) {
  if (max_len < 3) throw UsageError("max_len must be at least 3");
  const auto cps = text::decode_utf8(text::normalize(input));
  const std::size_t n_chars = std::min(cps.size(), max_len - 2);

  TokenSequence seq;
  seq.ids.assign(max_len, kPadId);
  seq.mask.assign(max_len, 0);
  seq.ids[0] = kClsId;
  for (std::size_t i = 0; i < n_chars; ++i) seq.ids[i + 1] = vocab.id_or_unk(text::encode_utf8(cps[i]));
  seq.ids[n_chars + 1] = kSepId;
  seq.true_length = n_chars + 2;
  std::fill(seq.mask.begin(), seq.mask.begin() + static_cast<std::ptrdiff_t>(seq.true_length), 1);
  return seq;
}

Decoded decode(const TokenSequence& seq, const Vocabulary& vocab) {
  Decoded out;
  const std::size_t n = std::min(seq.true_length, seq.ids.size());
  for (std::size_t i = 0; i < n; ++i) {
    const int32_t id = seq.ids[i];
    const std::string& token = vocab.token(id);
    if (id == kUnkId) {
      out.text += token;
      out.lossy = true;
    } else if (!Vocabulary::is_special(id)) {
      out.text += token;
    }
  }
  return out;
}

std::optional<std::string> check_sequence(const TokenSequence& seq, std::size_t vocab_size) {
  const std::size_t max_len = seq.ids.size();
  if (seq.mask.size() != max_len) return "mask length differs from ids length";
  if (max_len < 3) return "sequence shorter than 3";
  if (seq.true_length < 2 || seq.true_length > max_len) return "true_length out of range";
  if (seq.ids[0] != kClsId) return "sequence does not start with [CLS]";
  if (seq.ids[seq.true_length - 1] != kSepId) return "position true_length-1 is not [SEP]";
  for (std::size_t i = 0; i < max_len; ++i) {
    if (seq.ids[i] < 0 || static_cast<std::size_t>(seq.ids[i]) >= vocab_size) {
      return "id at position " + std::to_string(i) + " outside vocabulary";
    }
    const bool inside = i < seq.true_length;
    if (seq.mask[i] != (inside ? 1 : 0)) return "mask wrong at position " + std::to_string(i);
    if (!inside && seq.ids[i] != kPadId) return "padding position " + std::to_string(i) + " is not [PAD]";
  }
  return std::nullopt;
}

}  // namespace rlid::tokenizer
