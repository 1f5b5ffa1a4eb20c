#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "rlid/labels.hpp"
#include "rlid/provider.hpp"
#include "rlid/translit.hpp"

// Source-corpus ingestion, filtering, labeled dataset generation
// (translate, then romanize) and dataset files/splits.
namespace rlid::corpus {

struct RawSentence {
  std::string text;
  std::size_t source_index = 0;

  friend bool operator==(const RawSentence&, const RawSentence&) = default;
};

struct LabeledSentence {
  std::string text;  // romanized alphabet only, non-empty
  LanguageLabel label;

  friend bool operator==(const LabeledSentence&, const LabeledSentence&) = default;
};

struct DatasetSplit {
  std::vector<LabeledSentence> train;
  std::vector<LabeledSentence> validation;
  uint64_t seed = 0;
  double ratio = 0.8;
};

enum class CorpusFormat { kPlainLines, kTsvColumn };
CorpusFormat parse_corpus_format(std::string_view name);  // "plain-lines" | "tsv-column"

// One RawSentence per line, indexed in file order. For plain-lines, tabs are
// replaced by single spaces; for tsv-column the 0-based `column` is taken.
// DataError on I/O failure, malformed UTF-8 (with byte offset) or a missing
// column (with line number).
std::vector<RawSentence> parse_corpus(std::string_view content, CorpusFormat format,
                                      std::size_t column = 0);
std::vector<RawSentence> load_corpus(const std::filesystem::path& path, CorpusFormat format,
                                     std::size_t column = 0);

enum class Charset { kAny, kRomanized };
Charset parse_charset(std::string_view name);  // "any" | "romanized"

struct FilterRules {
  std::size_t min_chars = 3;    // code points, after whitespace cleanup
  std::size_t max_chars = 200;
  Charset allowed_charset = Charset::kAny;  // kRomanized: lowercased text passes validate_latin
  bool dedup = true;
  bool collapse_whitespace = true;

  static FilterRules no_op();
  void validate() const;  // UsageError unless 1 <= min_chars <= max_chars
};

std::vector<RawSentence> filter_sentences(const std::vector<RawSentence>& sentences, const FilterRules& rules);

enum class OnProviderError { kAbort, kSkip };

struct GenerateOptions {
  // The label whose text is the (normalized) source itself; it needs neither a
  // provider route nor a table.
  std::string source_label = "english";
  OnProviderError on_provider_error = OnProviderError::kAbort;
};

struct GenerationStats {
  std::vector<std::size_t> produced;           // per label id
  std::vector<std::size_t> dropped_empty;      // romanized output was empty
  std::vector<std::size_t> provider_failures;  // skipped under kSkip
  std::size_t stripped_chars = 0;              // characters outside the romanized alphabet

  std::size_t total_produced() const;
  std::size_t total_dropped() const;
};

struct GenerationResult {
  std::vector<LabeledSentence> pairs;
  GenerationStats stats;
};

// Reduces romanized text to the dataset alphabet: normalize, remove every
// character validate_latin rejects, collapse whitespace again.
std::string to_dataset_text(std::string_view text, std::size_t* stripped = nullptr);

// For every source and every label: the source label yields the normalized
// source; any other label yields transliterate(translate(source)) through the
// label's table. Output is grouped by source_index, then label id.
GenerationResult generate_dataset(const std::vector<RawSentence>& sources, const LabelSet& labels,
                                  provider::TranslationProvider& provider,
                                  const std::map<std::string, translit::TransliterationTable>& tables,
                                  const GenerateOptions& options = {});

// Seeded uniform shuffle, first round(ratio * N) records become train.
DatasetSplit split_dataset(const std::vector<LabeledSentence>& pairs, double ratio, uint64_t seed);

// `text<TAB>label-name` lines, LF endings, no header.
std::string format_dataset(const std::vector<LabeledSentence>& pairs);
std::vector<LabeledSentence> parse_dataset(std::string_view content, const LabelSet& labels);
void write_dataset(const std::vector<LabeledSentence>& pairs, const std::filesystem::path& path);
std::vector<LabeledSentence> read_dataset(const std::filesystem::path& path, const LabelSet& labels);

}  // namespace rlid::corpus
