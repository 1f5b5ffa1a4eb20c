#include "rlid/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "rlid/error.hpp"
#include "rlid/io.hpp"
#include "rlid/random.hpp"
#include "rlid/text.hpp"

namespace rlid::corpus {

CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "plain-lines") return CorpusFormat::kPlainLines;
  if (name == "tsv-column") return CorpusFormat::kTsvColumn;
  throw UsageError("unknown corpus format '" + std::string(name) + "' (plain-lines, tsv-column)");
}

std::vector<RawSentence> parse_corpus(std::string_view content, CorpusFormat format, std::size_t column) {
  if (auto bad = text::find_invalid_utf8(content)) {
    throw DataError("malformed UTF-8 at byte offset " + std::to_string(*bad));
  }
  std::vector<RawSentence> out;
  const auto lines = io::split_lines(content);
  out.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string record;
    if (format == CorpusFormat::kPlainLines) {
      record = std::string(lines[i]);
      std::replace(record.begin(), record.end(), '\t', ' ');
    } else {
      const auto fields = io::split(lines[i], '\t');
      if (column >= fields.size()) {
        throw DataError("line " + std::to_string(i + 1) + ": no column " + std::to_string(column) + " (found " +
                        std::to_string(fields.size()) + ")");
      }
      record = std::string(fields[column]);
    }
    out.push_back({std::move(record), i});
  }
  return out;
}

std::vector<RawSentence> load_corpus(const std::filesystem::path& path, CorpusFormat format, std::size_t column) {
  const std::string content = io::read_file(path);
  try {
    return parse_corpus(content, format, column);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Charset parse_charset(std::string_view name) {
  if (name == "any") return Charset::kAny;
  if (name == "romanized") return Charset::kRomanized;
  throw UsageError("unknown charset '" + std::string(name) + "' (any, romanized)");
}

FilterRules FilterRules::no_op() {
  FilterRules rules;
  rules.min_chars = 1;
  rules.max_chars = SIZE_MAX;
  rules.allowed_charset = Charset::kAny;
  rules.dedup = false;
  rules.collapse_whitespace = false;
  return rules;
}

void FilterRules::validate() const {
  if (min_chars < 1) throw UsageError("min_chars must be at least 1");
  if (min_chars > max_chars) throw UsageError("min_chars must not exceed max_chars");
}

std::vector<RawSentence> filter_sentences(const std::vector<RawSentence>& sentences, const FilterRules& rules) {
  rules.validate();
  std::vector<RawSentence> out;
  std::unordered_set<std::string> seen;
  for (const auto& sentence : sentences) {
    std::string cleaned = rules.collapse_whitespace ? text::collapse_whitespace(sentence.text) : sentence.text;
    const std::size_t n = text::code_point_count(cleaned);
    if (n < rules.min_chars || n > rules.max_chars) continue;
    if (rules.allowed_charset == Charset::kRomanized && !translit::validate_latin(text::lowercase(cleaned))) {
      continue;
    }
    if (rules.dedup && !seen.insert(cleaned).second) continue;
    out.push_back({std::move(cleaned), sentence.source_index});
  }
  return out;
}

std::size_t GenerationStats::total_produced() const {
  return std::accumulate(produced.begin(), produced.end(), std::size_t{0});
}

std::size_t GenerationStats::total_dropped() const {
  return std::accumulate(dropped_empty.begin(), dropped_empty.end(), std::size_t{0}) +
         std::accumulate(provider_failures.begin(), provider_failures.end(), std::size_t{0});
}

std::string to_dataset_text(std::string_view raw, std::size_t* stripped) {
  const std::string normalized = text::normalize(raw);
  std::string kept;
  kept.reserve(normalized.size());
  for (char32_t cp : text::decode_utf8(normalized)) {
    if (translit::is_latin_char(cp)) {
      kept.push_back(static_cast<char>(cp));
    } else if (stripped != nullptr) {
      ++*stripped;
    }
  }
  return text::collapse_whitespace(kept);
}

GenerationResult generate_dataset(const std::vector<RawSentence>& sources, const LabelSet& labels,
                                  provider::TranslationProvider& provider,
                                  const std::map<std::string, translit::TransliterationTable>& tables,
                                  const GenerateOptions& options) {
  for (const auto& label : labels) {
    if (label.name != options.source_label && !tables.contains(label.name)) {
      throw UsageError("no transliteration table for label '" + label.name + "'");
    }
  }

  GenerationResult result;
  auto& stats = result.stats;
  stats.produced.assign(labels.size(), 0);
  stats.dropped_empty.assign(labels.size(), 0);
  stats.provider_failures.assign(labels.size(), 0);

  std::vector<const RawSentence*> ordered;
  ordered.reserve(sources.size());
  for (const auto& s : sources) ordered.push_back(&s);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const RawSentence* a, const RawSentence* b) { return a->source_index < b->source_index; });

  result.pairs.reserve(sources.size() * labels.size());
  for (const RawSentence* source : ordered) {
    for (const auto& label : labels) {
      const auto id = static_cast<std::size_t>(label.id);
      std::string romanized;
      if (label.name == options.source_label) {
        romanized = to_dataset_text(source->text, &stats.stripped_chars);
      } else {
        std::string native;
        try {
          native = provider.translate({source->text, label});
        } catch (const DataError&) {
          if (options.on_provider_error == OnProviderError::kAbort) throw;
          ++stats.provider_failures[id];
          continue;
        }
        const auto& table = tables.at(label.name);
        romanized = to_dataset_text(translit::transliterate(text::normalize(native), table), &stats.stripped_chars);
      }
      if (romanized.empty()) {
        ++stats.dropped_empty[id];
        continue;
      }
      ++stats.produced[id];
      result.pairs.push_back({std::move(romanized), label});
    }
  }
  return result;
}

DatasetSplit split_dataset(const std::vector<LabeledSentence>& pairs, double ratio, uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw UsageError("split ratio must lie strictly between 0 and 1");
  if (pairs.empty()) throw DataError("cannot split an empty dataset");

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);

  const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(pairs.size())));
  DatasetSplit split;
  split.seed = seed;
  split.ratio = ratio;
  split.train.reserve(n_train);
  split.validation.reserve(pairs.size() - n_train);
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? split.train : split.validation).push_back(pairs[order[i]]);
  }
  return split;
}

std::string format_dataset(const std::vector<LabeledSentence>& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    if (p.text.find_first_of("\t\n") != std::string::npos) {
      throw DataError("dataset text may not contain tabs or newlines: '" + p.text + "'");
    }
    out += p.text;
    out += '\t';
    out += p.label.name;
    out += '\n';
  }
  return out;
}

std::vector<LabeledSentence> parse_dataset(std::string_view content, const LabelSet& labels) {
  std::vector<LabeledSentence> out;
  const auto lines = io::split_lines(content);
  out.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string where = "line " + std::to_string(i + 1) + ": ";
    const auto tab = lines[i].rfind('\t');
    if (tab == std::string_view::npos) throw DataError(where + "missing tab between text and label");
    const auto text_part = lines[i].substr(0, tab);
    const auto label_part = lines[i].substr(tab + 1);
    if (text_part.empty()) throw DataError(where + "empty text");
    if (!translit::validate_latin(text_part)) {
      throw DataError(where + "text contains characters outside the romanized alphabet");
    }
    auto label = labels.find(label_part);
    if (!label) throw DataError(where + "unknown label '" + std::string(label_part) + "'");
    out.push_back({std::string(text_part), *label});
  }
  return out;
}

void write_dataset(const std::vector<LabeledSentence>& pairs, const std::filesystem::path& path) {
  io::write_file(path, format_dataset(pairs));
}

std::vector<LabeledSentence> read_dataset(const std::filesystem::path& path, const LabelSet& labels) {
  const std::string content = io::read_file(path);
  try {
    return parse_dataset(content, labels);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace rlid::corpus
