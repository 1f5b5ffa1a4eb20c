#include "rlid/translit.hpp"

#include <algorithm>

#include "rlid/error.hpp"
#include "rlid/io.hpp"
#include "rlid/text.hpp"

namespace rlid::translit {

std::string_view to_string(RuleClass c) {
  switch (c) {
    case RuleClass::kStandalone: return "STANDALONE";
    case RuleClass::kConsonant: return "CONSONANT";
    case RuleClass::kVowelSign: return "VOWEL_SIGN";
    case RuleClass::kVirama: return "VIRAMA";
  }
  return "?";
}

std::string_view to_string(Script s) {
  switch (s) {
    case Script::kDevanagari: return "devanagari";
    case Script::kCyrillic: return "cyrillic";
    case Script::kOther: return "other";
  }
  return "?";
}

std::string_view to_string(PassThrough p) {
  switch (p) {
    case PassThrough::kKeep: return "keep";
    case PassThrough::kDrop: return "drop";
    case PassThrough::kError: return "error";
  }
  return "?";
}

RuleClass parse_rule_class(std::string_view name) {
  if (name == "STANDALONE") return RuleClass::kStandalone;
  if (name == "CONSONANT") return RuleClass::kConsonant;
  if (name == "VOWEL_SIGN") return RuleClass::kVowelSign;
  if (name == "VIRAMA") return RuleClass::kVirama;
  throw DataError("unknown rule class '" + std::string(name) + "'");
}

PassThrough parse_pass_through(std::string_view name) {
  if (name == "keep") return PassThrough::kKeep;
  if (name == "drop") return PassThrough::kDrop;
  if (name == "error") return PassThrough::kError;
  throw UsageError("unknown pass-through policy '" + std::string(name) + "' (keep, drop, error)");
}

bool is_latin_char(char32_t cp) {
  return (cp >= U'a' && cp <= U'z') || (cp >= U'0' && cp <= U'9') || cp == U' ' || cp == U'\'' ||
         cp == U'-' || cp == U'.' || cp == U',' || cp == U'!' || cp == U'?';
}

bool validate_latin(std::string_view text) {
  // Every permitted character is ASCII, so a byte scan suffices: any byte of a
  // multi-byte sequence fails the check.
  return std::all_of(text.begin(), text.end(),
                     [](char c) { return is_latin_char(static_cast<unsigned char>(c)); });
}

std::size_t TransliterationTable::child(std::size_t node, char32_t cp) const {
  const auto& children = trie_[node].children;
  auto it = std::lower_bound(children.begin(), children.end(), cp,
                             [](const auto& entry, char32_t key) { return entry.first < key; });
  return (it != children.end() && it->first == cp) ? it->second : 0;
}

std::optional<Match> TransliterationTable::longest_match(std::span<const char32_t> text,
                                                         std::size_t pos) const {
  std::optional<Match> best;
  std::size_t node = 0;
  for (std::size_t i = pos; i < text.size(); ++i) {
    node = child(node, text[i]);
    if (node == 0) break;
    if (trie_[node].rule) best = Match{*trie_[node].rule, i - pos + 1};
  }
  return best;
}

TransliterationTable TransliterationTable::with_pass_through(PassThrough p) const {
  TransliterationTable copy = *this;
  copy.pass_through_ = p;
  return copy;
}

TransliterationTable compile_table(std::vector<TransliterationRule> rules, Script script,
                                   PassThrough pass_through) {
  if (rules.empty()) throw DataError("transliteration table has no rules");

  TransliterationTable table;
  table.script_ = script;
  table.pass_through_ = pass_through;
  table.trie_.emplace_back();

  std::size_t viramas = 0;
  for (std::size_t r = 0; r < rules.size(); ++r) {
    const auto& rule = rules[r];
    if (rule.source.empty()) throw DataError("rule " + std::to_string(r + 1) + " has an empty source");
    if (!validate_latin(rule.target)) {
      throw DataError("rule for '" + rule.source + "' has target '" + rule.target +
                      "' outside the romanized alphabet");
    }
    if (rule.rule_class == RuleClass::kVirama) ++viramas;

    const auto cps = text::decode_utf8(rule.source);
    std::size_t node = 0;
    for (char32_t cp : cps) {
      std::size_t next = table.child(node, cp);
      if (next == 0) {
        next = table.trie_.size();
        table.trie_.emplace_back();
        auto& children = table.trie_[node].children;
        auto it = std::lower_bound(children.begin(), children.end(), cp,
                                   [](const auto& entry, char32_t key) { return entry.first < key; });
        children.insert(it, {cp, next});
      }
      node = next;
    }
    if (table.trie_[node].rule) throw DataError("duplicate rule source '" + rule.source + "'");
    table.trie_[node].rule = r;
    table.max_source_length_ = std::max(table.max_source_length_, cps.size());
  }
  if (script == Script::kDevanagari && viramas != 1) {
    throw DataError("a Devanagari table needs exactly one VIRAMA rule, found " + std::to_string(viramas));
  }
  table.rules_ = std::move(rules);
  return table;
}

std::string transliterate(std::string_view input, const TransliterationTable& table) {
  const auto cps = text::decode_utf8(input);
  std::string out;
  out.reserve(input.size());

  std::size_t pos = 0;
  std::size_t byte_offset = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) byte_offset += text::encode_utf8(cps[pos + i]).size();
    pos += n;
  };

  while (pos < cps.size()) {
    const auto match = table.longest_match(cps, pos);
    if (!match) {
      switch (table.pass_through()) {
        case PassThrough::kKeep: text::append_utf8(out, cps[pos]); break;
        case PassThrough::kDrop: break;
        case PassThrough::kError:
          throw DataError("no transliteration rule for " + text::describe_code_point(cps[pos]) +
                          " at byte offset " + std::to_string(byte_offset));
      }
      advance(1);
      continue;
    }

    const auto& rule = table.rule(match->rule_index);
    advance(match->length);
    // An orphan VIRAMA contributes its (normally empty) target like any
    // other standalone rule.
    out += rule.target;
    if (rule.rule_class != RuleClass::kConsonant) continue;

    const auto next = table.longest_match(cps, pos);
    const RuleClass next_class =
        next ? table.rule(next->rule_index).rule_class : RuleClass::kStandalone;
    if (next_class == RuleClass::kVowelSign) {
      out += table.rule(next->rule_index).target;
      advance(next->length);
    } else if (next_class == RuleClass::kVirama) {
      advance(next->length);
    } else {
      out += kInherentVowel;
    }
  }
  return out;
}

Script infer_script(const std::vector<TransliterationRule>& rules) {
  std::size_t devanagari = 0;
  std::size_t cyrillic = 0;
  for (const auto& rule : rules) {
    for (char32_t cp : text::decode_utf8(rule.source)) {
      if (cp >= 0x0900 && cp <= 0x097F) ++devanagari;
      if (cp >= 0x0400 && cp <= 0x04FF) ++cyrillic;
    }
  }
  if (devanagari == 0 && cyrillic == 0) return Script::kOther;
  return devanagari >= cyrillic ? Script::kDevanagari : Script::kCyrillic;
}

std::vector<TransliterationRule> parse_table(std::string_view content) {
  if (auto bad = text::find_invalid_utf8(content)) {
    throw DataError("malformed UTF-8 at byte offset " + std::to_string(*bad));
  }
  std::vector<TransliterationRule> rules;
  const auto lines = io::split_lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = lines[i];
    if (line.empty() || line.front() == '#') continue;
    const auto fields = io::split(line, '\t');
    const std::string where = "line " + std::to_string(i + 1) + ": ";
    if (fields.size() != 3) {
      throw DataError(where + "expected 3 tab-separated fields (source, target, rule_class), found " +
                      std::to_string(fields.size()));
    }
    try {
      rules.push_back({std::string(fields[0]), std::string(fields[1]), parse_rule_class(fields[2])});
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
  }
  if (rules.empty()) throw DataError("no rules");
  return rules;
}

TransliterationTable load_table(const std::filesystem::path& path, PassThrough pass_through) {
  const std::string content = io::read_file(path);
  try {
    auto rules = parse_table(content);
    const Script script = infer_script(rules);
    return compile_table(std::move(rules), script, pass_through);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace rlid::translit
