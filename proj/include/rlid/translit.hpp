#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Rule-table romanization of native-script text.
//
// A table is a set of rewrite rules keyed by native-script source strings.
// Scanning is left to right and always takes the longest rule whose source
// matches at the current position. Rule classes carry the abugida logic:
// a CONSONANT gets the inherent vowel "a" unless the next match is a
// VOWEL_SIGN (which replaces it) or the VIRAMA (which suppresses it).
namespace rlid::translit {

enum class RuleClass { kStandalone, kConsonant, kVowelSign, kVirama };
enum class Script { kDevanagari, kCyrillic, kOther };
enum class PassThrough { kKeep, kDrop, kError };

inline constexpr std::string_view kInherentVowel = "a";

struct TransliterationRule {
  std::string source;  // UTF-8, non-empty
  std::string target;  // romanized alphabet only, may be empty
  RuleClass rule_class = RuleClass::kStandalone;

  friend bool operator==(const TransliterationRule&, const TransliterationRule&) = default;
};

std::string_view to_string(RuleClass c);
std::string_view to_string(Script s);
std::string_view to_string(PassThrough p);
RuleClass parse_rule_class(std::string_view name);
PassThrough parse_pass_through(std::string_view name);

struct Match {
  std::size_t rule_index = 0;
  std::size_t length = 0;  // in code points
};

class TransliterationTable {
 public:
  const std::vector<TransliterationRule>& rules() const { return rules_; }
  const TransliterationRule& rule(std::size_t i) const { return rules_[i]; }
  Script script() const { return script_; }
  PassThrough pass_through() const { return pass_through_; }
  std::size_t max_source_length() const { return max_source_length_; }

  // Longest rule whose source is a prefix of text[pos...].
  std::optional<Match> longest_match(std::span<const char32_t> text, std::size_t pos) const;

  TransliterationTable with_pass_through(PassThrough p) const;

 private:
  friend TransliterationTable compile_table(std::vector<TransliterationRule>, Script, PassThrough);

  // Code-point trie over rule sources; node 0 is the root.
  struct Node {
    std::vector<std::pair<char32_t, std::size_t>> children;  // sorted by code point
    std::optional<std::size_t> rule;
  };
  std::size_t child(std::size_t node, char32_t cp) const;  // 0 when absent

  std::vector<TransliterationRule> rules_;
  std::vector<Node> trie_;
  Script script_ = Script::kOther;
  PassThrough pass_through_ = PassThrough::kKeep;
  std::size_t max_source_length_ = 0;
};

// Throws DataError on an empty rule list, empty or duplicate source, target
// characters outside the romanized alphabet, or a Devanagari table without
// exactly one VIRAMA rule.
TransliterationTable compile_table(std::vector<TransliterationRule> rules, Script script,
                                   PassThrough pass_through = PassThrough::kKeep);

std::string transliterate(std::string_view text, const TransliterationTable& table);

// True iff every character is one of [a-z0-9], space, apostrophe, hyphen or
// . , ! ?
bool validate_latin(std::string_view text);
bool is_latin_char(char32_t cp);

// Parses `source<TAB>target<TAB>rule_class` lines ('#' comments and blank
// lines skipped). The script is inferred from the rule sources.
std::vector<TransliterationRule> parse_table(std::string_view content);
TransliterationTable load_table(const std::filesystem::path& path,
                                PassThrough pass_through = PassThrough::kKeep);

Script infer_script(const std::vector<TransliterationRule>& rules);

}  // namespace rlid::translit
