#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "rlid/text.hpp"
#include "rlid/translit.hpp"

namespace testing {

// Reference longest match: try every rule at `pos`, keep the longest source.
inline std::optional<rlid::translit::Match> brute_force_match(const std::vector<rlid::translit::TransliterationRule>& rules,
                                                              const std::vector<char32_t>& text, std::size_t pos) {
  std::optional<rlid::translit::Match> best;
  for (std::size_t r = 0; r < rules.size(); ++r) {
    const auto src = rlid::text::decode_utf8(rules[r].source);
    if (pos + src.size() > text.size()) continue;
    if (!std::equal(src.begin(), src.end(), text.begin() + static_cast<std::ptrdiff_t>(pos))) continue;
    if (!best || src.size() > best->length) best = rlid::translit::Match{r, src.size()};
  }
  return best;
}

// Scans `s` position by position with the reference matcher and checks the
// table's own matcher and transliterate() against it.
inline bool agrees_with_brute_force(const rlid::translit::TransliterationTable& table, const std::vector<char32_t>& s) {
  std::string expected;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const auto want = brute_force_match(table.rules(), s, pos);
    const auto got = table.longest_match(s, pos);
    if (want.has_value() != got.has_value()) return false;
    if (!want) {
      rlid::text::append_utf8(expected, s[pos]);
      ++pos;
      continue;
    }
    if (got->length != want->length || got->rule_index != want->rule_index) return false;
    expected += table.rule(want->rule_index).target;
    pos += want->length;
  }
  return rlid::translit::transliterate(rlid::text::encode_utf8(s), table) == expected;
}

}  // namespace testing
