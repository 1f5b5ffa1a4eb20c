#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

// UTF-8 helpers and the single text normalization shared by corpus
// generation, the tokenizer and inference.
namespace rlid::text {

// Byte offset of the first malformed sequence, or nullopt when `bytes` is
// valid UTF-8.
std::optional<std::size_t> find_invalid_utf8(std::string_view bytes);

// Decodes `bytes` into code points. Throws DataError naming the byte offset of
// the first malformed sequence.
std::vector<char32_t> decode_utf8(std::string_view bytes);

void append_utf8(std::string& out, char32_t cp);
std::string encode_utf8(char32_t cp);
std::string encode_utf8(const std::vector<char32_t>& cps);

std::size_t code_point_count(std::string_view bytes);

// Unicode NFC composition.
std::string nfc(std::string_view bytes);

// Full Unicode lowercase mapping (root locale).
std::string lowercase(std::string_view bytes);

// Trims, maps every whitespace run (tabs and newlines included) to one ASCII
// space.
std::string collapse_whitespace(std::string_view bytes);

// Lowercase, NFC, whitespace collapse. Idempotent.
std::string normalize(std::string_view bytes);

bool is_whitespace(char32_t cp);

// "U+0915" style rendering for diagnostics.
std::string describe_code_point(char32_t cp);

}  // namespace rlid::text
