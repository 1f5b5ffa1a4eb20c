#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace rlid::io {

// Whole-file read; DataError naming the path on failure.
std::string read_file(const std::filesystem::path& path);

// Writes via a sibling temporary file and rename, so readers never observe a
// partial file.
void write_file(const std::filesystem::path& path, std::string_view content);

// Splits on '\n'. A trailing newline does not produce an extra empty line and
// a '\r' before the newline is dropped.
std::vector<std::string_view> split_lines(std::string_view content);

std::vector<std::string_view> split(std::string_view s, char sep);

}  // namespace rlid::io
