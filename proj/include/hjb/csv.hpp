#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace hjb {

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

/// Parses a double written by format_double (also accepts "nan"/"inf").
double parse_double(std::string_view text);

std::vector<std::string_view> split_fields(std::string_view line, char delim = ',');

/// Writes `contents` to `path`, creating parent directories.
void write_text_file(const std::filesystem::path& path, std::string_view contents);
std::string read_text_file(const std::filesystem::path& path);

/// FNV-1a 64-bit digest rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view data);

} // namespace hjb
