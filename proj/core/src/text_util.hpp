#pragma once

// Small ASCII string helpers shared by the parsers. Not part of the public API.

#include <string>
#include <string_view>
#include <vector>

namespace graph_anchor::detail {

bool is_space(char c) noexcept;
std::string_view trim(std::string_view s) noexcept;
std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b) noexcept;
/// Case-insensitive (ASCII) find.
std::size_t ifind(std::string_view haystack, std::string_view needle,
                  std::size_t from = 0) noexcept;
bool istarts_with(std::string_view s, std::string_view prefix) noexcept;
std::vector<std::string_view> split_lines(std::string_view text);
std::size_t whitespace_token_count(std::string_view s) noexcept;
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace graph_anchor::detail
