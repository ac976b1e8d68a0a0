#pragma once

#include <charconv>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "logonet/error.hpp"

namespace logonet {

/// Helpers for the key=value text used by config files and checkpoints.

std::string_view trim(std::string_view s);
std::vector<std::string_view> split_list(std::string_view text, char separator = ',');

/// Non-empty, non-comment lines of `text` as (key, value) pairs, trimmed.
/// Lines starting with '#' are comments. Throws ConfigError on a line
/// without '='.
std::vector<std::pair<std::string_view, std::string_view>> parse_assignments(std::string_view text);

template <typename Int>
Int parse_int(std::string_view key, std::string_view text) {
  Int value{};
  text = trim(text);
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError("config key '" + std::string(key) + "': expected an integer, got '" +
                      std::string(text) + "'");
  }
  return value;
}

double parse_real(std::string_view key, std::string_view text);
bool parse_bool(std::string_view key, std::string_view text);

/// Shortest text that parses back to the same double.
std::string format_real(double value);

}  // namespace logonet
