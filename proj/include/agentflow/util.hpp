// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace agentflow::util {

/// FNV-1a, 64-bit. Stable across platforms and runs.
std::uint64_t fnv1a64(std::string_view text);
std::string hex64(std::uint64_t value);

std::string trim(std::string_view text);
std::string to_lower(std::string_view text);
bool iequals(std::string_view a, std::string_view b);
bool starts_with_icase(std::string_view text, std::string_view prefix);
std::vector<std::string> split_lines(std::string_view text);

/// First `limit` characters, with a marker appended when anything was cut.
std::string truncate(std::string_view text, std::size_t limit, std::string_view marker);

std::string iso8601_now();

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

} // namespace agentflow::util
