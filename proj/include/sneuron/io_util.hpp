#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace sneuron {

// Whole-file read. Missing or unreadable paths raise a Usage error.
std::string read_file(const std::filesystem::path& path);

std::vector<std::string> read_lines(const std::filesystem::path& path);

// Writes `<path>.partial` and renames it over `path` once complete, so a
// failed run never leaves a truncated artifact under the final name.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

} // namespace sneuron
