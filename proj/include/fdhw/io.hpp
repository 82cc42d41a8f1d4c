#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fdhw {

// Writes via a sibling temp file and rename, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

std::vector<std::string_view> split(std::string_view line, char sep);
std::string_view trim(std::string_view s);

// Machine CSV numbers: 17 significant digits.
std::string fmt_machine(double v);
// Human report numbers: 4 decimals.
std::string fmt_human(double v);

}  // namespace fdhw
