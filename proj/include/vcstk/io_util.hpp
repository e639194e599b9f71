#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace vcstk {

// Write via temp file + rename so partially written outputs never land under
// the final name.
void write_file_atomic(const std::filesystem::path& path,
                       const std::string& content);

std::string read_text_file(const std::filesystem::path& path);

// Minimal CSV: no quoting, fields must not contain ',' or newlines.
std::vector<std::string> split_csv_line(const std::string& line);
std::vector<std::vector<std::string>> read_csv(
    const std::filesystem::path& path);

// Shortest decimal that round-trips a double.
std::string format_double(double v);

}  // namespace vcstk
