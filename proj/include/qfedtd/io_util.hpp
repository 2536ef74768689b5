#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace qfedtd {

/// Throws Error{IoError} when the file cannot be read.
std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// never observe a partially written file. Parent directories are created.
void write_file_atomically(const std::filesystem::path& path, std::string_view contents);

}  // namespace qfedtd
