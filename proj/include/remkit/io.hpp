#pragma once

#include <string>
#include <string_view>

namespace remkit {

/// Writes `contents` to a temporary file next to `path` and renames it over
/// `path`, so readers never observe a partially written file.
void write_file_atomic(const std::string& path, std::string_view contents);

/// Reads a whole file. Throws MissingFileError if it does not exist.
std::string read_file(const std::string& path);

}  // namespace remkit
