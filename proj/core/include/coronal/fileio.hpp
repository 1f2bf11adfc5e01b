#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace coronal {

std::string read_text_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file, then renames over `path`. Parent
/// directories are created as needed.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace coronal
