#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace groundjudge {

/// Throws Error(kIo) when the file cannot be read.
std::string ReadTextFile(const std::filesystem::path& path);

/// Writes through a sibling temporary file and renames it into place, so
/// readers never observe a partially written file.
void WriteFileAtomic(const std::filesystem::path& path, std::string_view contents);

/// Lowercase hex SHA-256 of the bytes.
std::string Sha256Hex(std::string_view bytes);

}  // namespace groundjudge
