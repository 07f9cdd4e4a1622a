#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>

namespace transpose::util {

/// Writes through a sibling temp file and renames it over `path`, so readers
/// never observe a partially written file.
void write_atomically(const std::filesystem::path& path, const std::function<void(std::ostream&)>& writer);

void write_text_atomically(const std::filesystem::path& path, const std::string& text);

std::string read_text(const std::filesystem::path& path);

}  // namespace transpose::util
