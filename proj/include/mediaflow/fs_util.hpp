#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mediaflow::fsutil {

using Bytes = std::vector<std::uint8_t>;

// Writes to a sibling temp file then renames over the target.
void write_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> data);
void write_atomic(const std::filesystem::path& path, std::string_view text);

Bytes read_bytes(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

// Appends one line (a trailing newline is added) and flushes.
void append_line(const std::filesystem::path& path, std::string_view line);

// Non-empty lines of a text file; empty vector when the file is absent.
std::vector<std::string> read_lines(const std::filesystem::path& path);

}  // namespace mediaflow::fsutil
