#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace moralbench {

// Hex-encoded SHA-256 digest; stable across runs and platforms.
std::string sha256_hex(std::string_view bytes);

// 64-bit FNV-1a, for deterministic in-process seeding.
uint64_t fnv1a64(std::string_view bytes, uint64_t seed = 1469598103934665603ULL);

std::string read_file_bytes(const std::filesystem::path& path);

// Writes via a temp file in the same directory, then renames into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace moralbench
