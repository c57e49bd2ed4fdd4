#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace organdiff {

/// Checkpoint framing shared by the MLP and denoiser formats:
/// 8-byte magic, little-endian u32 header length, UTF-8 JSON header, then little-endian
/// 32-bit floats to the end of the file.
struct FramedFile {
    nlohmann::json header;
    std::vector<float> values;
};

/// Writes through a temporary file and renames it into place.
void write_framed(const std::filesystem::path& path, const std::string& magic, const nlohmann::json& header,
                  std::span<const float> values);

/// Throws DataError on a missing file, wrong magic, malformed header, or a payload whose
/// size is not a whole number of floats.
FramedFile read_framed(const std::filesystem::path& path, const std::string& magic);

/// FNV-1a 64-bit.
std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(const std::string& text);
std::string hex64(std::uint64_t value);

}  // namespace organdiff
