#include "organdiff/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

#include "organdiff/error.hpp"

namespace organdiff {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

void write_framed(const std::filesystem::path& path, const std::string& magic, const nlohmann::json& header,
                  std::span<const float> values) {
    if (magic.size() != 8) throw std::logic_error("checkpoint magic must be 8 bytes");
    const std::string text = header.dump();
    const auto length = static_cast<std::uint32_t>(text.size());
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp.string());
        out.write(magic.data(), 8);
        out.write(reinterpret_cast<const char*>(&length), sizeof length);
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
        if (!out) throw DataError("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

FramedFile read_framed(const std::filesystem::path& path, const std::string& magic) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), magic.data(), 8) != 0) {
        throw DataError(fmt::format("{}: not a {} checkpoint", path.string(), magic));
    }
    std::uint32_t length = 0;
    std::memcpy(&length, bytes.data() + 8, sizeof length);
    if (12 + std::size_t{length} > bytes.size()) throw DataError(path.string() + ": truncated checkpoint header");
    FramedFile file;
    try {
        file.header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + length);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": malformed checkpoint header: " + e.what());
    }
    const std::size_t payload = bytes.size() - 12 - length;
    if (payload % sizeof(float) != 0) throw DataError(path.string() + ": truncated checkpoint payload");
    file.values.resize(payload / sizeof(float));
    std::memcpy(file.values.data(), bytes.data() + 12 + length, payload);
    return file;
}

std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a64(const std::string& text) {
    return fnv1a64(std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

std::string hex64(std::uint64_t value) { return fmt::format("{:016x}", value); }

}  // namespace organdiff
