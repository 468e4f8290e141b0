#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "labelsift/errors.hpp"

namespace labelsift::detail {

// Little-endian encoding independent of host byte order.
inline void put_u32(std::vector<unsigned char>& out, std::uint32_t value) {
    for (int shift = 0; shift < 32; shift += 8) {
        out.push_back(static_cast<unsigned char>((value >> shift) & 0xffU));
    }
}

inline void put_f32(std::vector<unsigned char>& out, float value) {
    put_u32(out, std::bit_cast<std::uint32_t>(value));
}

inline std::uint32_t get_u32(std::span<const unsigned char> bytes, std::size_t offset) {
    std::uint32_t value = 0;
    for (int b = 0; b < 4; ++b) {
        value |= static_cast<std::uint32_t>(bytes[offset + static_cast<std::size_t>(b)]) << (8 * b);
    }
    return value;
}

inline float get_f32(std::span<const unsigned char> bytes, std::size_t offset) {
    return std::bit_cast<float>(get_u32(bytes, offset));
}

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(path, "cannot open for reading");
    }
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw IoError(path, "read failed");
    }
    return bytes;
}

inline void write_file(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError(path, "cannot open for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
        throw IoError(path, "write failed");
    }
}

inline bool has_magic(std::span<const unsigned char> bytes, std::string_view magic) {
    return bytes.size() >= magic.size() && std::memcmp(bytes.data(), magic.data(), magic.size()) == 0;
}

}  // namespace labelsift::detail
