#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fat/error.hpp"

namespace fat::io {

using Bytes = std::vector<std::uint8_t>;

template <typename V>
void put_le(Bytes& out, V value) {
    static_assert(sizeof(V) == 4 || sizeof(V) == 8);
    using U = std::conditional_t<sizeof(V) == 4, std::uint32_t, std::uint64_t>;
    auto bits = std::bit_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(V); ++i) {
        out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
    }
}

template <typename V>
V get_le(std::span<const std::uint8_t> in, std::size_t offset) {
    using U = std::conditional_t<sizeof(V) == 4, std::uint32_t, std::uint64_t>;
    if (offset + sizeof(V) > in.size()) throw FormatError("unexpected end of data");
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(V); ++i) bits |= static_cast<U>(in[offset + i]) << (8 * i);
    return std::bit_cast<V>(bits);
}

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace fat::io
