#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace concealed {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

/// Lowercase base16.
std::string to_hex(ByteView data);

/// Accepts lowercase or uppercase base16; throws std::invalid_argument on odd length or
/// non-hex characters.
Bytes from_hex(std::string_view text);

bool is_lower_hex(std::string_view text);

inline Bytes to_bytes(std::string_view s) {
    return Bytes(s.begin(), s.end());
}

inline std::string to_string(ByteView b) {
    return std::string(b.begin(), b.end());
}

void append_u16(Bytes& out, std::uint16_t v);
void append_u32(Bytes& out, std::uint32_t v);
void append_u64(Bytes& out, std::uint64_t v);
std::uint16_t read_u16(ByteView in, std::size_t offset);
std::uint32_t read_u32(ByteView in, std::size_t offset);
std::uint64_t read_u64(ByteView in, std::size_t offset);

inline void append(Bytes& out, ByteView in) {
    out.insert(out.end(), in.begin(), in.end());
}

}  // namespace concealed
