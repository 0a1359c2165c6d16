#include "concealed/bytes.hpp"

namespace concealed {

namespace {
constexpr char hex_digits[] = "0123456789abcdef";

int hex_value(char c) {
    if (c >= '0' && c <= '9')
        return c - '0';
    if (c >= 'a' && c <= 'f')
        return c - 'a' + 10;
    if (c >= 'A' && c <= 'F')
        return c - 'A' + 10;
    return -1;
}
}  // namespace

std::string to_hex(ByteView data) {
    std::string out;
    out.reserve(data.size() * 2);
    for (auto b : data) {
        out.push_back(hex_digits[b >> 4]);
        out.push_back(hex_digits[b & 0xf]);
    }
    return out;
}

Bytes from_hex(std::string_view text) {
    if (text.size() % 2 != 0)
        throw std::invalid_argument{"hex string has odd length"};
    Bytes out;
    out.reserve(text.size() / 2);
    for (std::size_t i = 0; i < text.size(); i += 2) {
        int hi = hex_value(text[i]);
        int lo = hex_value(text[i + 1]);
        if (hi < 0 || lo < 0)
            throw std::invalid_argument{"invalid hex character"};
        out.push_back(static_cast<std::uint8_t>((hi << 4) | lo));
    }
    return out;
}

bool is_lower_hex(std::string_view text) {
    for (char c : text)
        if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f')))
            return false;
    return true;
}

void append_u16(Bytes& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void append_u32(Bytes& out, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8)
        out.push_back(static_cast<std::uint8_t>(v >> shift));
}

void append_u64(Bytes& out, std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8)
        out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::uint16_t read_u16(ByteView in, std::size_t offset) {
    if (offset + 2 > in.size())
        throw std::out_of_range{"read_u16 past end"};
    return static_cast<std::uint16_t>((in[offset] << 8) | in[offset + 1]);
}

std::uint32_t read_u32(ByteView in, std::size_t offset) {
    if (offset + 4 > in.size())
        throw std::out_of_range{"read_u32 past end"};
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v = (v << 8) | in[offset + i];
    return v;
}

std::uint64_t read_u64(ByteView in, std::size_t offset) {
    if (offset + 8 > in.size())
        throw std::out_of_range{"read_u64 past end"};
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v = (v << 8) | in[offset + i];
    return v;
}

}  // namespace concealed
