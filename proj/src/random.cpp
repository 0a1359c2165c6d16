#include "concealed/random.hpp"

#include <sodium.h>

#include <cstring>
#include <mutex>
#include <stdexcept>

namespace concealed {

void ensure_sodium() {
    static std::once_flag once;
    std::call_once(once, [] {
        if (sodium_init() < 0)
            throw std::runtime_error{"libsodium initialization failed"};
    });
}

Bytes Rng::bytes(std::size_t n) {
    Bytes out(n);
    fill(out);
    return out;
}

std::uint64_t Rng::next_u64() {
    std::array<std::uint8_t, 8> buf;
    fill(buf);
    std::uint64_t v = 0;
    for (auto b : buf)
        v = (v << 8) | b;
    return v;
}

std::uint64_t Rng::uniform(std::uint64_t bound) {
    if (bound == 0)
        throw std::invalid_argument{"uniform bound must be nonzero"};
    // Rejection sampling over the largest multiple of bound.
    const std::uint64_t limit = max() - (max() % bound + 1) % bound;
    for (;;) {
        auto v = next_u64();
        if (v <= limit)
            return v % bound;
    }
}

double Rng::unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

void SystemRng::fill(std::span<std::uint8_t> out) {
    ensure_sodium();
    randombytes_buf(out.data(), out.size());
}

SeededRng::SeededRng(std::uint64_t seed) {
    ensure_sodium();
    Bytes material = to_bytes("concealed/seeded-rng/v1");
    append_u64(material, seed);
    crypto_hash_sha256(key_.data(), material.data(), material.size());
}

SeededRng::SeededRng(const std::array<std::uint8_t, 32>& key) : key_{key} {
    ensure_sodium();
}

void SeededRng::refill() {
    std::array<std::uint8_t, crypto_stream_chacha20_NONCEBYTES> nonce{};
    std::array<std::uint8_t, 64> zeros{};
    crypto_stream_chacha20_xor_ic(
            block_.data(), zeros.data(), zeros.size(), nonce.data(), counter_++, key_.data());
    used_ = 0;
}

void SeededRng::fill(std::span<std::uint8_t> out) {
    std::size_t pos = 0;
    while (pos < out.size()) {
        if (used_ == block_.size())
            refill();
        auto take = std::min(out.size() - pos, block_.size() - used_);
        std::memcpy(out.data() + pos, block_.data() + used_, take);
        used_ += take;
        pos += take;
    }
}

SeededRng SeededRng::derive(std::string_view label) const {
    std::array<std::uint8_t, 32> child{};
    Bytes material(key_.begin(), key_.end());
    material.insert(material.end(), label.begin(), label.end());
    crypto_hash_sha256(child.data(), material.data(), material.size());
    return SeededRng{child};
}

}  // namespace concealed
