#pragma once

#include <array>
#include <stdexcept>

#include "concealed/bytes.hpp"
#include "concealed/random.hpp"

namespace concealed {

/// Authentication failure while opening a sealed blob (wrong key, truncation, tampering).
class DecryptError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Cipher suite identifier carried in persisted artifacts. Symmetric sealing is
/// XChaCha20-Poly1305; hybrid sealing is X25519 + XSalsa20-Poly1305 with an ephemeral sender
/// key; signatures are Ed25519.
inline constexpr std::string_view cipher_suite = "cs1-xchacha20poly1305-x25519box-ed25519";

class ContentKey {
  public:
    static constexpr std::size_t size = 32;

    ContentKey() = default;
    explicit ContentKey(ByteView raw);

    static ContentKey generate(Rng& rng);

    ByteView bytes() const { return key_; }
    std::string to_hex() const { return concealed::to_hex(key_); }
    static ContentKey from_hex(std::string_view text) { return ContentKey{concealed::from_hex(text)}; }

    friend bool operator==(const ContentKey&, const ContentKey&) = default;

  private:
    std::array<std::uint8_t, size> key_{};
};

/// Nonce and tag added by seal().
inline constexpr std::size_t seal_overhead = 24 + 16;

Bytes seal(const ContentKey& key, ByteView plaintext, Rng& rng);
Bytes open(const ContentKey& key, ByteView ciphertext);

using HybridPublicKey = std::array<std::uint8_t, 32>;

class HybridKeyPair {
  public:
    static HybridKeyPair generate(Rng& rng);
    static HybridKeyPair from_secret(ByteView secret);

    const HybridPublicKey& public_key() const { return public_; }
    ByteView secret_key() const { return secret_; }

  private:
    HybridPublicKey public_{};
    std::array<std::uint8_t, 32> secret_{};
};

/// Ephemeral public key, nonce and tag added by hybrid_seal().
inline constexpr std::size_t hybrid_overhead = 32 + 24 + 16;

Bytes hybrid_seal(const HybridPublicKey& recipient, ByteView plaintext, Rng& rng);
Bytes hybrid_open(const HybridKeyPair& recipient, ByteView ciphertext);

using SigningPublicKey = std::array<std::uint8_t, 32>;
using Signature = std::array<std::uint8_t, 64>;

class SigningKeyPair {
  public:
    static SigningKeyPair generate(Rng& rng);
    static SigningKeyPair from_seed(ByteView seed);

    const SigningPublicKey& public_key() const { return public_; }
    ByteView seed() const { return seed_; }

    Signature sign(ByteView message) const;

  private:
    SigningPublicKey public_{};
    std::array<std::uint8_t, 32> seed_{};
    std::array<std::uint8_t, 64> secret_{};
};

bool verify_signature(const SigningPublicKey& key, ByteView message, const Signature& sig);

std::array<std::uint8_t, 32> sha256(ByteView data);

/// Length-preserving XChaCha20 keystream XOR. Only used with single-use keys.
void stream_xor(std::span<std::uint8_t> data, ByteView key);

/// Key for sealing under a passphrase (Argon2id). Fast limits are for tests only.
ContentKey derive_passphrase_key(std::string_view passphrase, ByteView salt, bool fast = false);

}  // namespace concealed
