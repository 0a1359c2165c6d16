#include "concealed/sealing.hpp"

#include <sodium.h>

#include <algorithm>

namespace concealed {

static_assert(crypto_aead_xchacha20poly1305_ietf_NPUBBYTES + crypto_aead_xchacha20poly1305_ietf_ABYTES ==
              seal_overhead);
static_assert(crypto_box_PUBLICKEYBYTES + crypto_box_NONCEBYTES + crypto_box_MACBYTES == hybrid_overhead);

ContentKey::ContentKey(ByteView raw) {
    if (raw.size() != size)
        throw std::invalid_argument{"content key must be 32 bytes"};
    std::copy(raw.begin(), raw.end(), key_.begin());
}

ContentKey ContentKey::generate(Rng& rng) {
    ContentKey k;
    rng.fill(k.key_);
    return k;
}

Bytes seal(const ContentKey& key, ByteView plaintext, Rng& rng) {
    ensure_sodium();
    Bytes out(seal_overhead + plaintext.size());
    auto* nonce = out.data();
    rng.fill({nonce, crypto_aead_xchacha20poly1305_ietf_NPUBBYTES});
    unsigned long long clen = 0;
    crypto_aead_xchacha20poly1305_ietf_encrypt(
            out.data() + crypto_aead_xchacha20poly1305_ietf_NPUBBYTES,
            &clen,
            plaintext.data(),
            plaintext.size(),
            nullptr,
            0,
            nullptr,
            nonce,
            key.bytes().data());
    return out;
}

Bytes open(const ContentKey& key, ByteView ciphertext) {
    ensure_sodium();
    if (ciphertext.size() < seal_overhead)
        throw DecryptError{"sealed blob too short"};
    Bytes out(ciphertext.size() - seal_overhead);
    unsigned long long mlen = 0;
    if (crypto_aead_xchacha20poly1305_ietf_decrypt(
                out.data(),
                &mlen,
                nullptr,
                ciphertext.data() + crypto_aead_xchacha20poly1305_ietf_NPUBBYTES,
                ciphertext.size() - crypto_aead_xchacha20poly1305_ietf_NPUBBYTES,
                nullptr,
                0,
                ciphertext.data(),
                key.bytes().data()) != 0)
        throw DecryptError{"sealed blob failed authentication"};
    return out;
}

HybridKeyPair HybridKeyPair::generate(Rng& rng) {
    std::array<std::uint8_t, crypto_box_SEEDBYTES> seed;
    rng.fill(seed);
    ensure_sodium();
    HybridKeyPair kp;
    crypto_box_seed_keypair(kp.public_.data(), kp.secret_.data(), seed.data());
    sodium_memzero(seed.data(), seed.size());
    return kp;
}

HybridKeyPair HybridKeyPair::from_secret(ByteView secret) {
    if (secret.size() != 32)
        throw std::invalid_argument{"hybrid secret key must be 32 bytes"};
    ensure_sodium();
    HybridKeyPair kp;
    std::copy(secret.begin(), secret.end(), kp.secret_.begin());
    crypto_scalarmult_base(kp.public_.data(), kp.secret_.data());
    return kp;
}

Bytes hybrid_seal(const HybridPublicKey& recipient, ByteView plaintext, Rng& rng) {
    auto ephemeral = HybridKeyPair::generate(rng);
    Bytes out(hybrid_overhead + plaintext.size());
    std::copy(ephemeral.public_key().begin(), ephemeral.public_key().end(), out.begin());
    auto* nonce = out.data() + crypto_box_PUBLICKEYBYTES;
    rng.fill({nonce, crypto_box_NONCEBYTES});
    if (crypto_box_easy(
                nonce + crypto_box_NONCEBYTES,
                plaintext.data(),
                plaintext.size(),
                nonce,
                recipient.data(),
                ephemeral.secret_key().data()) != 0)
        throw std::runtime_error{"hybrid seal failed (degenerate recipient key)"};
    return out;
}

Bytes hybrid_open(const HybridKeyPair& recipient, ByteView ciphertext) {
    ensure_sodium();
    if (ciphertext.size() < hybrid_overhead)
        throw DecryptError{"hybrid blob too short"};
    const auto* eph = ciphertext.data();
    // X25519 ignores the top bit; refuse the second encoding so every bit is authenticated.
    if (eph[crypto_box_PUBLICKEYBYTES - 1] & 0x80)
        throw DecryptError{"non-canonical ephemeral key"};
    const auto* nonce = eph + crypto_box_PUBLICKEYBYTES;
    const auto* body = nonce + crypto_box_NONCEBYTES;
    const std::size_t body_len = ciphertext.size() - crypto_box_PUBLICKEYBYTES - crypto_box_NONCEBYTES;
    Bytes out(ciphertext.size() - hybrid_overhead);
    if (crypto_box_open_easy(out.data(), body, body_len, nonce, eph, recipient.secret_key().data()) != 0)
        throw DecryptError{"hybrid blob failed authentication"};
    return out;
}

SigningKeyPair SigningKeyPair::generate(Rng& rng) {
    std::array<std::uint8_t, 32> seed;
    rng.fill(seed);
    return from_seed(seed);
}

SigningKeyPair SigningKeyPair::from_seed(ByteView seed) {
    if (seed.size() != crypto_sign_SEEDBYTES)
        throw std::invalid_argument{"signing seed must be 32 bytes"};
    ensure_sodium();
    SigningKeyPair kp;
    std::copy(seed.begin(), seed.end(), kp.seed_.begin());
    crypto_sign_seed_keypair(kp.public_.data(), kp.secret_.data(), kp.seed_.data());
    return kp;
}

Signature SigningKeyPair::sign(ByteView message) const {
    Signature sig{};
    crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(), secret_.data());
    return sig;
}

bool verify_signature(const SigningPublicKey& key, ByteView message, const Signature& sig) {
    ensure_sodium();
    return crypto_sign_verify_detached(sig.data(), message.data(), message.size(), key.data()) == 0;
}

std::array<std::uint8_t, 32> sha256(ByteView data) {
    ensure_sodium();
    std::array<std::uint8_t, 32> out;
    crypto_hash_sha256(out.data(), data.data(), data.size());
    return out;
}

void stream_xor(std::span<std::uint8_t> data, ByteView key) {
    if (key.size() != crypto_stream_xchacha20_KEYBYTES)
        throw std::invalid_argument{"stream key must be 32 bytes"};
    ensure_sodium();
    std::array<std::uint8_t, crypto_stream_xchacha20_NONCEBYTES> nonce{};
    crypto_stream_xchacha20_xor(data.data(), data.data(), data.size(), nonce.data(), key.data());
}

ContentKey derive_passphrase_key(std::string_view passphrase, ByteView salt, bool fast) {
    if (salt.size() != crypto_pwhash_SALTBYTES)
        throw std::invalid_argument{"passphrase salt must be 16 bytes"};
    ensure_sodium();
    std::array<std::uint8_t, ContentKey::size> key;
    auto ops = fast ? crypto_pwhash_OPSLIMIT_MIN : crypto_pwhash_OPSLIMIT_INTERACTIVE;
    auto mem = fast ? crypto_pwhash_MEMLIMIT_MIN : crypto_pwhash_MEMLIMIT_INTERACTIVE;
    if (crypto_pwhash(
                key.data(),
                key.size(),
                passphrase.data(),
                passphrase.size(),
                salt.data(),
                ops,
                mem,
                crypto_pwhash_ALG_ARGON2ID13) != 0)
        throw std::runtime_error{"passphrase key derivation ran out of memory"};
    return ContentKey{key};
}

}  // namespace concealed
