#pragma once

#include <gmpxx.h>

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "concealed/random.hpp"

namespace concealed {

class GroupError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Proofs are never requested for a wildcard key; asking for one is a caller bug.
class WildcardNeedsNoProof : public GroupError {
  public:
    WildcardNeedsNoProof() : GroupError{"wildcard address key needs no proof"} {}
};

/// Prime-order subgroup of Z_p^*: arithmetic modulo the prime `modulus`, exponents modulo the
/// prime `order` which divides modulus-1, and `generator` of multiplicative order `order`.
struct GroupParams {
    mpz_class modulus;
    mpz_class order;
    mpz_class generator;

    /// Throws GroupError unless the invariants above hold (primality checked probabilistically).
    void validate() const;

    bool contains(const mpz_class& element) const;

    std::size_t element_bytes() const;

    /// (p=23, q=11, g=4). Small enough for exhaustive checks.
    static const GroupParams& test_group();
    /// RFC 3526 2048-bit MODP prime, q = (p-1)/2, g = 2.
    static const GroupParams& production();

    friend bool operator==(const GroupParams&, const GroupParams&) = default;
};

/// An exponent in [0, q-1]; 0 stands for the wildcard.
class SecretExponent {
  public:
    SecretExponent() = default;
    explicit SecretExponent(mpz_class value) : value_{std::move(value)} {}

    const mpz_class& value() const { return value_; }
    bool is_wildcard() const { return value_ == 0; }

    std::string to_hex() const { return is_wildcard() ? "*" : value_.get_str(16); }
    static SecretExponent from_hex(std::string_view text);

    friend bool operator==(const SecretExponent&, const SecretExponent&) = default;

  private:
    mpz_class value_{0};
};

/// Public half of an address key: g^x mod p, or the wildcard marker.
class AddressKey {
  public:
    static AddressKey wildcard() { return AddressKey{}; }
    /// Rejects 1 (reserved for the wildcard) and values < 1. Subgroup membership needs the
    /// group and is checked by validate().
    static AddressKey from_element(mpz_class element);

    bool is_wildcard() const { return !element_; }
    const mpz_class& element() const;

    void validate(const GroupParams& params) const;

    /// "*" or lowercase minimal base16.
    std::string to_string() const;
    static AddressKey parse(std::string_view text);

    friend bool operator==(const AddressKey&, const AddressKey&) = default;

  private:
    AddressKey() = default;
    std::optional<mpz_class> element_;
};

struct KeyPair {
    SecretExponent secret;
    AddressKey public_key;
};

struct Challenge {
    mpz_class c0;
    mpz_class c1;

    friend bool operator==(const Challenge&, const Challenge&) = default;
};

/// A challenge as held by its issuer: the pair sent to the client plus the nonce the client
/// must recover. The nonce never leaves the issuer.
struct IssuedChallenge {
    Challenge challenge;
    mpz_class expected;
};

mpz_class powm(const mpz_class& base, const mpz_class& exponent, const mpz_class& modulus);

/// Uniform in [1, q-1].
mpz_class random_exponent(const GroupParams& params, Rng& rng);
/// Uniform over the order-q subgroup.
mpz_class random_element(const GroupParams& params, Rng& rng);

KeyPair keygen(const GroupParams& params, Rng& rng);

/// g^x mod p. Throws GroupError for x = 0 (keygen never produces the wildcard) or x >= q.
AddressKey public_key_for(const GroupParams& params, const SecretExponent& secret);

IssuedChallenge make_challenge(const GroupParams& params, const AddressKey& key, Rng& rng);

/// Deterministic variant with caller-chosen r in [1, q-1] and nonce m in [1, p-1].
IssuedChallenge make_challenge(
        const GroupParams& params, const AddressKey& key, const mpz_class& r, const mpz_class& m);

/// c1 * (c0^secret)^-1 mod p.
mpz_class solve_challenge(
        const GroupParams& params, const SecretExponent& secret, const Challenge& challenge);

std::string element_to_hex(const mpz_class& element);
/// Parses lowercase minimal base16; throws std::invalid_argument otherwise.
mpz_class element_from_hex(std::string_view text);

}  // namespace concealed
