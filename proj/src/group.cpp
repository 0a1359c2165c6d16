#include "concealed/group.hpp"

namespace concealed {

namespace {

constexpr const char* rfc3526_2048 =
        "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74"
        "020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437"
        "4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
        "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05"
        "98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB"
        "9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
        "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718"
        "3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF";

// Uniform in [0, bound) by rejection over bit_length(bound) random bits.
mpz_class uniform_below(const mpz_class& bound, Rng& rng) {
    const std::size_t bits = mpz_sizeinbase(bound.get_mpz_t(), 2);
    const std::size_t nbytes = (bits + 7) / 8;
    const unsigned excess = static_cast<unsigned>(nbytes * 8 - bits);
    Bytes buf(nbytes);
    mpz_class v;
    for (;;) {
        rng.fill(buf);
        buf[0] &= static_cast<std::uint8_t>(0xff >> excess);
        mpz_import(v.get_mpz_t(), buf.size(), 1, 1, 1, 0, buf.data());
        if (v < bound)
            return v;
    }
}

}  // namespace

mpz_class powm(const mpz_class& base, const mpz_class& exponent, const mpz_class& modulus) {
    mpz_class out;
    mpz_powm(out.get_mpz_t(), base.get_mpz_t(), exponent.get_mpz_t(), modulus.get_mpz_t());
    return out;
}

void GroupParams::validate() const {
    if (mpz_probab_prime_p(modulus.get_mpz_t(), 30) == 0)
        throw GroupError{"group modulus is not prime"};
    if (mpz_probab_prime_p(order.get_mpz_t(), 30) == 0)
        throw GroupError{"group order is not prime"};
    if (mpz_class{modulus - 1} % order != 0)
        throw GroupError{"group order does not divide modulus - 1"};
    if (generator <= 1 || generator >= modulus)
        throw GroupError{"generator out of range"};
    if (powm(generator, order, modulus) != 1)
        throw GroupError{"generator does not have the group order"};
}

bool GroupParams::contains(const mpz_class& element) const {
    if (element < 1 || element >= modulus)
        return false;
    // Safe prime: the order-q subgroup is exactly the quadratic residues.
    if (modulus == 2 * order + 1)
        return mpz_jacobi(element.get_mpz_t(), modulus.get_mpz_t()) == 1;
    return powm(element, order, modulus) == 1;
}

std::size_t GroupParams::element_bytes() const {
    return (mpz_sizeinbase(modulus.get_mpz_t(), 2) + 7) / 8;
}

const GroupParams& GroupParams::test_group() {
    static const GroupParams params{23, 11, 4};
    return params;
}

const GroupParams& GroupParams::production() {
    static const GroupParams params = [] {
        mpz_class p{rfc3526_2048, 16};
        return GroupParams{p, (p - 1) / 2, 2};
    }();
    return params;
}

SecretExponent SecretExponent::from_hex(std::string_view text) {
    if (text == "*")
        return SecretExponent{};
    return SecretExponent{element_from_hex(text)};
}

AddressKey AddressKey::from_element(mpz_class element) {
    if (element == 1)
        throw GroupError{"address key value 1 is reserved for the wildcard"};
    if (element < 1)
        throw GroupError{"address key out of range"};
    AddressKey key;
    key.element_ = std::move(element);
    return key;
}

const mpz_class& AddressKey::element() const {
    if (!element_)
        throw WildcardNeedsNoProof{};
    return *element_;
}

void AddressKey::validate(const GroupParams& params) const {
    if (element_ && !params.contains(*element_))
        throw GroupError{"address key is not in the prime-order subgroup"};
}

std::string AddressKey::to_string() const {
    return element_ ? element_to_hex(*element_) : "*";
}

AddressKey AddressKey::parse(std::string_view text) {
    if (text == "*")
        return wildcard();
    return from_element(element_from_hex(text));
}

mpz_class random_exponent(const GroupParams& params, Rng& rng) {
    return uniform_below(params.order - 1, rng) + 1;
}

mpz_class random_element(const GroupParams& params, Rng& rng) {
    return powm(params.generator, uniform_below(params.order, rng), params.modulus);
}

KeyPair keygen(const GroupParams& params, Rng& rng) {
    SecretExponent secret{random_exponent(params, rng)};
    return {secret, public_key_for(params, secret)};
}

AddressKey public_key_for(const GroupParams& params, const SecretExponent& secret) {
    if (secret.is_wildcard())
        throw GroupError{"secret exponent 0 denotes the wildcard, not a key"};
    if (secret.value() < 0 || secret.value() >= params.order)
        throw GroupError{"secret exponent out of range"};
    return AddressKey::from_element(powm(params.generator, secret.value(), params.modulus));
}

IssuedChallenge make_challenge(const GroupParams& params, const AddressKey& key, Rng& rng) {
    if (key.is_wildcard())
        throw WildcardNeedsNoProof{};
    auto r = random_exponent(params, rng);
    auto m = random_element(params, rng);
    return make_challenge(params, key, r, m);
}

IssuedChallenge make_challenge(
        const GroupParams& params, const AddressKey& key, const mpz_class& r, const mpz_class& m) {
    if (key.is_wildcard())
        throw WildcardNeedsNoProof{};
    if (r < 1 || r >= params.order)
        throw GroupError{"challenge exponent out of range"};
    // Any unit mod p round-trips; random challenges still draw m from the subgroup.
    if (m < 1 || m >= params.modulus)
        throw GroupError{"challenge nonce out of range"};
    mpz_class c0 = powm(params.generator, r, params.modulus);
    mpz_class c1 = powm(key.element(), r, params.modulus) * m % params.modulus;
    return {{c0, c1}, m};
}

mpz_class solve_challenge(
        const GroupParams& params, const SecretExponent& secret, const Challenge& challenge) {
    if (secret.is_wildcard())
        throw GroupError{"cannot answer a challenge with the wildcard secret"};
    mpz_class shared = powm(challenge.c0, secret.value(), params.modulus);
    mpz_class inverse;
    if (mpz_invert(inverse.get_mpz_t(), shared.get_mpz_t(), params.modulus.get_mpz_t()) == 0)
        throw GroupError{"challenge element not invertible"};
    return challenge.c1 * inverse % params.modulus;
}

std::string element_to_hex(const mpz_class& element) {
    return element.get_str(16);
}

mpz_class element_from_hex(std::string_view text) {
    if (text.empty() || !is_lower_hex(text) || (text.size() > 1 && text[0] == '0'))
        throw std::invalid_argument{"expected lowercase minimal base16 integer"};
    return mpz_class{std::string{text}, 16};
}

}  // namespace concealed
