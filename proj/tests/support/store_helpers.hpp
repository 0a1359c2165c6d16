#pragma once

#include <gtest/gtest.h>

#include "concealed/address_store.hpp"

namespace concealed::testing {

struct Secrets {
    SecretExponent read;
    SecretExponent write;
    SecretExponent owner;
};

inline AddressKey key_for(const GroupParams& params, const SecretExponent& s) {
    return s.is_wildcard() ? AddressKey::wildcard() : public_key_for(params, s);
}

/// Drives the store directly, answering challenges with known secrets.
class Driver {
  public:
    Driver(AddressStore& store, Rng& rng) : store_{store}, rng_{rng} {}

    /// Sends frame; if challenged, answers with `secret`.
    ServerFrame prove(const ClientFrame& frame, const SecretExponent& secret) {
        auto reply = store_.handle(frame);
        if (auto* ch = std::get_if<ChallengeIssued>(&reply))
            return store_.handle(ChallengeAnswer{ch->session, solve_challenge(store_.params(), secret, ch->challenge)});
        return reply;
    }

    /// Full creation flow; installs keys derived from `mine`.
    AddressId create(const Secrets& mine) {
        auto session_key = ContentKey::generate(rng_);
        auto hello = hybrid_seal(store_.public_key(), session_key.bytes(), rng_);
        auto blob = std::get<CreatedBlob>(store_.handle(CreateAddress{hello}));
        auto secrets = CreationSecrets::parse(to_string(open(session_key, blob.ciphertext)));
        const auto& p = store_.params();
        UpdateAddress update{secrets.address, key_for(p, mine.read), key_for(p, mine.write), key_for(p, mine.owner)};
        auto done = prove(update, secrets.owner);
        EXPECT_TRUE(std::holds_alternative<AddressCreated>(done)) << encode(done);
        return secrets.address;
    }

    Secrets random_secrets() {
        const auto& p = store_.params();
        return {SecretExponent{random_exponent(p, rng_)}, SecretExponent{random_exponent(p, rng_)},
                SecretExponent{random_exponent(p, rng_)}};
    }

  private:
    AddressStore& store_;
    Rng& rng_;
};

inline bool is_error(const ServerFrame& f, ErrorCode code) {
    auto* e = std::get_if<Error>(&f);
    return e && e->code == code;
}

}  // namespace concealed::testing
