#include "concealed/engine.hpp"

namespace concealed {

Engine::Engine(Connection& connection, GroupParams params, HybridPublicKey server_key, Rng& rng)
        : connection_{connection}, params_{std::move(params)}, server_key_{server_key}, rng_{rng} {}

AddressKey Engine::key_for(const SecretExponent& secret) const {
    return secret.is_wildcard() ? AddressKey::wildcard() : public_key_for(params_, secret);
}

SecretExponent Engine::fresh_secret() {
    return SecretExponent{random_exponent(params_, rng_)};
}

ServerFrame Engine::expect_ok(const ServerFrame& reply) {
    if (auto* e = std::get_if<Error>(&reply))
        throw ProtocolError{e->code, e->text};
    return reply;
}

ServerFrame Engine::prove(const ClientFrame& frame, const SecretExponent& secret) {
    auto reply = connection_.request(frame);
    auto* ch = std::get_if<ChallengeIssued>(&reply);
    if (!ch)
        return reply;
    if (secret.is_wildcard())
        return connection_.request(ChallengeAnswer{ch->session, 0});
    return connection_.request(ChallengeAnswer{ch->session, solve_challenge(params_, secret, ch->challenge)});
}

AddressSecrets Engine::create_address(AddressOptions options) {
    auto session_key = ContentKey::generate(rng_);
    auto reply = expect_ok(connection_.request(CreateAddress{hybrid_seal(server_key_, session_key.bytes(), rng_)}));
    auto* blob = std::get_if<CreatedBlob>(&reply);
    if (!blob)
        throw ProtocolError{ErrorCode::BadFrame, "expected CreatedBlob"};
    CreationSecrets server;
    try {
        server = CreationSecrets::parse(to_string(open(session_key, blob->ciphertext)));
    } catch (const std::exception& e) {
        throw ProtocolError{ErrorCode::BadFrame, std::string{"unreadable creation blob: "} + e.what()};
    }

    AddressSecrets mine{server.address, options.open_read ? SecretExponent{} : fresh_secret(),
                        options.open_write ? SecretExponent{} : fresh_secret(), fresh_secret()};
    auto done = expect_ok(prove(
            UpdateAddress{mine.address, key_for(mine.read), key_for(mine.write), key_for(mine.owner)}, server.owner));
    auto* created = std::get_if<AddressCreated>(&done);
    if (!created || created->address != mine.address)
        throw ProtocolError{ErrorCode::BadFrame, "expected AddressCreated"};
    return mine;
}

Messages Engine::read(const AddressId& address, const SecretExponent& read_secret, std::uint64_t cursor) {
    auto reply = expect_ok(prove(ReadAddress{address, cursor}, read_secret));
    if (auto* m = std::get_if<Messages>(&reply))
        return std::move(*m);
    throw ProtocolError{ErrorCode::BadFrame, "expected Messages"};
}

void Engine::write(const AddressId& address, Bytes payload, const SecretExponent& write_secret) {
    auto reply = expect_ok(prove(WriteAddress{address, std::move(payload)}, write_secret));
    if (!std::holds_alternative<Ack>(reply))
        throw ProtocolError{ErrorCode::BadFrame, "expected Ack"};
}

void Engine::rekey(const AddressId& address, const SecretExponent& owner, const SecretExponent& read,
                   const SecretExponent& write, const SecretExponent& new_owner) {
    auto reply = expect_ok(prove(UpdateAddress{address, key_for(read), key_for(write), key_for(new_owner)}, owner));
    if (!std::holds_alternative<AddressCreated>(reply))
        throw ProtocolError{ErrorCode::BadFrame, "expected AddressCreated"};
}

void Engine::purge(const AddressId& address, const SecretExponent& owner, std::uint64_t upto) {
    auto reply = expect_ok(prove(PurgeAddress{address, upto}, owner));
    if (!std::holds_alternative<Ack>(reply))
        throw ProtocolError{ErrorCode::BadFrame, "expected Ack"};
}

}  // namespace concealed
