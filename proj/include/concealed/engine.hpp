#pragma once

#include "concealed/connection.hpp"

namespace concealed {

/// The server answered with an Error frame (or an unexpected frame, reported as BadFrame).
class ProtocolError : public std::runtime_error {
  public:
    ProtocolError(ErrorCode code, const std::string& text)
            : std::runtime_error{std::string{to_string(code)} + (text.empty() ? "" : ": " + text)}, code_{code} {}
    ErrorCode code() const { return code_; }

  private:
    ErrorCode code_;
};

/// Client-held secrets of one concealed address. A zero exponent means the permission is
/// the wildcard (or simply not held, for addresses learned from someone else).
struct AddressSecrets {
    AddressId address;
    SecretExponent read;
    SecretExponent write;
    SecretExponent owner;
};

struct AddressOptions {
    bool open_read = false;
    bool open_write = false;
};

/// Address lifecycle and challenge solving over one connection. Not thread-safe.
class Engine {
  public:
    Engine(Connection& connection, GroupParams params, HybridPublicKey server_key, Rng& rng);

    /// Creation handshake: sealed hello, decrypt the server's secrets, prove ownership with them
    /// and install fresh keys chosen here. Throws ProtocolError if any step is refused.
    AddressSecrets create_address(AddressOptions options = {});

    /// Sends frame and, if challenged, answers with secret. Returns the final reply, which may be
    /// an Error frame.
    ServerFrame prove(const ClientFrame& frame, const SecretExponent& secret);

    Messages read(const AddressId& address, const SecretExponent& read_secret, std::uint64_t cursor = 0);
    void write(const AddressId& address, Bytes payload, const SecretExponent& write_secret = {});
    /// Installs keys for the given secrets, proving ownership with owner. A zero secret installs
    /// the wildcard.
    void rekey(const AddressId& address, const SecretExponent& owner, const SecretExponent& read,
               const SecretExponent& write, const SecretExponent& new_owner);
    void purge(const AddressId& address, const SecretExponent& owner, std::uint64_t upto);

    const GroupParams& params() const { return params_; }
    AddressKey key_for(const SecretExponent& secret) const;
    SecretExponent fresh_secret();

  private:
    ServerFrame expect_ok(const ServerFrame& reply);

    Connection& connection_;
    GroupParams params_;
    HybridPublicKey server_key_;
    Rng& rng_;
};

}  // namespace concealed
