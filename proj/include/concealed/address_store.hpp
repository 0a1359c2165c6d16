#pragma once

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>

#include "concealed/clock.hpp"
#include "concealed/group.hpp"
#include "concealed/sealing.hpp"
#include "concealed/wire.hpp"

namespace concealed {

class RestoreError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class Permission { Read, Write, Own };

struct StoreConfig {
    Millis challenge_ttl{30'000};
    Millis creation_ttl{300'000};
    std::size_t max_payload = 64 * 1024;
    /// Whether UpdateAddress may install a wildcard owner key. An ownerless address can never
    /// be rekeyed, so this is off unless a deployment asks for it.
    bool allow_ownerless = false;
};

/// A change to persisted state, reported to an optional observer. Carries no requester
/// information because the store has none.
struct StoreDelta {
    enum class Kind { Created, Updated, Appended, Purged };
    Kind kind;
    AddressId address;
    std::uint64_t index = 0;
    std::size_t size = 0;
};

/// Plaintext of the CreatedBlob: the fresh address and the server-chosen secret exponents.
struct CreationSecrets {
    AddressId address;
    SecretExponent read;
    SecretExponent write;
    SecretExponent owner;

    std::string serialize() const;
    static CreationSecrets parse(std::string_view text);
};

/// The concealed-address server. Every request is answered with exactly one frame; privileged
/// requests are parked behind a single-use challenge until the matching ChallengeAnswer
/// arrives. Safe for concurrent use: mutations of one address are serialized, different
/// addresses proceed independently.
class AddressStore {
  public:
    AddressStore(
            GroupParams params,
            HybridKeyPair server_key,
            const Clock& clock,
            std::unique_ptr<Rng> rng,
            StoreConfig config = {});

    ServerFrame handle(const ClientFrame& frame);

    ServerFrame handle_create(const CreateAddress& frame);
    ServerFrame handle_update(const UpdateAddress& frame);
    ServerFrame handle_read(const ReadAddress& frame);
    ServerFrame handle_write(const WriteAddress& frame);
    ServerFrame handle_purge(const PurgeAddress& frame);
    ServerFrame handle_answer(const ChallengeAnswer& frame);

    /// Drops expired challenge sessions and pending creations.
    void sweep_expired();

    /// Address records only; challenge sessions and pending creations are never persisted.
    std::string snapshot() const;
    void restore(std::string_view snapshot);

    void set_observer(std::function<void(const StoreDelta&)> observer);

    const GroupParams& params() const { return params_; }
    const HybridPublicKey& public_key() const { return server_key_.public_key(); }
    const StoreConfig& config() const { return config_; }

    std::size_t address_count() const;
    std::size_t session_count() const;
    std::size_t pending_creation_count() const;

  private:
    struct Record {
        mutable std::mutex mutex;
        AddressKey read_key = AddressKey::wildcard();
        AddressKey write_key = AddressKey::wildcard();
        AddressKey owner_key = AddressKey::wildcard();
        std::uint64_t version = 0;
        std::uint64_t base = 0;
        std::deque<Bytes> messages;
    };

    struct PendingCreation {
        ContentKey session_key;
        SecretExponent read;
        SecretExponent write;
        SecretExponent owner;
        Millis expires_at;
    };

    struct ChallengeSession {
        AddressId address;
        Permission permission;
        ClientFrame pending;
        mpz_class expected;
        std::uint64_t key_version;
        bool for_creation;
        Millis expires_at;
    };

    std::shared_ptr<Record> find(const AddressId& address) const;
    ServerFrame issue(const AddressId& address, Permission permission, const AddressKey& key,
                      std::uint64_t version, bool for_creation, ClientFrame pending);
    ServerFrame execute(const ChallengeSession& session);
    ServerFrame serve_read(Record& record, std::uint64_t cursor);
    ServerFrame append(const AddressId& address, Record& record, Bytes payload);
    ServerFrame purge(const AddressId& address, Record& record, std::uint64_t upto);
    ServerFrame install(const AddressId& address, Record& record, const UpdateAddress& update);
    std::optional<Error> check_new_keys(const UpdateAddress& update) const;
    void emit(const StoreDelta& delta);
    void maybe_sweep();

    GroupParams params_;
    HybridKeyPair server_key_;
    const Clock& clock_;
    StoreConfig config_;

    mutable std::mutex rng_mutex_;
    std::unique_ptr<Rng> rng_;

    mutable std::shared_mutex records_mutex_;
    std::map<AddressId, std::shared_ptr<Record>> records_;

    mutable std::mutex pending_mutex_;
    std::map<AddressId, PendingCreation> pending_;

    mutable std::mutex sessions_mutex_;
    std::map<SessionId, ChallengeSession> sessions_;
    Millis last_sweep_{0};

    std::mutex observer_mutex_;
    std::function<void(const StoreDelta&)> observer_;
};

}  // namespace concealed
