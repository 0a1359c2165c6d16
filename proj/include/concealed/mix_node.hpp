#pragma once

#include <atomic>
#include <map>
#include <mutex>

#include "concealed/clock.hpp"
#include "concealed/engine.hpp"
#include "concealed/envelope.hpp"

namespace concealed {

struct MixConfig {
    /// Flush once this many items are pending.
    std::size_t batch_threshold = 5;
    /// ...or once the oldest pending item has waited this long.
    Millis flush_timeout{2'000};
    Millis dedup_window{600'000};
    /// Forwarded input is purged from the inboxes only after this delay.
    Millis deletion_delay{600'000};
    /// How long a replaced inbox keeps being collected before it is dropped.
    Millis retire_grace{600'000};
    /// Failed writes are retried on later flushes at most this many times.
    std::size_t max_attempts = 5;
    EnvelopeFormat format;

    void validate() const;
};

/// What a mix publishes: its public key and the wildcard-write inboxes to send to.
struct MixDirectoryEntry {
    std::string name;
    HybridPublicKey public_key{};
    std::vector<AddressId> inboxes;
};

/// Canonical JSON list of entries (sorted keys, compact).
std::string write_directory(const std::vector<MixDirectoryEntry>& entries);
std::vector<MixDirectoryEntry> read_directory(std::string_view text);

struct MixOutput {
    AddressId destination;
    Bytes envelope;
    std::size_t attempts = 0;
};

struct MixMetrics {
    std::size_t collected = 0;
    std::size_t duplicates = 0;
    std::size_t undecryptable = 0;
    std::size_t malformed = 0;
    std::size_t forwarded = 0;
    std::size_t write_failures = 0;
    std::size_t dropped = 0;
    std::size_t purges = 0;
};

/// A mix node. collect() and the flush path (process_batch/forward) may run on different
/// threads as long as each uses its own connection; the pending batch is shared under a lock.
class MixNode {
  public:
    MixNode(std::string name, HybridKeyPair key, Connection& collector, Connection& forwarder,
            GroupParams params, HybridPublicKey server_key, const Clock& clock, std::unique_ptr<Rng> rng,
            MixConfig config = {});

    /// Creates n fresh inboxes (wildcard write, read and owner secrets kept here). Inboxes from
    /// an earlier registration are drained for retire_grace and then dropped.
    std::vector<AddressId> register_inboxes(std::size_t n);

    /// Reads every inbox and adds new, decryptable, not yet seen items to the pending batch.
    /// Returns the number of items added.
    std::size_t collect();

    bool flush_due() const;
    std::size_t pending() const;

    /// Drains the pending batch: peeled items merged per destination, packed into envelopes and
    /// returned in a fresh random order.
    std::vector<MixOutput> process_batch();

    /// Writes outputs plus anything retained from earlier failures. Returns the number written.
    std::size_t forward(std::vector<MixOutput> outputs);

    /// Purges inbox prefixes whose deletion delay has passed and drops drained retired inboxes.
    void delete_forwarded();

    /// One collector pass followed by a flush if due. Returns envelopes written.
    std::size_t step();

    void run_collector(const std::atomic<bool>& stop, Millis poll);
    void run_flusher(const std::atomic<bool>& stop, Millis poll);

    MixDirectoryEntry directory_entry() const;
    MixMetrics metrics() const;
    const MixConfig& config() const { return config_; }

  private:
    struct Inbox {
        AddressSecrets secrets;
        std::uint64_t cursor = 0;
        std::optional<Millis> retire_at;
    };
    struct Pending {
        AddressId destination;
        Bytes item;
        Millis arrived;
    };
    struct Deletion {
        AddressId inbox;
        std::uint64_t upto;
        Millis due;
    };

    std::string name_;
    HybridKeyPair key_;
    const Clock& clock_;
    MixConfig config_;
    LockedRng rng_;
    Engine collector_;
    Connection& forward_connection_;

    mutable std::mutex inbox_mutex_;
    std::vector<Inbox> inboxes_;
    std::vector<Deletion> deletions_;
    std::map<std::array<std::uint8_t, 32>, Millis> seen_;

    mutable std::mutex pending_mutex_;
    std::vector<Pending> pending_;
    std::vector<MixOutput> retained_;
    MixMetrics metrics_;
};

}  // namespace concealed
