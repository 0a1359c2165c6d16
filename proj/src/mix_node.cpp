#include "concealed/mix_node.hpp"

#include <nlohmann/json.hpp>
#include <thread>

namespace concealed {

void MixConfig::validate() const {
    if (batch_threshold < 2)
        throw std::invalid_argument{"batch threshold must be at least 2"};
    if (deletion_delay < dedup_window)
        throw std::invalid_argument{"deletion delay must not be shorter than the dedup window"};
    format.validate();
}

std::string write_directory(const std::vector<MixDirectoryEntry>& entries) {
    auto list = nlohmann::json::array();
    for (const auto& e : entries) {
        auto inboxes = nlohmann::json::array();
        for (const auto& c : e.inboxes)
            inboxes.push_back(c.to_string());
        list.push_back({{"inboxes", inboxes}, {"name", e.name}, {"public_key", to_hex(e.public_key)}});
    }
    return list.dump();
}

std::vector<MixDirectoryEntry> read_directory(std::string_view text) {
    std::vector<MixDirectoryEntry> out;
    try {
        for (const auto& item : nlohmann::json::parse(text)) {
            MixDirectoryEntry e;
            e.name = item.at("name").get<std::string>();
            auto key = from_hex(item.at("public_key").get<std::string>());
            if (key.size() != e.public_key.size())
                throw std::invalid_argument{"bad mix public key"};
            std::copy(key.begin(), key.end(), e.public_key.begin());
            for (const auto& c : item.at("inboxes"))
                e.inboxes.push_back(AddressId::parse(c.get<std::string>()));
            if (e.inboxes.empty())
                throw std::invalid_argument{"mix " + e.name + " has no inboxes"};
            out.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument{std::string{"bad mix directory: "} + e.what()};
    }
    return out;
}

MixNode::MixNode(std::string name, HybridKeyPair key, Connection& collector, Connection& forwarder,
                 GroupParams params, HybridPublicKey server_key, const Clock& clock, std::unique_ptr<Rng> rng,
                 MixConfig config)
        : name_{std::move(name)},
          key_{std::move(key)},
          clock_{clock},
          config_{config},
          rng_{std::move(rng)},
          collector_{collector, params, server_key, rng_},
          forward_connection_{forwarder} {
    config_.validate();
}

std::vector<AddressId> MixNode::register_inboxes(std::size_t n) {
    if (n == 0)
        throw std::invalid_argument{"a mix needs at least one inbox"};
    std::vector<Inbox> fresh;
    for (std::size_t i = 0; i < n; ++i)
        fresh.push_back({collector_.create_address({.open_write = true}), 0, std::nullopt});

    std::lock_guard lock{inbox_mutex_};
    auto retire_at = clock_.now() + config_.retire_grace;
    for (auto& inbox : inboxes_)
        if (!inbox.retire_at)
            inbox.retire_at = retire_at;
    std::vector<AddressId> ids;
    for (auto& inbox : fresh) {
        ids.push_back(inbox.secrets.address);
        inboxes_.push_back(std::move(inbox));
    }
    return ids;
}

MixDirectoryEntry MixNode::directory_entry() const {
    MixDirectoryEntry e{name_, key_.public_key(), {}};
    std::lock_guard lock{inbox_mutex_};
    for (const auto& inbox : inboxes_)
        if (!inbox.retire_at)
            e.inboxes.push_back(inbox.secrets.address);
    return e;
}

std::size_t MixNode::collect() {
    std::lock_guard lock{inbox_mutex_};
    auto now = clock_.now();
    std::erase_if(seen_, [&](const auto& kv) { return kv.second + config_.dedup_window <= now; });

    std::vector<Pending> fresh;
    MixMetrics counts;
    for (auto& inbox : inboxes_) {
        auto batch = collector_.read(inbox.secrets.address, inbox.secrets.read, inbox.cursor);
        if (batch.next_cursor == inbox.cursor)
            continue;
        inbox.cursor = batch.next_cursor;
        deletions_.push_back({inbox.secrets.address, inbox.cursor, now + config_.deletion_delay});
        for (const auto& envelope : batch.payloads) {
            std::vector<Bytes> items;
            try {
                items = split(envelope);
            } catch (const std::exception&) {
                ++counts.malformed;
                continue;
            }
            for (const auto& item : items) {
                auto digest = sha256(item);
                if (!seen_.emplace(digest, now).second) {
                    ++counts.duplicates;
                    continue;
                }
                auto peeled = peel_item(config_.format, key_, item, rng_);
                if (!peeled) {
                    ++counts.undecryptable;
                    continue;
                }
                fresh.push_back({peeled->next, std::move(peeled->item), now});
            }
        }
    }

    std::lock_guard pending_lock{pending_mutex_};
    metrics_.collected += fresh.size();
    metrics_.duplicates += counts.duplicates;
    metrics_.undecryptable += counts.undecryptable;
    metrics_.malformed += counts.malformed;
    for (auto& p : fresh)
        pending_.push_back(std::move(p));
    return fresh.size();
}

bool MixNode::flush_due() const {
    std::lock_guard lock{pending_mutex_};
    if (pending_.size() >= config_.batch_threshold)
        return true;
    if (pending_.empty())
        return false;
    return clock_.now() - pending_.front().arrived >= config_.flush_timeout;
}

std::size_t MixNode::pending() const {
    std::lock_guard lock{pending_mutex_};
    return pending_.size();
}

std::vector<MixOutput> MixNode::process_batch() {
    std::vector<Pending> batch;
    {
        std::lock_guard lock{pending_mutex_};
        batch.swap(pending_);
    }
    std::map<AddressId, std::vector<Bytes>> by_destination;
    for (auto& p : batch)
        by_destination[p.destination].push_back(std::move(p.item));

    std::vector<MixOutput> out;
    for (auto& [destination, items] : by_destination) {
        rng_.shuffle(items.begin(), items.end());
        for (auto& envelope : pack_items(std::move(items), config_.format, rng_))
            out.push_back({destination, std::move(envelope)});
    }
    rng_.shuffle(out.begin(), out.end());
    return out;
}

std::size_t MixNode::forward(std::vector<MixOutput> outputs) {
    {
        std::lock_guard lock{pending_mutex_};
        outputs.insert(outputs.begin(), std::make_move_iterator(retained_.begin()),
                       std::make_move_iterator(retained_.end()));
        retained_.clear();
    }
    std::size_t written = 0;
    std::vector<MixOutput> failed;
    std::size_t undeliverable = 0;
    for (auto& out : outputs) {
        ++out.attempts;
        bool ok = false;
        try {
            auto reply = forward_connection_.request(WriteAddress{out.destination, out.envelope});
            ok = std::holds_alternative<Ack>(reply);
            // A write-protected destination can never accept mixed traffic.
            if (std::holds_alternative<ChallengeIssued>(reply))
                out.attempts = config_.max_attempts;
        } catch (const std::exception&) {
        }
        if (ok) {
            ++written;
        } else if (out.attempts < config_.max_attempts) {
            failed.push_back(std::move(out));
        } else {
            ++undeliverable;
        }
    }
    std::lock_guard lock{pending_mutex_};
    metrics_.forwarded += written;
    metrics_.write_failures += failed.size() + undeliverable;
    metrics_.dropped += undeliverable;
    retained_ = std::move(failed);
    return written;
}

void MixNode::delete_forwarded() {
    std::lock_guard lock{inbox_mutex_};
    auto now = clock_.now();
    std::vector<Deletion> later;
    std::size_t purged = 0;
    for (const auto& d : deletions_) {
        if (d.due > now) {
            later.push_back(d);
            continue;
        }
        auto it = std::find_if(inboxes_.begin(), inboxes_.end(),
                               [&](const Inbox& i) { return i.secrets.address == d.inbox; });
        if (it == inboxes_.end())
            continue;
        try {
            collector_.purge(d.inbox, it->secrets.owner, d.upto);
            ++purged;
        } catch (const ProtocolError&) {
            later.push_back(d);
        }
    }
    deletions_ = std::move(later);
    // A retired inbox goes once its grace period is over and nothing is awaiting deletion.
    std::erase_if(inboxes_, [&](const Inbox& i) {
        if (!i.retire_at || *i.retire_at > now)
            return false;
        return std::none_of(deletions_.begin(), deletions_.end(),
                            [&](const Deletion& d) { return d.inbox == i.secrets.address; });
    });
    std::lock_guard pending_lock{pending_mutex_};
    metrics_.purges += purged;
}

std::size_t MixNode::step() {
    collect();
    std::size_t written = 0;
    bool retry;
    {
        std::lock_guard lock{pending_mutex_};
        retry = !retained_.empty();
    }
    if (flush_due() || retry)
        written = forward(process_batch());
    delete_forwarded();
    return written;
}

void MixNode::run_collector(const std::atomic<bool>& stop, Millis poll) {
    while (!stop.load()) {
        try {
            collect();
            delete_forwarded();
        } catch (const std::exception&) {
            // Transient server trouble; try again next round.
        }
        std::this_thread::sleep_for(poll);
    }
}

void MixNode::run_flusher(const std::atomic<bool>& stop, Millis poll) {
    while (!stop.load()) {
        bool retry;
        {
            std::lock_guard lock{pending_mutex_};
            retry = !retained_.empty();
        }
        if (flush_due() || retry)
            forward(process_batch());
        std::this_thread::sleep_for(poll);
    }
}

MixMetrics MixNode::metrics() const {
    std::lock_guard lock{pending_mutex_};
    return metrics_;
}

}  // namespace concealed
