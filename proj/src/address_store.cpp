#include "concealed/address_store.hpp"

#include <sstream>

namespace concealed {

namespace {

constexpr std::string_view snapshot_magic = "concealed-snapshot v1";

Error error(ErrorCode code, std::string text) {
    return Error{code, std::move(text)};
}

std::vector<std::string_view> split_spaces(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (pos <= line.size()) {
        auto end = line.find(' ', pos);
        if (end == std::string_view::npos)
            end = line.size();
        out.push_back(line.substr(pos, end - pos));
        pos = end + 1;
    }
    return out;
}

}  // namespace

std::string CreationSecrets::serialize() const {
    return address.to_string() + " " + read.to_hex() + " " + write.to_hex() + " " + owner.to_hex();
}

CreationSecrets CreationSecrets::parse(std::string_view text) {
    auto parts = split_spaces(text);
    if (parts.size() != 4)
        throw std::invalid_argument{"creation secrets must have four fields"};
    return {AddressId::parse(parts[0]),
            SecretExponent{element_from_hex(parts[1])},
            SecretExponent{element_from_hex(parts[2])},
            SecretExponent{element_from_hex(parts[3])}};
}

AddressStore::AddressStore(
        GroupParams params, HybridKeyPair server_key, const Clock& clock, std::unique_ptr<Rng> rng,
        StoreConfig config)
        : params_{std::move(params)},
          server_key_{std::move(server_key)},
          clock_{clock},
          config_{config},
          rng_{std::move(rng)} {
    params_.validate();
}

void AddressStore::set_observer(std::function<void(const StoreDelta&)> observer) {
    std::lock_guard lock{observer_mutex_};
    observer_ = std::move(observer);
}

void AddressStore::emit(const StoreDelta& delta) {
    std::lock_guard lock{observer_mutex_};
    if (observer_)
        observer_(delta);
}

std::size_t AddressStore::address_count() const {
    std::shared_lock lock{records_mutex_};
    return records_.size();
}

std::size_t AddressStore::session_count() const {
    std::lock_guard lock{sessions_mutex_};
    return sessions_.size();
}

std::size_t AddressStore::pending_creation_count() const {
    std::lock_guard lock{pending_mutex_};
    return pending_.size();
}

std::shared_ptr<AddressStore::Record> AddressStore::find(const AddressId& address) const {
    std::shared_lock lock{records_mutex_};
    auto it = records_.find(address);
    return it == records_.end() ? nullptr : it->second;
}

void AddressStore::sweep_expired() {
    auto now = clock_.now();
    {
        std::lock_guard lock{sessions_mutex_};
        // Expired sessions linger for one more TTL so a late answer gets ChallengeExpired.
        std::erase_if(sessions_, [&](const auto& kv) {
            return kv.second.expires_at + config_.challenge_ttl <= now;
        });
        last_sweep_ = now;
    }
    std::lock_guard lock{pending_mutex_};
    std::erase_if(pending_, [&](const auto& kv) { return kv.second.expires_at <= now; });
}

void AddressStore::maybe_sweep() {
    bool due;
    {
        std::lock_guard lock{sessions_mutex_};
        due = clock_.now() - last_sweep_ >= Millis{1000};
    }
    if (due)
        sweep_expired();
}

ServerFrame AddressStore::handle(const ClientFrame& frame) {
    maybe_sweep();
    return std::visit(
            overloaded{
                    [&](const CreateAddress& f) { return handle_create(f); },
                    [&](const UpdateAddress& f) { return handle_update(f); },
                    [&](const ReadAddress& f) { return handle_read(f); },
                    [&](const WriteAddress& f) { return handle_write(f); },
                    [&](const ChallengeAnswer& f) { return handle_answer(f); },
                    [&](const PurgeAddress& f) { return handle_purge(f); },
            },
            frame);
}

ServerFrame AddressStore::handle_create(const CreateAddress& frame) {
    ContentKey session_key;
    try {
        session_key = ContentKey{hybrid_open(server_key_, frame.hello)};
    } catch (const std::exception&) {
        return error(ErrorCode::BadFrame, "hello does not carry a session key");
    }

    PendingCreation pending{session_key, {}, {}, {}, clock_.now() + config_.creation_ttl};
    AddressId address;
    Bytes blob;
    {
        std::lock_guard rng_lock{rng_mutex_};
        pending.read = SecretExponent{random_exponent(params_, *rng_)};
        pending.write = SecretExponent{random_exponent(params_, *rng_)};
        pending.owner = SecretExponent{random_exponent(params_, *rng_)};
        std::lock_guard lock{pending_mutex_};
        for (;;) {
            address = AddressId::random(*rng_);
            if (!find(address) && !pending_.contains(address))
                break;
        }
        CreationSecrets secrets{address, pending.read, pending.write, pending.owner};
        blob = seal(session_key, to_bytes(secrets.serialize()), *rng_);
        pending_.emplace(address, std::move(pending));
    }
    return CreatedBlob{std::move(blob)};
}

std::optional<Error> AddressStore::check_new_keys(const UpdateAddress& update) const {
    try {
        update.read_key.validate(params_);
        update.write_key.validate(params_);
        update.owner_key.validate(params_);
    } catch (const GroupError& e) {
        return error(ErrorCode::InvalidKey, e.what());
    }
    if (update.owner_key.is_wildcard() && !config_.allow_ownerless)
        return error(ErrorCode::OwnerlessForbidden, "owner key may not be the wildcard");
    return std::nullopt;
}

ServerFrame AddressStore::issue(
        const AddressId& address, Permission permission, const AddressKey& key, std::uint64_t version,
        bool for_creation, ClientFrame pending) {
    IssuedChallenge issued;
    SessionId session;
    {
        std::lock_guard rng_lock{rng_mutex_};
        issued = make_challenge(params_, key, *rng_);
        std::lock_guard lock{sessions_mutex_};
        do {
            session = SessionId::random(*rng_);
        } while (sessions_.contains(session));
        sessions_.emplace(
                session,
                ChallengeSession{
                        address, permission, std::move(pending), issued.expected, version, for_creation,
                        clock_.now() + config_.challenge_ttl});
    }
    return ChallengeIssued{session, issued.challenge};
}

ServerFrame AddressStore::handle_update(const UpdateAddress& frame) {
    if (auto err = check_new_keys(frame))
        return *err;

    if (auto record = find(frame.address)) {
        std::unique_lock lock{record->mutex};
        if (record->owner_key.is_wildcard())
            return install(frame.address, *record, frame);
        auto owner = record->owner_key;
        auto version = record->version;
        lock.unlock();
        return issue(frame.address, Permission::Own, owner, version, false, frame);
    }

    AddressKey owner = AddressKey::wildcard();
    {
        std::lock_guard lock{pending_mutex_};
        auto it = pending_.find(frame.address);
        if (it == pending_.end() || it->second.expires_at <= clock_.now())
            return error(ErrorCode::NoSuchAddress, "no such address");
        owner = public_key_for(params_, it->second.owner);
    }
    return issue(frame.address, Permission::Own, owner, 0, true, frame);
}

ServerFrame AddressStore::handle_read(const ReadAddress& frame) {
    auto record = find(frame.address);
    if (!record)
        return error(ErrorCode::NoSuchAddress, "no such address");
    std::unique_lock lock{record->mutex};
    if (record->read_key.is_wildcard())
        return serve_read(*record, frame.cursor);
    auto key = record->read_key;
    auto version = record->version;
    lock.unlock();
    return issue(frame.address, Permission::Read, key, version, false, frame);
}

ServerFrame AddressStore::handle_write(const WriteAddress& frame) {
    if (frame.payload.size() > config_.max_payload)
        return error(ErrorCode::TooLarge, "payload exceeds maximum message size");
    auto record = find(frame.address);
    if (!record)
        return error(ErrorCode::NoSuchAddress, "no such address");
    std::unique_lock lock{record->mutex};
    if (record->write_key.is_wildcard())
        return append(frame.address, *record, frame.payload);
    auto key = record->write_key;
    auto version = record->version;
    lock.unlock();
    return issue(frame.address, Permission::Write, key, version, false, frame);
}

ServerFrame AddressStore::handle_purge(const PurgeAddress& frame) {
    auto record = find(frame.address);
    if (!record)
        return error(ErrorCode::NoSuchAddress, "no such address");
    std::unique_lock lock{record->mutex};
    if (record->owner_key.is_wildcard())
        return purge(frame.address, *record, frame.upto);
    auto key = record->owner_key;
    auto version = record->version;
    lock.unlock();
    return issue(frame.address, Permission::Own, key, version, false, frame);
}

ServerFrame AddressStore::handle_answer(const ChallengeAnswer& frame) {
    ChallengeSession session;
    {
        std::lock_guard lock{sessions_mutex_};
        auto it = sessions_.find(frame.session);
        if (it == sessions_.end())
            return error(ErrorCode::UnknownSession, "unknown challenge session");
        session = std::move(it->second);
        sessions_.erase(it);
    }
    if (session.expires_at <= clock_.now())
        return error(ErrorCode::ChallengeExpired, "challenge expired");
    if (frame.value != session.expected)
        return error(ErrorCode::AccessDenied, "access denied");
    return execute(session);
}

ServerFrame AddressStore::execute(const ChallengeSession& session) {
    if (session.for_creation) {
        const auto& update = std::get<UpdateAddress>(session.pending);
        {
            std::lock_guard lock{pending_mutex_};
            auto it = pending_.find(session.address);
            if (it == pending_.end() || it->second.expires_at <= clock_.now())
                return error(ErrorCode::NoSuchAddress, "no such address");
            pending_.erase(it);
        }
        auto record = std::make_shared<Record>();
        record->read_key = update.read_key;
        record->write_key = update.write_key;
        record->owner_key = update.owner_key;
        {
            std::unique_lock lock{records_mutex_};
            records_.emplace(session.address, record);
        }
        emit({StoreDelta::Kind::Created, session.address, 0, 0});
        return AddressCreated{session.address};
    }

    auto record = find(session.address);
    if (!record)
        return error(ErrorCode::NoSuchAddress, "no such address");
    std::lock_guard lock{record->mutex};
    // A proof is only valid against the key triple it was issued for.
    if (record->version != session.key_version)
        return error(ErrorCode::AccessDenied, "access denied");
    return std::visit(
            overloaded{
                    [&](const UpdateAddress& f) -> ServerFrame { return install(session.address, *record, f); },
                    [&](const ReadAddress& f) -> ServerFrame { return serve_read(*record, f.cursor); },
                    [&](const WriteAddress& f) -> ServerFrame {
                        return append(session.address, *record, f.payload);
                    },
                    [&](const PurgeAddress& f) -> ServerFrame { return purge(session.address, *record, f.upto); },
                    [&](const auto&) -> ServerFrame { return error(ErrorCode::BadFrame, "unexpected pending frame"); },
            },
            session.pending);
}

ServerFrame AddressStore::serve_read(Record& record, std::uint64_t cursor) {
    Messages out;
    auto start = std::max(cursor, record.base);
    auto end = record.base + record.messages.size();
    for (auto i = start; i < end; ++i)
        out.payloads.push_back(record.messages[i - record.base]);
    out.next_cursor = std::max(cursor, end);
    return out;
}

ServerFrame AddressStore::append(const AddressId& address, Record& record, Bytes payload) {
    auto index = record.base + record.messages.size();
    auto size = payload.size();
    record.messages.push_back(std::move(payload));
    emit({StoreDelta::Kind::Appended, address, index, size});
    return Ack{};
}

ServerFrame AddressStore::purge(const AddressId& address, Record& record, std::uint64_t upto) {
    auto end = record.base + record.messages.size();
    upto = std::min(upto, end);
    while (record.base < upto) {
        record.messages.pop_front();
        ++record.base;
    }
    emit({StoreDelta::Kind::Purged, address, upto, 0});
    return Ack{};
}

ServerFrame AddressStore::install(const AddressId& address, Record& record, const UpdateAddress& update) {
    record.read_key = update.read_key;
    record.write_key = update.write_key;
    record.owner_key = update.owner_key;
    ++record.version;
    emit({StoreDelta::Kind::Updated, address, record.version, 0});
    return AddressCreated{address};
}

std::string AddressStore::snapshot() const {
    std::ostringstream out;
    out << snapshot_magic << '\n';
    out << "group " << element_to_hex(params_.modulus) << ' ' << element_to_hex(params_.order) << ' '
        << element_to_hex(params_.generator) << '\n';
    std::shared_lock lock{records_mutex_};
    for (const auto& [address, record] : records_) {
        std::lock_guard record_lock{record->mutex};
        out << "address " << address.to_string() << ' ' << record->read_key.to_string() << ' '
            << record->write_key.to_string() << ' ' << record->owner_key.to_string() << ' '
            << record->version << ' ' << record->base << ' ' << record->messages.size() << '\n';
        for (const auto& m : record->messages)
            out << "m " << (m.empty() ? std::string{"-"} : to_hex(m)) << '\n';
    }
    auto body = out.str();
    return body + "end " + to_hex(sha256(to_bytes(body))) + "\n";
}

void AddressStore::restore(std::string_view snapshot) {
    auto fail = [](const std::string& why) { return RestoreError{"corrupt snapshot: " + why}; };

    auto end_pos = snapshot.rfind("end ");
    if (end_pos == std::string_view::npos || (end_pos != 0 && snapshot[end_pos - 1] != '\n'))
        throw fail("missing trailer");
    auto body = snapshot.substr(0, end_pos);
    auto trailer = snapshot.substr(end_pos + 4);
    if (trailer.empty() || trailer.back() != '\n')
        throw fail("truncated trailer");
    trailer.remove_suffix(1);
    if (trailer != to_hex(sha256(to_bytes(body))))
        throw fail("checksum mismatch");

    std::vector<std::string_view> lines;
    for (std::size_t pos = 0; pos < body.size();) {
        auto nl = body.find('\n', pos);
        if (nl == std::string_view::npos)
            throw fail("unterminated line");
        lines.push_back(body.substr(pos, nl - pos));
        pos = nl + 1;
    }
    if (lines.size() < 2 || lines[0] != snapshot_magic)
        throw fail("bad header");

    std::map<AddressId, std::shared_ptr<Record>> restored;
    try {
        auto group = split_spaces(lines[1]);
        if (group.size() != 4 || group[0] != "group")
            throw fail("bad group line");
        GroupParams stored{
                element_from_hex(group[1]), element_from_hex(group[2]), element_from_hex(group[3])};
        if (!(stored == params_))
            throw fail("snapshot was taken with different group parameters");

        for (std::size_t i = 2; i < lines.size();) {
            auto f = split_spaces(lines[i++]);
            if (f.size() != 8 || f[0] != "address")
                throw fail("expected address record");
            auto record = std::make_shared<Record>();
            auto address = AddressId::parse(f[1]);
            record->read_key = AddressKey::parse(f[2]);
            record->write_key = AddressKey::parse(f[3]);
            record->owner_key = AddressKey::parse(f[4]);
            record->read_key.validate(params_);
            record->write_key.validate(params_);
            record->owner_key.validate(params_);
            record->version = std::stoull(std::string{f[5]});
            record->base = std::stoull(std::string{f[6]});
            auto count = std::stoull(std::string{f[7]});
            for (std::uint64_t k = 0; k < count; ++k) {
                if (i >= lines.size() || lines[i].substr(0, 2) != "m ")
                    throw fail("missing message line");
                auto hex = lines[i++].substr(2);
                record->messages.push_back(hex == "-" ? Bytes{} : from_hex(hex));
            }
            if (!restored.emplace(address, std::move(record)).second)
                throw fail("duplicate address");
        }
    } catch (const RestoreError&) {
        throw;
    } catch (const std::exception& e) {
        throw fail(e.what());
    }

    std::unique_lock lock{records_mutex_};
    records_ = std::move(restored);
}

}  // namespace concealed
