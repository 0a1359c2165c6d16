#include "concealed/client.hpp"

#include <algorithm>
#include <set>

namespace concealed {

namespace {

constexpr std::string_view keyring_magic = "concealed-keyring";
constexpr std::string_view qr_prefix = "CONCEALED1:";

template <std::size_t N>
std::array<std::uint8_t, N> fixed_from_hex(const std::string& hex) {
    auto raw = from_hex(hex);
    if (raw.size() != N)
        throw std::invalid_argument{"wrong key length"};
    std::array<std::uint8_t, N> out;
    std::copy(raw.begin(), raw.end(), out.begin());
    return out;
}

}  // namespace

Json secrets_to_json(const AddressSecrets& s) {
    return {{"address", s.address.to_string()},
            {"owner", s.owner.to_hex()},
            {"read", s.read.to_hex()},
            {"write", s.write.to_hex()}};
}

AddressSecrets secrets_from_json(const Json& j) {
    return {AddressId::parse(j.at("address").get<std::string>()),
            SecretExponent::from_hex(j.at("read").get<std::string>()),
            SecretExponent::from_hex(j.at("write").get<std::string>()),
            SecretExponent::from_hex(j.at("owner").get<std::string>())};
}

Json ContactCard::to_json() const {
    Json j{{"encryption_key", to_hex(encryption_key)},
           {"encryption_key_id", encryption_key_id},
           {"inbox", inbox.to_string()},
           {"name", name},
           {"signing_key", to_hex(signing_key)},
           {"signing_key_id", signing_key_id},
           {"v", 1}};
    if (profile)
        j["profile"] = profile->to_string();
    if (directory_key)
        j["directory_key"] = directory_key->to_hex();
    return j;
}

ContactCard ContactCard::from_json(const Json& j) {
    try {
        if (j.at("v").get<int>() != 1)
            throw std::invalid_argument{"unsupported contact card version"};
        ContactCard c;
        c.name = j.at("name").get<std::string>();
        c.encryption_key_id = j.at("encryption_key_id").get<KeyId>();
        c.encryption_key = fixed_from_hex<32>(j.at("encryption_key").get<std::string>());
        c.signing_key_id = j.at("signing_key_id").get<KeyId>();
        c.signing_key = fixed_from_hex<32>(j.at("signing_key").get<std::string>());
        c.inbox = AddressId::parse(j.at("inbox").get<std::string>());
        if (j.contains("profile"))
            c.profile = AddressId::parse(j["profile"].get<std::string>());
        if (j.contains("directory_key"))
            c.directory_key = ContentKey::from_hex(j["directory_key"].get<std::string>());
        if (c.encryption_key_id == c.signing_key_id)
            throw std::invalid_argument{"contact card reuses a key id"};
        return c;
    } catch (const Json::exception& e) {
        throw std::invalid_argument{std::string{"bad contact card: "} + e.what()};
    }
}

ContactCard ContactCard::from_blob(std::string_view blob) {
    try {
        return from_json(Json::parse(blob));
    } catch (const Json::exception& e) {
        throw std::invalid_argument{std::string{"bad contact card: "} + e.what()};
    }
}

std::string ContactCard::to_qr_text() const {
    return std::string{qr_prefix} + to_hex(to_bytes(to_blob()));
}

ContactCard ContactCard::from_qr_text(std::string_view text) {
    if (!text.starts_with(qr_prefix))
        throw std::invalid_argument{"not a contact QR payload"};
    return from_blob(to_string(from_hex(text.substr(qr_prefix.size()))));
}

Keyring Keyring::generate(std::string name, Rng& rng) {
    Keyring k;
    k.name = std::move(name);
    k.identity.encryption = HybridKeyPair::generate(rng);
    k.identity.signing = SigningKeyPair::generate(rng);
    k.identity.encryption_key_id = k.new_key_id(rng);
    do {
        k.identity.signing_key_id = static_cast<KeyId>(rng.next_u64());
    } while (k.identity.signing_key_id == k.identity.encryption_key_id);
    return k;
}

KeyId Keyring::new_key_id(Rng& rng) const {
    for (;;) {
        auto id = static_cast<KeyId>(rng.next_u64());
        if (id != identity.encryption_key_id && id != identity.signing_key_id && !content_keys.contains(id))
            return id;
    }
}

Json Keyring::to_json() const {
    Json contacts_json = Json::object();
    for (const auto& [n, c] : contacts)
        contacts_json[n] = {{"card", c.card.to_json()}, {"verified", c.verified}};
    Json addresses_json = Json::object();
    for (const auto& [label, a] : addresses) {
        Json entry{{"cursor", a.cursor}, {"secrets", secrets_to_json(a.secrets)}};
        if (a.content_key)
            entry["content_key"] = a.content_key->to_hex();
        addresses_json[label] = entry;
    }
    Json keys_json = Json::object();
    for (const auto& [id, key] : content_keys)
        keys_json[std::to_string(id)] = key.to_hex();
    return {{"addresses", addresses_json},
            {"contacts", contacts_json},
            {"content_keys", keys_json},
            {"identity",
             {{"encryption_key_id", identity.encryption_key_id},
              {"encryption_secret", to_hex(identity.encryption.secret_key())},
              {"signing_key_id", identity.signing_key_id},
              {"signing_seed", to_hex(identity.signing.seed())}}},
            {"name", name},
            {"osn", osn_state},
            {"v", 1}};
}

Keyring Keyring::from_json(const Json& j) {
    try {
        Keyring k;
        k.name = j.at("name").get<std::string>();
        const auto& id = j.at("identity");
        k.identity.encryption_key_id = id.at("encryption_key_id").get<KeyId>();
        k.identity.encryption = HybridKeyPair::from_secret(from_hex(id.at("encryption_secret").get<std::string>()));
        k.identity.signing_key_id = id.at("signing_key_id").get<KeyId>();
        k.identity.signing = SigningKeyPair::from_seed(from_hex(id.at("signing_seed").get<std::string>()));
        for (const auto& [n, c] : j.at("contacts").items())
            k.contacts[n] = {ContactCard::from_json(c.at("card")), c.at("verified").get<bool>()};
        for (const auto& [label, a] : j.at("addresses").items()) {
            HeldAddress held{secrets_from_json(a.at("secrets")), std::nullopt, a.at("cursor").get<std::uint64_t>()};
            if (a.contains("content_key"))
                held.content_key = ContentKey::from_hex(a["content_key"].get<std::string>());
            k.addresses[label] = held;
        }
        for (const auto& [id_text, key] : j.at("content_keys").items())
            k.content_keys[static_cast<KeyId>(std::stoul(id_text))] = ContentKey::from_hex(key.get<std::string>());
        k.osn_state = j.at("osn");
        return k;
    } catch (const std::exception& e) {
        throw KeyringError{std::string{"bad keyring: "} + e.what()};
    }
}

std::string Keyring::save(std::string_view passphrase, Rng& rng, bool fast_kdf) const {
    auto salt = rng.bytes(16);
    auto key = derive_passphrase_key(passphrase, salt, fast_kdf);
    Json file{{"ciphertext", to_hex(seal(key, to_bytes(canonical(to_json())), rng))},
              {"fast_kdf", fast_kdf},
              {"format", keyring_magic},
              {"salt", to_hex(salt)},
              {"suite", cipher_suite}};
    return canonical(file) + "\n";
}

Keyring Keyring::load(std::string_view file_contents, std::string_view passphrase) {
    Json file;
    try {
        file = Json::parse(file_contents);
        if (file.at("format").get<std::string>() != keyring_magic)
            throw KeyringError{"not a keyring file"};
        if (file.at("suite").get<std::string>() != cipher_suite)
            throw KeyringError{"unsupported cipher suite"};
    } catch (const Json::exception& e) {
        throw KeyringError{std::string{"bad keyring file: "} + e.what()};
    }
    auto key = derive_passphrase_key(passphrase, from_hex(file["salt"].get<std::string>()),
                                     file.at("fast_kdf").get<bool>());
    Bytes plain;
    try {
        plain = open(key, from_hex(file["ciphertext"].get<std::string>()));
    } catch (const DecryptError&) {
        throw KeyringError{"wrong passphrase or damaged keyring"};
    }
    return from_json(Json::parse(to_string(plain)));
}

const Contact& Keyring::contact(const std::string& n) const {
    auto it = contacts.find(n);
    if (it == contacts.end())
        throw KeyringError{"unknown contact " + n};
    return it->second;
}

Contact& Keyring::contact(const std::string& n) {
    return const_cast<Contact&>(std::as_const(*this).contact(n));
}

const HeldAddress& Keyring::address(const std::string& label) const {
    auto it = addresses.find(label);
    if (it == addresses.end())
        throw KeyringError{"unknown address " + label};
    return it->second;
}

HeldAddress& Keyring::address(const std::string& label) {
    return const_cast<HeldAddress&>(std::as_const(*this).address(label));
}

Client::Client(Keyring& keyring, Connection& connection, GroupParams params, HybridPublicKey server_key, Rng& rng,
               ClientConfig config)
        : keyring_{keyring}, rng_{rng}, engine_{connection, std::move(params), server_key, rng}, config_{config} {
    config_.format.validate();
    if (config_.min_path > config_.max_path || config_.max_path > config_.format.max_hops)
        throw std::invalid_argument{"bad path length range"};
}

ContactCard Client::card() const {
    return card_with(std::nullopt, std::nullopt);
}

ContactCard Client::card_with(const std::optional<AddressId>& profile, const std::optional<ContentKey>& directory_key) const {
    const auto& id = keyring_.identity;
    ContactCard c;
    c.name = keyring_.name;
    c.encryption_key_id = id.encryption_key_id;
    c.encryption_key = id.encryption.public_key();
    c.signing_key_id = id.signing_key_id;
    c.signing_key = id.signing.public_key();
    c.inbox = keyring_.address("inbox").secrets.address;
    c.profile = profile;
    c.directory_key = directory_key;
    return c;
}

HeldAddress& Client::create_address(const std::string& label, AddressOptions options,
                                    std::optional<ContentKey> content_key) {
    auto secrets = engine_.create_address(options);
    auto& held = keyring_.addresses[label];
    held = HeldAddress{secrets, std::move(content_key), 0};
    return held;
}

HeldAddress& Client::ensure_inbox() {
    if (auto it = keyring_.addresses.find("inbox"); it != keyring_.addresses.end())
        return it->second;
    return create_address("inbox", {.open_write = true});
}

void Client::add_contact(const ContactCard& card) {
    keyring_.contacts[card.name] = Contact{card, false};
}

std::vector<Hop> Client::choose_path(const std::vector<MixDirectoryEntry>& mixes, std::optional<std::size_t> length,
                                     const HybridPublicKey* avoid) {
    std::vector<const MixDirectoryEntry*> candidates;
    for (const auto& m : mixes)
        if (!avoid || m.public_key != *avoid)
            candidates.push_back(&m);
    std::size_t l = length ? *length
                           : std::min(candidates.size(),
                                      config_.min_path + static_cast<std::size_t>(
                                                                 rng_.uniform(config_.max_path - config_.min_path + 1)));
    if (l > candidates.size())
        throw std::invalid_argument{"path longer than the number of available mixes"};
    if (l > config_.format.max_hops)
        throw std::invalid_argument{"path longer than the routing header allows"};
    rng_.shuffle(candidates.begin(), candidates.end());
    std::vector<Hop> path;
    for (std::size_t i = 0; i < l; ++i) {
        const auto& m = *candidates[i];
        path.push_back({m.public_key, m.inboxes[rng_.uniform(m.inboxes.size())]});
    }
    return path;
}

Onion Client::build_onion(ByteView inner, const AddressId& destination, const std::vector<Hop>& path) {
    auto item = build_item(config_.format, inner, path, destination, rng_);
    auto envelopes = pack_items({std::move(item)}, config_.format, rng_);
    return {path.empty() ? destination : path.front().inbox, std::move(envelopes.front()), path};
}

void Client::send(const Onion& onion) {
    engine_.write(onion.first_hop, onion.envelope);
}

Onion Client::send_mail(const std::string& contact, const Json& mail, const std::vector<MixDirectoryEntry>& mixes,
                        std::optional<std::size_t> length) {
    const auto& card = keyring_.contact(contact).card;
    auto inner = hybrid_seal(card.encryption_key, to_bytes(canonical(mail)), rng_);
    // A contact running a mix never relays messages addressed to itself.
    auto onion = build_onion(inner, card.inbox, choose_path(mixes, length, &card.encryption_key));
    send(onion);
    return onion;
}

Onion Client::send_sealed(const AddressId& destination, const ContentKey& key, ByteView plaintext,
                          const std::vector<MixDirectoryEntry>& mixes, std::optional<std::size_t> length) {
    auto onion = build_onion(seal(key, plaintext, rng_), destination, choose_path(mixes, length));
    send(onion);
    return onion;
}

void Client::write_sealed(const AddressId& destination, const SecretExponent& write, const ContentKey& key,
                          ByteView plaintext) {
    write_record(destination, write, seal(key, plaintext, rng_));
}

void Client::write_record(const AddressId& destination, const SecretExponent& write, ByteView inner) {
    auto onion = build_onion(inner, destination, {});
    engine_.write(destination, onion.envelope, write);
}

std::vector<Bytes> Client::read_records(const AddressId& address, const SecretExponent& read, std::uint64_t cursor,
                                        std::uint64_t* next_cursor) {
    auto batch = engine_.read(address, read, cursor);
    if (next_cursor)
        *next_cursor = batch.next_cursor;
    std::vector<Bytes> out;
    std::size_t bad = 0;
    auto raw = [](ByteView inner) -> std::optional<Bytes> { return Bytes(inner.begin(), inner.end()); };
    for (const auto& payload : batch.payloads)
        open_items(payload, raw, out, bad);
    return out;
}

void Client::open_items(ByteView envelope, const std::function<std::optional<Bytes>(ByteView)>& opener,
                        std::vector<Bytes>& out, std::size_t& undecryptable) {
    std::vector<Bytes> items;
    try {
        items = split(envelope);
    } catch (const EnvelopeError&) {
        ++undecryptable;
        return;
    }
    for (const auto& item : items) {
        Bytes inner;
        try {
            inner = item_inner(config_.format, item);
        } catch (const std::exception&) {
            continue;  // dummy filler
        }
        if (auto plain = opener(inner))
            out.push_back(std::move(*plain));
        else
            ++undecryptable;
    }
}

Received Client::receive(const AddressId& address, const SecretExponent& read, const ContentKey& key,
                         std::uint64_t cursor) {
    auto batch = engine_.read(address, read, cursor);
    Received r;
    r.next_cursor = batch.next_cursor;
    auto opener = [&](ByteView inner) -> std::optional<Bytes> {
        try {
            return open(key, inner);
        } catch (const DecryptError&) {
            return std::nullopt;
        }
    };
    for (const auto& payload : batch.payloads)
        open_items(payload, opener, r.plaintexts, r.undecryptable);
    return r;
}

std::vector<Json> Client::receive_mail() {
    auto& inbox = keyring_.address("inbox");
    auto batch = engine_.read(inbox.secrets.address, inbox.secrets.read, inbox.cursor);
    inbox.cursor = batch.next_cursor;
    const auto& me = keyring_.identity.encryption;
    auto opener = [&](ByteView inner) -> std::optional<Bytes> {
        try {
            return hybrid_open(me, inner);
        } catch (const DecryptError&) {
            return std::nullopt;
        }
    };
    std::vector<Bytes> plain;
    std::size_t bad = 0;
    for (const auto& payload : batch.payloads)
        open_items(payload, opener, plain, bad);
    std::vector<Json> out;
    for (const auto& p : plain) {
        try {
            out.push_back(Json::parse(to_string(p)));
        } catch (const Json::exception&) {
        }
    }
    return out;
}

void Client::transfer_ownership(const std::string& label, const std::string& contact,
                                const std::vector<MixDirectoryEntry>& mixes, std::optional<std::size_t> length) {
    const auto& held = keyring_.address(label);
    Json mail{{"address", held.secrets.address.to_string()},
              {"open_read", held.secrets.read.is_wildcard()},
              {"open_write", held.secrets.write.is_wildcard()},
              {"owner", held.secrets.owner.to_hex()},
              {"t", "owner"}};
    if (held.content_key)
        mail["content_key"] = held.content_key->to_hex();
    send_mail(contact, mail, mixes, length);
}

HeldAddress& Client::accept_ownership(const Json& mail, const std::string& label) {
    if (mail.value("t", "") != "owner")
        throw std::invalid_argument{"not an ownership transfer"};
    auto address = AddressId::parse(mail.at("address").get<std::string>());
    auto old_owner = SecretExponent::from_hex(mail.at("owner").get<std::string>());
    AddressSecrets fresh{address, mail.at("open_read").get<bool>() ? SecretExponent{} : engine_.fresh_secret(),
                         mail.at("open_write").get<bool>() ? SecretExponent{} : engine_.fresh_secret(),
                         engine_.fresh_secret()};
    engine_.rekey(address, old_owner, fresh.read, fresh.write, fresh.owner);
    std::optional<ContentKey> key;
    if (mail.contains("content_key"))
        key = ContentKey::from_hex(mail["content_key"].get<std::string>());
    auto& held = keyring_.addresses[label];
    held = HeldAddress{fresh, key, 0};
    return held;
}

namespace {

std::vector<FingerprintEntry> fingerprint_entries(const Identity& me, const ContactCard& them) {
    return {{me.encryption_key_id, Bytes(me.encryption.public_key().begin(), me.encryption.public_key().end())},
            {me.signing_key_id, Bytes(me.signing.public_key().begin(), me.signing.public_key().end())},
            {them.encryption_key_id, Bytes(them.encryption_key.begin(), them.encryption_key.end())},
            {them.signing_key_id, Bytes(them.signing_key.begin(), them.signing_key.end())}};
}

}  // namespace

std::string Client::fingerprint_with(const std::string& contact) const {
    return fingerprint(fingerprint_entries(keyring_.identity, keyring_.contact(contact).card));
}

std::vector<KeyId> Client::fingerprint_key_ids(const std::string& contact) const {
    std::vector<KeyId> ids;
    for (const auto& e : fingerprint_entries(keyring_.identity, keyring_.contact(contact).card))
        ids.push_back(e.key_id);
    std::sort(ids.begin(), ids.end());
    return ids;
}

bool Client::verify_contact(const std::string& contact, const std::vector<KeyId>& their_ids,
                            const std::string& their_words) {
    auto mine = fingerprint_key_ids(contact);
    std::set<KeyId> theirs(their_ids.begin(), their_ids.end());
    if (std::none_of(mine.begin(), mine.end(), [&](KeyId id) { return theirs.contains(id); }))
        throw std::invalid_argument{"no key id in common with the other side"};
    bool same_ids = std::set<KeyId>(mine.begin(), mine.end()) == theirs;
    bool ok = same_ids && fingerprint_with(contact) == their_words;
    keyring_.contact(contact).verified = ok;
    return ok;
}

}  // namespace concealed
