#include "concealed/osn.hpp"

#include <algorithm>
#include <deque>

namespace concealed {

namespace {

std::string kind_name(ProfileEntry::Kind kind) {
    switch (kind) {
        case ProfileEntry::Kind::Public:
            return "public";
        case ProfileEntry::Kind::Field:
            return "field";
        case ProfileEntry::Kind::Feed:
            return "feed";
        case ProfileEntry::Kind::Pinboard:
            return "pinboard";
    }
    return "field";
}

std::optional<Json> open_json(const ContentKey& key, const std::string& box_hex) {
    try {
        return Json::parse(to_string(open(key, from_hex(box_hex))));
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

// Opens a {"t":"sealed"} record with whichever held key matches its id.
std::optional<Json> open_sealed(const Json& record, const std::map<KeyId, ContentKey>& keys) {
    auto it = keys.find(record.value("key_id", KeyId{0}));
    if (it == keys.end())
        return std::nullopt;
    return open_json(it->second, record.value("box", ""));
}

SigningPublicKey signing_key_from_hex(const std::string& hex) {
    auto raw = from_hex(hex);
    if (raw.size() != 32)
        throw std::invalid_argument{"bad signing key"};
    SigningPublicKey out;
    std::copy(raw.begin(), raw.end(), out.begin());
    return out;
}

Json chat_to_json(const ChatChannel& c) {
    Json keys = Json::object();
    for (const auto& [gen, k] : c.keys)
        keys[std::to_string(gen)] = {{"id", k.first}, {"key", k.second.to_hex()}};
    return {{"cursor", c.cursor},
            {"generation", c.generation},
            {"keys", keys},
            {"members", c.members},
            {"secrets", secrets_to_json(c.secrets)},
            {"title", c.title}};
}

ChatChannel chat_from_json(const Json& j) {
    ChatChannel c;
    c.title = j.at("title").get<std::string>();
    c.secrets = secrets_from_json(j.at("secrets"));
    c.generation = j.at("generation").get<std::uint64_t>();
    for (const auto& [gen, k] : j.at("keys").items())
        c.keys[std::stoull(gen)] = {k.at("id").get<KeyId>(), ContentKey::from_hex(k.at("key").get<std::string>())};
    c.members = j.at("members").get<std::vector<std::string>>();
    c.cursor = j.at("cursor").get<std::uint64_t>();
    return c;
}

}  // namespace

namespace records {

namespace {
constexpr std::uint8_t tag_sealed = 1;
constexpr std::uint8_t tag_keys = 2;
constexpr std::uint8_t tag_wrap = 3;
}  // namespace

Bytes plain(const std::string& label, const std::string& value) {
    return to_bytes(canonical({{"label", label}, {"t", "plain"}, {"value", value}}));
}

Bytes sealed(KeyId key_id, const ContentKey& key, const Json& inner, Rng& rng) {
    Bytes out{tag_sealed, static_cast<std::uint8_t>(key_id >> 24), static_cast<std::uint8_t>(key_id >> 16),
              static_cast<std::uint8_t>(key_id >> 8), static_cast<std::uint8_t>(key_id)};
    auto box = seal(key, to_bytes(canonical(inner)), rng);
    out.insert(out.end(), box.begin(), box.end());
    return out;
}

Bytes keys(ByteView box) {
    Bytes out{tag_keys};
    out.insert(out.end(), box.begin(), box.end());
    return out;
}

Bytes wrap(ByteView box) {
    Bytes out{tag_wrap};
    out.insert(out.end(), box.begin(), box.end());
    return out;
}

std::optional<Json> parse(ByteView raw) {
    if (raw.empty())
        return std::nullopt;
    switch (raw[0]) {
        case tag_sealed:
            if (raw.size() < 5)
                return std::nullopt;
            return Json{{"box", to_hex(raw.subspan(5))},
                        {"key_id", KeyId{raw[1]} << 24 | KeyId{raw[2]} << 16 | KeyId{raw[3]} << 8 | KeyId{raw[4]}},
                        {"t", "sealed"}};
        case tag_keys:
            return Json{{"box", to_hex(raw.subspan(1))}, {"t", "keys"}};
        case tag_wrap:
            return Json{{"box", to_hex(raw.subspan(1))}, {"t", "wrap"}};
        default:
            break;
    }
    try {
        auto j = Json::parse(to_string(raw));
        if (j.is_object() && j.value("t", "") == "plain")
            return j;
    } catch (const Json::exception&) {
    }
    return std::nullopt;
}

Json link(const LinkTarget& target) {
    Json j{{"address", target.address.to_string()},
           {"key", target.key.to_hex()},
           {"key_id", target.key_id},
           {"label", target.label},
           {"open_write", target.open_write},
           {"read", target.read.to_hex()},
           {"t", "link"}};
    if (!target.write.is_wildcard())
        j["write"] = target.write.to_hex();
    return j;
}

LinkTarget parse_link(const Json& inner) {
    LinkTarget t;
    t.label = inner.at("label").get<std::string>();
    t.address = AddressId::parse(inner.at("address").get<std::string>());
    t.read = SecretExponent::from_hex(inner.at("read").get<std::string>());
    if (inner.contains("write"))
        t.write = SecretExponent::from_hex(inner["write"].get<std::string>());
    t.open_write = inner.at("open_write").get<bool>();
    t.key_id = inner.at("key_id").get<KeyId>();
    t.key = ContentKey::from_hex(inner.at("key").get<std::string>());
    return t;
}

}  // namespace records

Osn::Osn(Client& client, std::vector<MixDirectoryEntry> mixes) : client_{client}, mixes_{std::move(mixes)} {}

Json& Osn::state(const char* section) {
    auto& s = client_.keyring().osn_state;
    if (!s.contains(section))
        s[section] = Json::object();
    return s[section];
}

const Json* Osn::find_state(const char* section, const std::string& key) const {
    const auto& s = client_.keyring().osn_state;
    if (!s.contains(section) || !s[section].contains(key))
        return nullptr;
    return &s[section][key];
}

void Osn::require_verified(const std::string& contact) const {
    if (!client_.keyring().contact(contact).verified)
        throw std::invalid_argument{"contact " + contact + " is not verified"};
}

// ---- profiles ----

LinkTarget Osn::profile_link(const Json& entry, const std::string& label) const {
    const auto& kr = client_.keyring();
    const auto& profile = kr.osn_state.at("profile");
    KeyId id = profile.at("keys").at(entry.at("key").get<std::string>()).at("id").get<KeyId>();
    const auto& held = kr.address(entry.at("address").get<std::string>());
    LinkTarget t;
    t.label = label;
    t.address = held.secrets.address;
    t.read = held.secrets.read;
    t.open_write = entry.at("kind") == "pinboard";
    t.key_id = id;
    t.key = kr.content_keys.at(id);
    return t;
}

PublishedProfile Osn::publish_profile(const std::vector<ProfileEntry>& entries) {
    auto& kr = client_.keyring();
    if (kr.osn_state.contains("profile"))
        throw std::invalid_argument{"profile already published"};
    std::set<std::string> labels;
    for (const auto& e : entries)
        if (!labels.insert(e.label).second)
            throw std::invalid_argument{"duplicate profile label " + e.label};

    auto& rng = client_.rng();
    auto root = client_.create_address("profile", {.open_read = true}).secrets;
    auto dir = client_.create_address("profile/keys").secrets;
    auto directory_key = ContentKey::generate(rng);
    auto& profile = kr.osn_state["profile"];
    profile = {{"directory_key", directory_key.to_hex()}, {"entries", Json::array()}, {"keys", Json::object()}};

    auto key_for = [&](const std::string& name) {
        if (!profile["keys"].contains(name)) {
            auto id = kr.new_key_id(rng);
            kr.content_keys[id] = ContentKey::generate(rng);
            profile["keys"][name] = {{"grantees", Json::array()}, {"id", id}};
        }
        auto id = profile["keys"][name]["id"].get<KeyId>();
        return std::pair{id, kr.content_keys.at(id)};
    };

    const auto& me = kr.identity;
    client_.write_record(root.address, root.write,
                         records::plain("Public key", to_hex(me.encryption.public_key()) + " " +
                                                              to_hex(me.signing.public_key())));
    for (const auto& e : entries) {
        Json entry{{"kind", kind_name(e.kind)}, {"label", e.label}};
        if (e.kind == ProfileEntry::Kind::Public) {
            client_.write_record(root.address, root.write, records::plain(e.label, e.value));
            continue;
        }
        auto [id, key] = key_for(e.key_name);
        entry["key"] = e.key_name;
        switch (e.kind) {
            case ProfileEntry::Kind::Field: {
                auto label = "profile/field/" + e.label;
                auto target = client_.create_address(label).secrets;
                client_.write_record(target.address, target.write,
                                     records::sealed(id, key, {{"t", "value"}, {"value", e.value}}, rng));
                entry["address"] = label;
                entry["value"] = e.value;
                break;
            }
            case ProfileEntry::Kind::Feed: {
                auto label = "profile/feed/" + e.label;
                client_.create_address(label);
                auto via_label = "profile/via/" + e.label;
                auto via = client_.create_address(via_label).secrets;
                entry["address"] = label;
                entry["via"] = via_label;
                client_.write_record(via.address, via.write,
                                     records::sealed(id, key, records::link(profile_link(entry, e.label)), rng));
                break;
            }
            case ProfileEntry::Kind::Pinboard: {
                auto label = "profile/board/" + e.label;
                client_.create_address(label, {.open_write = true});
                entry["address"] = label;
                break;
            }
            case ProfileEntry::Kind::Public:
                break;
        }
        profile["entries"].push_back(entry);
        auto target = profile_link(entry, e.label);
        if (entry.contains("via")) {
            const auto& via = kr.address(entry["via"].get<std::string>()).secrets;
            target.address = via.address;
            target.read = via.read;
        }
        client_.write_record(root.address, root.write, records::sealed(id, key, records::link(target), rng));
    }
    Json locator{{"address", dir.address.to_string()}, {"read", dir.read.to_hex()}};
    client_.write_record(root.address, root.write,
                         records::keys(seal(directory_key, to_bytes(canonical(locator)), rng)));

    PublishedProfile out{root.address, directory_key, {}};
    out.key_ids = profile_key_ids();
    return out;
}

std::map<std::string, KeyId> Osn::profile_key_ids() const {
    std::map<std::string, KeyId> out;
    if (const auto* profile = find_state("profile", "keys"))
        for (const auto& [name, k] : profile->items())
            out[name] = k.at("id").get<KeyId>();
    return out;
}

ContactCard Osn::profile_card() const {
    const auto& kr = client_.keyring();
    if (!kr.osn_state.contains("profile"))
        return client_.card();
    return client_.card_with(kr.address("profile").secrets.address,
                             ContentKey::from_hex(kr.osn_state["profile"]["directory_key"].get<std::string>()));
}

bool Osn::grant_profile_access(const std::string& contact, const std::vector<KeyId>& key_ids) {
    auto& kr = client_.keyring();
    const auto& who = kr.contact(contact);
    auto& profile = state("profile");
    const auto& dir = kr.address("profile/keys").secrets;
    for (auto id : key_ids) {
        auto name = std::find_if(profile["keys"].items().begin(), profile["keys"].items().end(),
                                 [&](const auto& item) { return item.value()["id"].template get<KeyId>() == id; });
        if (name == profile["keys"].items().end())
            throw std::invalid_argument{"unknown profile key id " + std::to_string(id)};
        auto& grantees = name.value()["grantees"];
        if (std::find(grantees.begin(), grantees.end(), contact) == grantees.end())
            grantees.push_back(contact);
        Json wrapped{{"key", kr.content_keys.at(id).to_hex()}, {"key_id", id}};
        client_.write_record(dir.address, dir.write,
                             records::wrap(hybrid_seal(who.card.encryption_key, to_bytes(canonical(wrapped)),
                                                       client_.rng())));
    }
    return who.verified;
}

KeyId Osn::rotate_field_key(KeyId key_id, const std::vector<std::string>& revoke) {
    auto& kr = client_.keyring();
    auto& rng = client_.rng();
    auto& engine = client_.engine();
    auto& profile = state("profile");
    std::string name;
    for (const auto& [n, k] : profile["keys"].items())
        if (k["id"].get<KeyId>() == key_id)
            name = n;
    if (name.empty())
        throw std::invalid_argument{"unknown profile key id " + std::to_string(key_id)};

    auto new_id = kr.new_key_id(rng);
    kr.content_keys[new_id] = ContentKey::generate(rng);
    auto& key_state = profile["keys"][name];
    key_state["id"] = new_id;
    Json remaining = Json::array();
    for (const auto& g : key_state["grantees"])
        if (std::find(revoke.begin(), revoke.end(), g.get<std::string>()) == revoke.end())
            remaining.push_back(g);
    key_state["grantees"] = remaining;
    const auto& key = kr.content_keys.at(new_id);

    auto rekey = [&](const std::string& label, bool open_write) {
        auto& held = kr.address(label);
        held.secrets.read = engine.fresh_secret();
        held.secrets.write = open_write ? SecretExponent{} : engine.fresh_secret();
        engine.rekey(held.secrets.address, held.secrets.owner, held.secrets.read, held.secrets.write,
                     held.secrets.owner);
        return held.secrets;
    };

    const auto& root = kr.address("profile").secrets;
    for (const auto& entry : profile["entries"]) {
        if (entry.value("key", "") != name)
            continue;
        auto label = entry["label"].get<std::string>();
        auto kind = entry["kind"].get<std::string>();
        auto target_secrets = rekey(entry["address"].get<std::string>(), kind == "pinboard");
        auto target = profile_link(entry, label);
        if (kind == "field")
            client_.write_record(target_secrets.address, target_secrets.write,
                                 records::sealed(new_id, key, {{"t", "value"}, {"value", entry["value"]}}, rng));
        if (entry.contains("via")) {
            auto via = rekey(entry["via"].get<std::string>(), false);
            client_.write_record(via.address, via.write, records::sealed(new_id, key, records::link(target), rng));
            target.address = via.address;
            target.read = via.read;
        }
        client_.write_record(root.address, root.write, records::sealed(new_id, key, records::link(target), rng));
    }

    std::vector<std::string> grantees;
    for (const auto& g : remaining)
        grantees.push_back(g.get<std::string>());
    for (const auto& g : grantees)
        grant_profile_access(g, {new_id});
    return new_id;
}

void Osn::set_field(const std::string& label, const std::string& value) {
    auto& kr = client_.keyring();
    for (auto& entry : state("profile")["entries"]) {
        if (entry["label"] != label)
            continue;
        if (entry["kind"] != "field")
            throw std::invalid_argument{label + " is not a field"};
        auto target = profile_link(entry, label);
        const auto& held = kr.address(entry["address"].get<std::string>()).secrets;
        client_.write_record(held.address, held.write,
                             records::sealed(target.key_id, target.key, {{"t", "value"}, {"value", value}}, client_.rng()));
        entry["value"] = value;
        return;
    }
    throw std::invalid_argument{"no profile entry " + label};
}

void Osn::post_to_feed(const std::string& label, const std::string& content) {
    auto& kr = client_.keyring();
    for (const auto& entry : state("profile")["entries"]) {
        if (entry["label"] != label)
            continue;
        if (entry["kind"] != "feed" && entry["kind"] != "pinboard")
            throw std::invalid_argument{label + " is not a feed"};
        auto target = profile_link(entry, label);
        target.write = kr.address(entry["address"].get<std::string>()).secrets.write;
        target.open_write = false;
        post(target, content);
        return;
    }
    throw std::invalid_argument{"no profile entry " + label};
}

void Osn::post(const LinkTarget& target, const std::string& content) {
    auto record = records::sealed(target.key_id, target.key, {{"t", "value"}, {"value", content}}, client_.rng());
    if (target.open_write && !mixes_.empty()) {
        client_.send(client_.build_onion(record, target.address, client_.choose_path(mixes_, std::nullopt)));
        return;
    }
    client_.write_record(target.address, target.write, record);
}

ResolvedProfile Osn::resolve_profile(const AddressId& root, ProfileAccess access) {
    ResolvedProfile out;
    out.keys = access.keys;
    for (;;) {
        bool learned = false;
        out.fields.clear();
        out.links.clear();
        out.visited.clear();
        out.opaque = 0;
        std::set<std::pair<AddressId, std::string>> seen;
        std::deque<LinkTarget> queue;
        LinkTarget start;
        start.address = root;
        queue.push_back(start);
        while (!queue.empty()) {
            auto at = queue.front();
            queue.pop_front();
            // A rekeyed address is reachable through an old and a new link; try both secrets.
            if (!seen.insert({at.address, at.read.to_hex()}).second || out.visited.contains(at.address))
                continue;
            std::vector<Bytes> stored;
            try {
                stored = client_.read_records(at.address, at.read);
            } catch (const ProtocolError&) {
                ++out.opaque;
                continue;
            }
            out.visited.insert(at.address);
            for (const auto& raw : stored) {
                auto record = records::parse(raw);
                if (!record) {
                    ++out.opaque;
                    continue;
                }
                auto t = (*record)["t"].get<std::string>();
                if (t == "plain") {
                    out.fields[record->value("label", at.label)].push_back(record->value("value", ""));
                } else if (t == "keys") {
                    std::optional<Json> locator;
                    if (access.directory_key)
                        locator = open_json(*access.directory_key, record->value("box", ""));
                    if (!locator) {
                        ++out.opaque;
                        continue;
                    }
                    LinkTarget dir;
                    dir.label = at.label;
                    dir.address = AddressId::parse(locator->at("address").get<std::string>());
                    dir.read = SecretExponent::from_hex(locator->at("read").get<std::string>());
                    queue.push_back(dir);
                } else if (t == "wrap") {
                    std::optional<Json> wrapped;
                    if (access.identity) {
                        try {
                            wrapped = Json::parse(
                                    to_string(hybrid_open(*access.identity, from_hex(record->value("box", "")))));
                        } catch (const std::exception&) {
                        }
                    }
                    if (!wrapped) {
                        ++out.opaque;
                        continue;
                    }
                    auto id = wrapped->at("key_id").get<KeyId>();
                    auto key = ContentKey::from_hex(wrapped->at("key").get<std::string>());
                    if (!out.keys.contains(id)) {
                        out.keys[id] = key;
                        learned = true;
                    }
                } else if (t == "sealed") {
                    auto inner = open_sealed(*record, out.keys);
                    if (!inner) {
                        ++out.opaque;
                        continue;
                    }
                    if (inner->value("t", "") == "link") {
                        auto target = records::parse_link(*inner);
                        out.links[target.label] = target;
                        if (!out.keys.contains(target.key_id)) {
                            out.keys[target.key_id] = target.key;
                            learned = true;
                        }
                        queue.push_back(target);
                    } else if (inner->value("t", "") == "value") {
                        out.fields[at.label].push_back(inner->value("value", ""));
                    } else {
                        ++out.opaque;
                    }
                } else {
                    ++out.opaque;
                }
            }
        }
        if (!learned)
            return out;
    }
}

// ---- chats ----

void Osn::put_chat(const ChatChannel& chat) {
    state("chats")[chat.title] = chat_to_json(chat);
}

ChatChannel Osn::chat(const std::string& title) const {
    const auto* j = find_state("chats", title);
    if (!j)
        throw std::invalid_argument{"unknown chat " + title};
    return chat_from_json(*j);
}

std::vector<std::string> Osn::chats() const {
    std::vector<std::string> out;
    const auto& s = client_.keyring().osn_state;
    if (s.contains("chats"))
        for (const auto& [title, _] : s["chats"].items())
            out.push_back(title);
    return out;
}

void Osn::mail_chat(const ChatChannel& chat, const std::string& member) {
    const auto& [id, key] = chat.keys.at(chat.generation);
    Json mail{{"address", chat.secrets.address.to_string()},
              {"generation", chat.generation},
              {"key", key.to_hex()},
              {"key_id", id},
              {"read", chat.secrets.read.to_hex()},
              {"t", "chat"},
              {"title", chat.title},
              {"write", chat.secrets.write.to_hex()}};
    client_.send_mail(member, mail, mixes_);
}

ChatChannel Osn::create_chat(const std::string& title, const std::vector<std::string>& members) {
    if (find_state("chats", title))
        throw std::invalid_argument{"chat " + title + " exists"};
    for (const auto& m : members)
        require_verified(m);
    ChatChannel chat;
    chat.title = title;
    chat.secrets = client_.create_address("chat/" + title).secrets;
    chat.generation = 1;
    chat.keys[1] = {client_.keyring().new_key_id(client_.rng()), ContentKey::generate(client_.rng())};
    for (const auto& m : members)
        if (std::find(chat.members.begin(), chat.members.end(), m) == chat.members.end())
            chat.members.push_back(m);
    put_chat(chat);
    for (const auto& m : chat.members)
        mail_chat(chat, m);
    return chat;
}

void Osn::add_member(const std::string& title, const std::string& member) {
    auto c = chat(title);
    if (std::find(c.members.begin(), c.members.end(), member) != c.members.end())
        return;
    require_verified(member);
    c.members.push_back(member);
    put_chat(c);
    mail_chat(c, member);
}

void Osn::remove_member(const std::string& title, const std::string& member) {
    auto c = chat(title);
    if (c.secrets.owner.is_wildcard())
        throw std::invalid_argument{"only the chat owner can remove members"};
    auto it = std::find(c.members.begin(), c.members.end(), member);
    if (it == c.members.end())
        throw std::invalid_argument{member + " is not in chat " + title};
    c.members.erase(it);
    auto& engine = client_.engine();
    c.secrets.read = engine.fresh_secret();
    c.secrets.write = engine.fresh_secret();
    engine.rekey(c.secrets.address, c.secrets.owner, c.secrets.read, c.secrets.write, c.secrets.owner);
    client_.keyring().address("chat/" + title).secrets = c.secrets;
    ++c.generation;
    c.keys[c.generation] = {client_.keyring().new_key_id(client_.rng()), ContentKey::generate(client_.rng())};
    put_chat(c);
    for (const auto& m : c.members)
        mail_chat(c, m);
}

void Osn::send_chat(const std::string& title, const std::string& text) {
    auto c = chat(title);
    const auto& [id, key] = c.keys.at(c.generation);
    Json inner{{"from", client_.keyring().name}, {"t", "msg"}, {"text", text}};
    client_.write_record(c.secrets.address, c.secrets.write, records::sealed(id, key, inner, client_.rng()));
}

ChatRead Osn::read_chat(const std::string& title) {
    auto c = chat(title);
    std::uint64_t next = c.cursor;
    auto stored = client_.read_records(c.secrets.address, c.secrets.read, c.cursor, &next);
    std::map<KeyId, std::pair<std::uint64_t, ContentKey>> by_id;
    for (const auto& [gen, k] : c.keys)
        by_id[k.first] = {gen, k.second};
    ChatRead out;
    for (const auto& raw : stored) {
        auto record = records::parse(raw);
        std::optional<Json> inner;
        std::uint64_t gen = 0;
        if (record && (*record)["t"] == "sealed") {
            auto it = by_id.find(record->value("key_id", KeyId{0}));
            if (it != by_id.end()) {
                gen = it->second.first;
                inner = open_json(it->second.second, record->value("box", ""));
            }
        }
        if (!inner || inner->value("t", "") != "msg") {
            ++out.undecryptable;
            continue;
        }
        out.messages.push_back({inner->value("from", ""), inner->value("text", ""), gen});
    }
    c.cursor = next;
    put_chat(c);
    return out;
}

void Osn::accept_chat(const Json& mail) {
    auto address = AddressId::parse(mail.at("address").get<std::string>());
    auto generation = mail.at("generation").get<std::uint64_t>();
    std::optional<ChatChannel> existing;
    for (const auto& title : chats()) {
        auto c = chat(title);
        if (c.secrets.address == address)
            existing = c;
    }
    ChatChannel c;
    if (existing) {
        c = *existing;
    } else {
        c.title = mail.at("title").get<std::string>();
        while (find_state("chats", c.title))
            c.title += "'";
        c.secrets.address = address;
    }
    if (generation < c.generation)
        return;
    c.secrets.read = SecretExponent::from_hex(mail.at("read").get<std::string>());
    c.secrets.write = SecretExponent::from_hex(mail.at("write").get<std::string>());
    c.generation = generation;
    c.keys[generation] = {mail.at("key_id").get<KeyId>(), ContentKey::from_hex(mail.at("key").get<std::string>())};
    put_chat(c);
}

// ---- groups ----

std::vector<std::string> Osn::groups() const {
    std::vector<std::string> out;
    const auto& s = client_.keyring().osn_state;
    if (s.contains("groups"))
        for (const auto& [title, _] : s["groups"].items())
            out.push_back(title);
    return out;
}

void Osn::mail_group(const std::string& title, const std::string& member, bool admin) {
    auto mail = *find_state("groups", title);
    mail["t"] = "group";
    mail["title"] = title;
    if (!admin)
        mail["admin"] = Json::object();
    client_.send_mail(member, mail, mixes_);
}

AddressId Osn::create_group(const std::string& title, const std::vector<std::string>& admins,
                            const std::vector<std::string>& members, const std::vector<GroupSection>& sections) {
    if (find_state("groups", title))
        throw std::invalid_argument{"group " + title + " exists"};
    for (const auto& m : admins)
        require_verified(m);
    for (const auto& m : members)
        require_verified(m);
    auto& kr = client_.keyring();
    auto& rng = client_.rng();
    auto root = client_.create_address("group/" + title).secrets;
    auto group_id = kr.new_key_id(rng);
    auto group_key = ContentKey::generate(rng);

    auto all = sections;
    if (std::none_of(all.begin(), all.end(), [](const auto& s) { return s.name == "roster"; }))
        all.push_back({"roster", false});
    Json admin_writes = Json::object();
    for (const auto& s : all) {
        auto section = client_.create_address("group/" + title + "/" + s.name).secrets;
        LinkTarget target;
        target.label = s.name;
        target.address = section.address;
        target.read = section.read;
        if (s.admin_only)
            admin_writes[s.name] = section.write.to_hex();
        else
            target.write = section.write;
        target.key_id = kr.new_key_id(rng);
        target.key = ContentKey::generate(rng);
        auto link = records::link(target);
        link["admin_only"] = s.admin_only;
        client_.write_record(root.address, root.write, records::sealed(group_id, group_key, link, rng));
    }
    state("groups")[title] = {{"admin", admin_writes},
                              {"key", group_key.to_hex()},
                              {"key_id", group_id},
                              {"read", root.read.to_hex()},
                              {"root", root.address.to_string()}};
    std::set<std::string> invited;
    for (const auto& a : admins)
        if (invited.insert(a).second)
            mail_group(title, a, true);
    for (const auto& m : members)
        if (invited.insert(m).second)
            mail_group(title, m, false);
    return root.address;
}

void Osn::accept_group(const Json& mail) {
    auto title = mail.at("title").get<std::string>();
    Json entry{{"admin", mail.at("admin")},
               {"key", mail.at("key")},
               {"key_id", mail.at("key_id")},
               {"read", mail.at("read")},
               {"root", mail.at("root")}};
    if (const auto* existing = find_state("groups", title); existing && (*existing)["root"] != entry["root"])
        title += "'";
    state("groups")[title] = entry;
}

GroupView Osn::group(const std::string& title) {
    const auto* g = find_state("groups", title);
    if (!g)
        throw std::invalid_argument{"unknown group " + title};
    std::map<KeyId, ContentKey> keys{
            {(*g)["key_id"].get<KeyId>(), ContentKey::from_hex((*g)["key"].get<std::string>())}};
    GroupView view;
    auto stored = client_.read_records(AddressId::parse((*g)["root"].get<std::string>()),
                                       SecretExponent::from_hex((*g)["read"].get<std::string>()));
    for (const auto& raw : stored) {
        auto record = records::parse(raw);
        if (!record || (*record)["t"] != "sealed")
            continue;
        auto inner = open_sealed(*record, keys);
        if (!inner || inner->value("t", "") != "link")
            continue;
        auto target = records::parse_link(*inner);
        if (inner->value("admin_only", false))
            view.admin_only.insert(target.label);
        view.sections[target.label] = target;
    }
    return view;
}

void Osn::post_to_group(const std::string& title, const std::string& section, const std::string& text) {
    auto view = group(title);
    auto it = view.sections.find(section);
    if (it == view.sections.end())
        throw std::invalid_argument{"no section " + section + " in group " + title};
    auto target = it->second;
    const auto& admin = (*find_state("groups", title))["admin"];
    if (admin.contains(section))
        target.write = SecretExponent::from_hex(admin[section].get<std::string>());
    post(target, text);
}

std::vector<std::string> Osn::read_group(const std::string& title, const std::string& section) {
    auto view = group(title);
    auto it = view.sections.find(section);
    if (it == view.sections.end())
        throw std::invalid_argument{"no section " + section + " in group " + title};
    const auto& target = it->second;
    std::vector<std::string> out;
    for (const auto& raw : client_.read_records(target.address, target.read)) {
        auto record = records::parse(raw);
        if (!record || (*record)["t"] != "sealed")
            continue;
        if (auto inner = open_sealed(*record, {{target.key_id, target.key}}); inner && inner->value("t", "") == "value")
            out.push_back(inner->value("value", ""));
    }
    return out;
}

void Osn::publish_roster_entry(const std::string& title, const std::optional<AddressId>& profile) {
    const auto& kr = client_.keyring();
    Json body{{"group", (*find_state("groups", title))["root"]},
              {"name", kr.name},
              {"signing_key", to_hex(kr.identity.signing.public_key())}};
    if (profile)
        body["profile"] = profile->to_string();
    auto sig = kr.identity.signing.sign(to_bytes(canonical(body)));
    body["sig"] = to_hex(sig);
    post_to_group(title, "roster", canonical(body));
}

std::vector<RosterEntry> Osn::roster(const std::string& title) {
    auto root = (*find_state("groups", title))["root"];
    std::vector<RosterEntry> out;
    for (const auto& text : read_group(title, "roster")) {
        RosterEntry e;
        try {
            auto body = Json::parse(text);
            auto sig_raw = from_hex(body.at("sig").get<std::string>());
            body.erase("sig");
            e.name = body.at("name").get<std::string>();
            e.signing_key = signing_key_from_hex(body.at("signing_key").get<std::string>());
            if (body.contains("profile"))
                e.profile = AddressId::parse(body["profile"].get<std::string>());
            Signature sig{};
            if (sig_raw.size() == sig.size()) {
                std::copy(sig_raw.begin(), sig_raw.end(), sig.begin());
                e.valid = body.at("group") == root && verify_signature(e.signing_key, to_bytes(canonical(body)), sig);
            }
        } catch (const std::exception&) {
            e.valid = false;
        }
        out.push_back(e);
    }
    return out;
}

std::vector<Json> Osn::sync() {
    std::vector<Json> other;
    for (auto& mail : client_.receive_mail()) {
        auto t = mail.value("t", "");
        try {
            if (t == "chat") {
                accept_chat(mail);
                continue;
            }
            if (t == "group") {
                accept_group(mail);
                continue;
            }
        } catch (const std::exception&) {
            continue;  // malformed invitation
        }
        other.push_back(std::move(mail));
    }
    return other;
}

}  // namespace concealed
