#pragma once

#include <set>

#include "concealed/client.hpp"

namespace concealed {

/// One line of a profile as its owner describes it.
struct ProfileEntry {
    enum class Kind { Public, Field, Feed, Pinboard };
    std::string label;
    Kind kind = Kind::Field;
    /// Public and Field entries only.
    std::string value;
    /// Entries naming the same key share one content key (and so one audience).
    std::string key_name;
};

struct PublishedProfile {
    AddressId root;
    ContentKey directory_key;
    std::map<std::string, KeyId> key_ids;
};

/// A linked address learned by decrypting a link record.
struct LinkTarget {
    std::string label;
    AddressId address;
    SecretExponent read;
    /// Wildcard unless the link hands out write access.
    SecretExponent write;
    bool open_write = false;
    KeyId key_id = 0;
    ContentKey key;
};

/// What a reader brings to a profile: content keys it already holds, the directory key from
/// the owner's contact card, and its identity key for unwrapping directory entries.
struct ProfileAccess {
    std::map<KeyId, ContentKey> keys;
    std::optional<ContentKey> directory_key;
    const HybridKeyPair* identity = nullptr;
};

struct ResolvedProfile {
    /// Values per label in storage order; the current value of a field is the last one.
    std::map<std::string, std::vector<std::string>> fields;
    std::map<std::string, LinkTarget> links;
    /// Records that could not be opened with the keys at hand, or links that refused access.
    std::size_t opaque = 0;
    std::set<AddressId> visited;
    std::map<KeyId, ContentKey> keys;
};

struct ChatChannel {
    std::string title;
    AddressSecrets secrets;
    std::uint64_t generation = 0;
    std::map<std::uint64_t, std::pair<KeyId, ContentKey>> keys;
    /// Only the creator keeps a member list; it never leaves this keyring.
    std::vector<std::string> members;
    std::uint64_t cursor = 0;
};

struct ChatMessage {
    std::string from;
    std::string text;
    std::uint64_t generation = 0;
};

struct ChatRead {
    std::vector<ChatMessage> messages;
    std::size_t undecryptable = 0;
};

struct GroupSection {
    std::string name;
    bool admin_only = false;
};

struct GroupView {
    std::map<std::string, LinkTarget> sections;
    std::set<std::string> admin_only;
};

struct RosterEntry {
    std::string name;
    std::optional<AddressId> profile;
    SigningPublicKey signing_key{};
    bool valid = false;
};

/// Record codecs shared by profiles, feeds, chats and groups. Plain records are JSON text the
/// server can read on purpose. The others are binary: a type byte, then for sealed records the
/// key id (big endian), then the ciphertext. parse() maps both to JSON with "t" set to plain,
/// sealed, keys or wrap, and the ciphertext as hex under "box".
namespace records {
Bytes plain(const std::string& label, const std::string& value);
Bytes sealed(KeyId key_id, const ContentKey& key, const Json& inner, Rng& rng);
Bytes keys(ByteView box);
Bytes wrap(ByteView box);
std::optional<Json> parse(ByteView raw);
Json link(const LinkTarget& target);
LinkTarget parse_link(const Json& inner);
}  // namespace records

/// Social-network features for one identity, built from concealed addresses. State lives in
/// the keyring's OSN section so it is persisted with everything else.
class Osn {
  public:
    Osn(Client& client, std::vector<MixDirectoryEntry> mixes);

    Client& client() { return client_; }
    void set_mixes(std::vector<MixDirectoryEntry> mixes) { mixes_ = std::move(mixes); }

    PublishedProfile publish_profile(const std::vector<ProfileEntry>& entries);
    /// Contact card carrying the profile root and directory key.
    ContactCard profile_card() const;
    /// Wraps the given field keys for the contact. Returns false (a warning) if the contact
    /// is not verified; the grant is made anyway.
    bool grant_profile_access(const std::string& contact, const std::vector<KeyId>& key_ids);
    /// Moves every entry under key_id to a fresh key and fresh read secrets, and re-wraps the
    /// new key for the remaining grantees. Contacts in revoke lose access to new content.
    KeyId rotate_field_key(KeyId key_id, const std::vector<std::string>& revoke = {});
    void set_field(const std::string& label, const std::string& value);
    void post_to_feed(const std::string& label, const std::string& content);
    std::map<std::string, KeyId> profile_key_ids() const;

    /// Fixpoint traversal from a profile or group root.
    ResolvedProfile resolve_profile(const AddressId& root, ProfileAccess access);
    /// Posts to a resolved feed or pinboard. Pinboards are reached through mixes; other
    /// targets need the write secret and are written directly.
    void post(const LinkTarget& target, const std::string& content);

    ChatChannel create_chat(const std::string& title, const std::vector<std::string>& members);
    void add_member(const std::string& title, const std::string& member);
    void remove_member(const std::string& title, const std::string& member);
    void send_chat(const std::string& title, const std::string& text);
    ChatRead read_chat(const std::string& title);
    ChatChannel chat(const std::string& title) const;
    std::vector<std::string> chats() const;

    AddressId create_group(const std::string& title, const std::vector<std::string>& admins,
                           const std::vector<std::string>& members, const std::vector<GroupSection>& sections);
    GroupView group(const std::string& title);
    void post_to_group(const std::string& title, const std::string& section, const std::string& text);
    std::vector<std::string> read_group(const std::string& title, const std::string& section);
    /// Signed self-introduction in the group's roster section.
    void publish_roster_entry(const std::string& title, const std::optional<AddressId>& profile);
    std::vector<RosterEntry> roster(const std::string& title);
    std::vector<std::string> groups() const;

    /// Processes invitations and key updates from the inbox. Returns the other mails.
    std::vector<Json> sync();

  private:
    Json& state(const char* section);
    const Json* find_state(const char* section, const std::string& key) const;
    void put_chat(const ChatChannel& chat);
    void mail_chat(const ChatChannel& chat, const std::string& member);
    void mail_group(const std::string& title, const std::string& member, bool admin);
    void require_verified(const std::string& contact) const;
    void accept_chat(const Json& mail);
    void accept_group(const Json& mail);
    LinkTarget profile_link(const Json& entry, const std::string& label) const;

    Client& client_;
    std::vector<MixDirectoryEntry> mixes_;
};

}  // namespace concealed
