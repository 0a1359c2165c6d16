#pragma once

#include <map>
#include <nlohmann/json.hpp>

#include "concealed/engine.hpp"
#include "concealed/envelope.hpp"
#include "concealed/fingerprint.hpp"
#include "concealed/mix_node.hpp"

namespace concealed {

using Json = nlohmann::json;

/// Canonical text form used for every client artifact: compact JSON with sorted keys.
inline std::string canonical(const Json& j) {
    return j.dump();
}

Json secrets_to_json(const AddressSecrets& s);
AddressSecrets secrets_from_json(const Json& j);

struct Identity {
    KeyId encryption_key_id = 0;
    HybridKeyPair encryption;
    KeyId signing_key_id = 0;
    SigningKeyPair signing;
};

/// What two users exchange out of band before talking: names, public keys and the address
/// where the other side can drop messages.
struct ContactCard {
    std::string name;
    KeyId encryption_key_id = 0;
    HybridPublicKey encryption_key{};
    KeyId signing_key_id = 0;
    SigningPublicKey signing_key{};
    AddressId inbox;
    std::optional<AddressId> profile;
    /// Opens the key-directory link of the profile; holding it only reveals which wrappings
    /// exist, not the field keys themselves.
    std::optional<ContentKey> directory_key;

    Json to_json() const;
    static ContactCard from_json(const Json& j);
    std::string to_blob() const { return canonical(to_json()); }
    static ContactCard from_blob(std::string_view blob);
    /// Single-line payload suitable for a QR code.
    std::string to_qr_text() const;
    static ContactCard from_qr_text(std::string_view text);
};

struct Contact {
    ContactCard card;
    bool verified = false;
};

/// An address the user holds secrets for, with the content key used for its payloads and the
/// read cursor already consumed.
struct HeldAddress {
    AddressSecrets secrets;
    std::optional<ContentKey> content_key;
    std::uint64_t cursor = 0;
};

class KeyringError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Everything a user must keep: identity keys, contacts, address secrets, content keys and the
/// OSN layer's own state. Persisted as one file sealed under a passphrase-derived key.
class Keyring {
  public:
    static Keyring generate(std::string name, Rng& rng);

    std::string name;
    Identity identity;
    std::map<std::string, Contact> contacts;
    std::map<std::string, HeldAddress> addresses;
    std::map<KeyId, ContentKey> content_keys;
    Json osn_state = Json::object();

    /// Fresh random key id not used by this keyring yet.
    KeyId new_key_id(Rng& rng) const;

    Json to_json() const;
    static Keyring from_json(const Json& j);

    /// Sealed file contents. fast_kdf is for tests only.
    std::string save(std::string_view passphrase, Rng& rng, bool fast_kdf = false) const;
    static Keyring load(std::string_view file_contents, std::string_view passphrase);

    const Contact& contact(const std::string& name) const;
    Contact& contact(const std::string& name);
    const HeldAddress& address(const std::string& label) const;
    HeldAddress& address(const std::string& label);
};

struct ClientConfig {
    EnvelopeFormat format;
    std::size_t min_path = 2;
    std::size_t max_path = 4;
};

/// An envelope ready to be written to its first hop.
struct Onion {
    AddressId first_hop;
    Bytes envelope;
    std::vector<Hop> path;
};

struct Received {
    std::vector<Bytes> plaintexts;
    /// Real items that did not open with the given key (e.g. written under a rotated key).
    std::size_t undecryptable = 0;
    std::uint64_t next_cursor = 0;
};

/// Client protocol engine for one identity. Callers serialize operations per identity.
class Client {
  public:
    Client(Keyring& keyring, Connection& connection, GroupParams params, HybridPublicKey server_key, Rng& rng,
           ClientConfig config = {});

    Keyring& keyring() { return keyring_; }
    Engine& engine() { return engine_; }
    Rng& rng() { return rng_; }
    const ClientConfig& config() const { return config_; }

    ContactCard card() const;
    ContactCard card_with(const std::optional<AddressId>& profile, const std::optional<ContentKey>& directory_key) const;

    /// Creates an address and stores its secrets under label.
    HeldAddress& create_address(const std::string& label, AddressOptions options = {},
                                std::optional<ContentKey> content_key = std::nullopt);
    /// Creates the personal inbox (wildcard write) if it does not exist yet.
    HeldAddress& ensure_inbox();

    void add_contact(const ContactCard& card);

    /// Random path of length l (or uniform in [min_path, max_path], capped at the number of usable
    /// mixes, if not given), sampled without replacement; mixes whose key is `avoid` are skipped.
    std::vector<Hop> choose_path(const std::vector<MixDirectoryEntry>& mixes, std::optional<std::size_t> length,
                                 const HybridPublicKey* avoid = nullptr);
    Onion build_onion(ByteView inner, const AddressId& destination, const std::vector<Hop>& path);
    void send(const Onion& onion);

    /// Hybrid-seals a JSON mail to the contact and sends it through a fresh path to their inbox.
    Onion send_mail(const std::string& contact, const Json& mail, const std::vector<MixDirectoryEntry>& mixes,
                    std::optional<std::size_t> length = std::nullopt);
    /// Seals plaintext under a content key and sends it through mixes to a wildcard-write address.
    Onion send_sealed(const AddressId& destination, const ContentKey& key, ByteView plaintext,
                      const std::vector<MixDirectoryEntry>& mixes, std::optional<std::size_t> length = std::nullopt);
    /// Writes one direct envelope (no mixes), answering a write challenge if needed.
    void write_sealed(const AddressId& destination, const SecretExponent& write, const ContentKey& key,
                      ByteView plaintext);

    /// Writes one record directly (no mixes) as a padded envelope.
    void write_record(const AddressId& destination, const SecretExponent& write, ByteView inner);
    /// Real items stored at an address, in order, without any decryption.
    std::vector<Bytes> read_records(const AddressId& address, const SecretExponent& read, std::uint64_t cursor = 0,
                                    std::uint64_t* next_cursor = nullptr);

    Received receive(const AddressId& address, const SecretExponent& read, const ContentKey& key,
                     std::uint64_t cursor = 0);
    /// Reads the own inbox from its stored cursor, opening items with the identity key.
    std::vector<Json> receive_mail();

    /// Sends the owner secret of a held address to a contact through mixes.
    void transfer_ownership(const std::string& label, const std::string& contact,
                            const std::vector<MixDirectoryEntry>& mixes, std::optional<std::size_t> length = std::nullopt);
    /// Takes over an address from a received transfer mail: installs fresh secrets, which
    /// revokes the previous owner. Stores the result under label.
    HeldAddress& accept_ownership(const Json& mail, const std::string& label);

    /// Fingerprint over the union of this identity's keys and the contact's keys.
    std::string fingerprint_with(const std::string& contact) const;
    std::vector<KeyId> fingerprint_key_ids(const std::string& contact) const;
    /// Marks the contact verified iff the other side enumerated the same key ids and read out
    /// the same words. Throws std::invalid_argument if no claimed id is known here.
    bool verify_contact(const std::string& contact, const std::vector<KeyId>& their_ids, const std::string& their_words);

  private:
    void open_items(ByteView envelope, const std::function<std::optional<Bytes>(ByteView)>& opener,
                     std::vector<Bytes>& out, std::size_t& undecryptable);

    Keyring& keyring_;
    Rng& rng_;
    Engine engine_;
    ClientConfig config_;
};

}  // namespace concealed
