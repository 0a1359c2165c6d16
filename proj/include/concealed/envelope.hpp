#pragma once

#include <optional>
#include <vector>

#include "concealed/sealing.hpp"
#include "concealed/wire.hpp"

namespace concealed {

class EnvelopeError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Sizes of the routing format. Every payload written by a client or mix is one envelope of
/// exactly envelope_size bytes holding items_per_envelope routed items of item_size() bytes.
/// An item is a header of max_hops routing slots followed by a body; mixes strip one slot and
/// re-encrypt the remainder, so items keep their size at every hop.
struct EnvelopeFormat {
    std::size_t envelope_size = 4096;
    std::size_t items_per_envelope = 2;
    std::size_t max_hops = 5;

    static constexpr std::size_t slot_plain = AddressId::size + 32;
    static constexpr std::size_t slot_size = slot_plain + hybrid_overhead;

    std::size_t item_size() const;
    std::size_t header_size() const { return max_hops * slot_size; }
    std::size_t body_size() const { return item_size() - header_size(); }
    /// Largest inner ciphertext an item can carry.
    std::size_t max_inner() const { return body_size() - 4; }

    /// Throws std::invalid_argument if the sizes leave no room for a body.
    void validate() const;
};

/// Length-prefixed concatenation: [u16 count] then (u32 length, bytes) per part, padded with
/// random bytes to envelope_size. Parts that do not fit spill into further envelopes.
std::vector<Bytes> pack(const std::vector<Bytes>& parts, std::size_t envelope_size, Rng& rng);
/// Inverse of pack for one envelope. Throws EnvelopeError on malformed input.
std::vector<Bytes> split(ByteView envelope);

/// Packs fixed-size items, items_per_envelope at a time, topping up the last envelope with
/// random dummy items so every envelope carries the same count.
std::vector<Bytes> pack_items(std::vector<Bytes> items, const EnvelopeFormat& format, Rng& rng);

struct Hop {
    HybridPublicKey mix_key;
    AddressId inbox;
};

/// Builds one routed item. path[0] is the first hop; the last hop forwards to destination. An
/// empty path yields an item for direct delivery. Throws EnvelopeError if the path is longer
/// than max_hops or inner is larger than max_inner().
Bytes build_item(const EnvelopeFormat& format, ByteView inner, const std::vector<Hop>& path,
                 const AddressId& destination, Rng& rng);

struct Peeled {
    AddressId next;
    Bytes item;
};

/// One mix step: opens the front slot and re-encrypts the rest. nullopt if the slot is not
/// addressed to this key (garbage, dummies, or other mixes' traffic).
std::optional<Peeled> peel_item(const EnvelopeFormat& format, const HybridKeyPair& mix_key, ByteView item, Rng& rng);

/// The inner ciphertext at the final destination. Throws EnvelopeError on a malformed body.
Bytes item_inner(const EnvelopeFormat& format, ByteView item);

}  // namespace concealed
