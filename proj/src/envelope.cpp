#include "concealed/envelope.hpp"

namespace concealed {

std::size_t EnvelopeFormat::item_size() const {
    if (items_per_envelope == 0 || envelope_size < 2 + 4 * items_per_envelope)
        return 0;
    return (envelope_size - 2 - 4 * items_per_envelope) / items_per_envelope;
}

void EnvelopeFormat::validate() const {
    if (items_per_envelope == 0 || max_hops == 0)
        throw std::invalid_argument{"envelope format needs at least one item and one hop"};
    if (envelope_size > 0xffffffffu || item_size() <= header_size() + 4)
        throw std::invalid_argument{"envelope too small for the routing header"};
}

std::vector<Bytes> pack(const std::vector<Bytes>& parts, std::size_t envelope_size, Rng& rng) {
    std::vector<Bytes> out;
    Bytes current;
    std::uint16_t count = 0;
    auto finish = [&] {
        current[0] = static_cast<std::uint8_t>(count >> 8);
        current[1] = static_cast<std::uint8_t>(count);
        append(current, rng.bytes(envelope_size - current.size()));
        out.push_back(std::move(current));
        current.clear();
        count = 0;
    };
    for (const auto& part : parts) {
        if (part.size() + 6 > envelope_size)
            throw EnvelopeError{"part does not fit in an envelope"};
        if (!current.empty() && (current.size() + 4 + part.size() > envelope_size || count == 0xffff))
            finish();
        if (current.empty())
            current.assign(2, 0);
        append_u32(current, static_cast<std::uint32_t>(part.size()));
        append(current, part);
        ++count;
    }
    if (!current.empty())
        finish();
    return out;
}

std::vector<Bytes> split(ByteView envelope) {
    if (envelope.size() < 2)
        throw EnvelopeError{"envelope too short"};
    auto count = read_u16(envelope, 0);
    std::vector<Bytes> out;
    std::size_t pos = 2;
    for (std::uint16_t i = 0; i < count; ++i) {
        if (pos + 4 > envelope.size())
            throw EnvelopeError{"truncated part length"};
        auto len = read_u32(envelope, pos);
        pos += 4;
        if (len > envelope.size() - pos)
            throw EnvelopeError{"truncated part"};
        out.emplace_back(envelope.begin() + pos, envelope.begin() + pos + len);
        pos += len;
    }
    return out;
}

std::vector<Bytes> pack_items(std::vector<Bytes> items, const EnvelopeFormat& format, Rng& rng) {
    for (const auto& item : items)
        if (item.size() != format.item_size())
            throw EnvelopeError{"item has the wrong size"};
    while (items.empty() || items.size() % format.items_per_envelope != 0)
        items.push_back(rng.bytes(format.item_size()));
    return pack(items, format.envelope_size, rng);
}

Bytes build_item(const EnvelopeFormat& format, ByteView inner, const std::vector<Hop>& path,
                 const AddressId& destination, Rng& rng) {
    if (path.size() > format.max_hops)
        throw EnvelopeError{"path longer than the routing header"};
    if (inner.size() > format.max_inner())
        throw EnvelopeError{"message too large for one envelope"};

    const auto header = format.header_size();
    const auto slot = EnvelopeFormat::slot_size;

    Bytes item = rng.bytes(header);
    append_u32(item, static_cast<std::uint32_t>(inner.size()));
    append(item, inner);
    append(item, rng.bytes(format.item_size() - item.size()));

    for (std::size_t i = path.size(); i-- > 0;) {
        const auto& next = i + 1 < path.size() ? path[i + 1].inbox : destination;
        auto key = rng.bytes(32);
        Bytes plain{next.bytes().begin(), next.bytes().end()};
        append(plain, key);

        // The last header slot is what this hop's mix will replace with junk.
        Bytes rest(item.begin(), item.begin() + static_cast<std::ptrdiff_t>(header - slot));
        rest.insert(rest.end(), item.begin() + static_cast<std::ptrdiff_t>(header), item.end());
        stream_xor(rest, key);

        item = hybrid_seal(path[i].mix_key, plain, rng);
        append(item, rest);
    }
    return item;
}

std::optional<Peeled> peel_item(const EnvelopeFormat& format, const HybridKeyPair& mix_key, ByteView item, Rng& rng) {
    const auto header = format.header_size();
    const auto slot = EnvelopeFormat::slot_size;
    if (item.size() != format.item_size())
        return std::nullopt;
    Bytes plain;
    try {
        plain = hybrid_open(mix_key, item.first(slot));
    } catch (const DecryptError&) {
        return std::nullopt;
    }
    if (plain.size() != EnvelopeFormat::slot_plain)
        return std::nullopt;

    Peeled out{AddressId::from_bytes(ByteView{plain}.first(AddressId::size)), {}};
    Bytes rest(item.begin() + static_cast<std::ptrdiff_t>(slot), item.end());
    stream_xor(rest, ByteView{plain}.subspan(AddressId::size));
    out.item.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(header - slot));
    append(out.item, rng.bytes(slot));
    out.item.insert(out.item.end(), rest.begin() + static_cast<std::ptrdiff_t>(header - slot), rest.end());
    return out;
}

Bytes item_inner(const EnvelopeFormat& format, ByteView item) {
    if (item.size() != format.item_size())
        throw EnvelopeError{"item has the wrong size"};
    auto body = item.subspan(format.header_size());
    auto len = read_u32(body, 0);
    if (len > body.size() - 4)
        throw EnvelopeError{"inner length exceeds body"};
    return Bytes(body.begin() + 4, body.begin() + 4 + len);
}

}  // namespace concealed
