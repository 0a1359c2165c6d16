#pragma once

#include <vector>

#include "concealed/wire.hpp"

namespace concealed::testing {

inline Bytes random_payload(Rng& rng, std::size_t max_len = 64) {
    return rng.bytes(rng.uniform(max_len + 1));
}

inline AddressKey random_key(Rng& rng) {
    if (rng.uniform(4) == 0)
        return AddressKey::wildcard();
    const auto& params = rng.uniform(2) ? GroupParams::test_group() : GroupParams::production();
    for (;;) {
        auto e = random_element(params, rng);
        if (e != 1)
            return AddressKey::from_element(e);
    }
}

inline std::uint64_t random_u64(Rng& rng) {
    switch (rng.uniform(3)) {
    case 0: return 0;
    case 1: return rng.uniform(1000);
    default: return rng.next_u64();
    }
}

inline ClientFrame random_client_frame(Rng& rng) {
    switch (rng.uniform(6)) {
    case 0: return CreateAddress{random_payload(rng)};
    case 1: return UpdateAddress{AddressId::random(rng), random_key(rng), random_key(rng), random_key(rng)};
    case 2: return ReadAddress{AddressId::random(rng), random_u64(rng)};
    case 3: return WriteAddress{AddressId::random(rng), random_payload(rng)};
    case 4: return ChallengeAnswer{SessionId::random(rng), random_element(GroupParams::production(), rng)};
    default: return PurgeAddress{AddressId::random(rng), random_u64(rng)};
    }
}

inline std::string random_text(Rng& rng) {
    std::string s;
    auto n = rng.uniform(20);
    for (std::uint64_t i = 0; i < n; ++i)
        s.push_back(static_cast<char>(0x20 + rng.uniform(0x5f)));
    return s;
}

inline ServerFrame random_server_frame(Rng& rng) {
    switch (rng.uniform(6)) {
    case 0: return AddressCreated{AddressId::random(rng)};
    case 1: return CreatedBlob{random_payload(rng)};
    case 2: {
        const auto& params = GroupParams::test_group();
        return ChallengeIssued{SessionId::random(rng), {random_element(params, rng), random_element(params, rng)}};
    }
    case 3: {
        Messages m;
        auto n = rng.uniform(4);
        for (std::uint64_t i = 0; i < n; ++i)
            m.payloads.push_back(random_payload(rng, 16));
        m.next_cursor = random_u64(rng);
        return m;
    }
    case 4: return Ack{};
    default: return Error{static_cast<ErrorCode>(rng.uniform(8)), random_text(rng)};
    }
}

inline AddressId fixed_address(std::uint8_t fill) {
    std::array<std::uint8_t, 16> raw;
    for (std::size_t i = 0; i < raw.size(); ++i)
        raw[i] = static_cast<std::uint8_t>(fill + i);
    return AddressId{raw};
}

inline SessionId fixed_session(std::uint8_t fill) {
    std::array<std::uint8_t, 16> raw;
    for (std::size_t i = 0; i < raw.size(); ++i)
        raw[i] = static_cast<std::uint8_t>(fill * 3 + i);
    return SessionId{raw};
}

using AnyFrame = std::variant<ClientFrame, ServerFrame>;

/// The frozen corpus behind testdata/wire/frames.txt, one entry per line in order.
inline std::vector<AnyFrame> golden_frames() {
    auto key = [](const char* hex) { return AddressKey::parse(hex); };
    const auto wc = AddressKey::wildcard();
    return {
            ClientFrame{CreateAddress{Bytes{}}},
            ClientFrame{CreateAddress{Bytes{0x00, 0x01, 0xfe, 0xff}}},
            ClientFrame{UpdateAddress{fixed_address(0x10), key("12"), key("12"), key("12")}},
            ClientFrame{UpdateAddress{fixed_address(0x20), wc, key("12"), key("3")}},
            ClientFrame{UpdateAddress{fixed_address(0x30), wc, wc, key("10")}},
            ClientFrame{ReadAddress{fixed_address(0x40), 0}},
            ClientFrame{ReadAddress{fixed_address(0x41), 18446744073709551615ULL}},
            ClientFrame{WriteAddress{fixed_address(0x50), Bytes{}}},
            ClientFrame{WriteAddress{fixed_address(0x51), to_bytes("opaque ciphertext")}},
            ClientFrame{ChallengeAnswer{fixed_session(0x01), 7}},
            ClientFrame{ChallengeAnswer{fixed_session(0x02), mpz_class{"deadbeefcafebabe0123456789", 16}}},
            ClientFrame{PurgeAddress{fixed_address(0x60), 0}},
            ClientFrame{PurgeAddress{fixed_address(0x61), 42}},
            ServerFrame{AddressCreated{fixed_address(0x70)}},
            ServerFrame{CreatedBlob{Bytes{}}},
            ServerFrame{CreatedBlob{Bytes(24, 0xab)}},
            ServerFrame{ChallengeIssued{fixed_session(0x03), {12, 21}}},
            ServerFrame{Messages{{}, 0}},
            ServerFrame{Messages{{Bytes{0x01}, Bytes{}, to_bytes("xyz")}, 3}},
            ServerFrame{Messages{{Bytes(4, 0x00)}, 9}},
            ServerFrame{Ack{}},
            ServerFrame{Error{ErrorCode::AccessDenied, "access denied"}},
            ServerFrame{Error{ErrorCode::NoSuchAddress, ""}},
            ServerFrame{Error{ErrorCode::ChallengeExpired, "challenge expired"}},
            ServerFrame{Error{ErrorCode::TooLarge, "payload exceeds  maximum: 65536 > 65535 ~!"}},
    };
}

inline std::string encode_any(const AnyFrame& f) {
    return std::visit([](const auto& inner) { return encode(inner); }, f);
}

}  // namespace concealed::testing
