#pragma once

#include <gmpxx.h>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "concealed/bytes.hpp"
#include "concealed/group.hpp"

namespace concealed {

/// 128-bit identifier rendered as 32 lowercase hex characters.
template <typename Tag>
class Id128 {
  public:
    static constexpr std::size_t size = 16;

    Id128() = default;
    explicit Id128(const std::array<std::uint8_t, size>& raw) : raw_{raw} {}

    static Id128 random(Rng& rng) {
        Id128 id;
        rng.fill(id.raw_);
        return id;
    }
    static Id128 parse(std::string_view text) {
        if (text.size() != 2 * size || !is_lower_hex(text))
            throw std::invalid_argument{"expected 32 lowercase hex characters"};
        auto bytes = from_hex(text);
        Id128 id;
        std::copy(bytes.begin(), bytes.end(), id.raw_.begin());
        return id;
    }
    static Id128 from_bytes(ByteView bytes) {
        if (bytes.size() != size)
            throw std::invalid_argument{"expected 16 id bytes"};
        Id128 id;
        std::copy(bytes.begin(), bytes.end(), id.raw_.begin());
        return id;
    }

    std::string to_string() const { return to_hex(raw_); }
    ByteView bytes() const { return raw_; }

    friend auto operator<=>(const Id128&, const Id128&) = default;

  private:
    std::array<std::uint8_t, size> raw_{};
};

using AddressId = Id128<struct AddressIdTag>;
using SessionId = Id128<struct SessionIdTag>;

struct CreateAddress {
    Bytes hello;
    friend bool operator==(const CreateAddress&, const CreateAddress&) = default;
};
struct UpdateAddress {
    AddressId address;
    AddressKey read_key = AddressKey::wildcard();
    AddressKey write_key = AddressKey::wildcard();
    AddressKey owner_key = AddressKey::wildcard();
    friend bool operator==(const UpdateAddress&, const UpdateAddress&) = default;
};
struct ReadAddress {
    AddressId address;
    std::uint64_t cursor = 0;
    friend bool operator==(const ReadAddress&, const ReadAddress&) = default;
};
struct WriteAddress {
    AddressId address;
    Bytes payload;
    friend bool operator==(const WriteAddress&, const WriteAddress&) = default;
};
struct ChallengeAnswer {
    SessionId session;
    mpz_class value;
    friend bool operator==(const ChallengeAnswer& a, const ChallengeAnswer& b) {
        return a.session == b.session && a.value == b.value;
    }
};
/// Owner-gated removal of messages with index < upto. Used by mixes to drop forwarded input.
struct PurgeAddress {
    AddressId address;
    std::uint64_t upto = 0;
    friend bool operator==(const PurgeAddress&, const PurgeAddress&) = default;
};

using ClientFrame =
        std::variant<CreateAddress, UpdateAddress, ReadAddress, WriteAddress, ChallengeAnswer, PurgeAddress>;

struct AddressCreated {
    AddressId address;
    friend bool operator==(const AddressCreated&, const AddressCreated&) = default;
};
struct CreatedBlob {
    Bytes ciphertext;
    friend bool operator==(const CreatedBlob&, const CreatedBlob&) = default;
};
struct ChallengeIssued {
    SessionId session;
    Challenge challenge;
    friend bool operator==(const ChallengeIssued&, const ChallengeIssued&) = default;
};
struct Messages {
    std::vector<Bytes> payloads;
    std::uint64_t next_cursor = 0;
    friend bool operator==(const Messages&, const Messages&) = default;
};
struct Ack {
    friend bool operator==(const Ack&, const Ack&) = default;
};

enum class ErrorCode {
    BadFrame,
    NoSuchAddress,
    AccessDenied,
    ChallengeExpired,
    UnknownSession,
    TooLarge,
    OwnerlessForbidden,
    InvalidKey,
};

std::string_view to_string(ErrorCode code);
ErrorCode parse_error_code(std::string_view text);

struct Error {
    ErrorCode code;
    /// Printable ASCII only.
    std::string text;
    friend bool operator==(const Error&, const Error&) = default;
};

using ServerFrame = std::variant<AddressCreated, CreatedBlob, ChallengeIssued, Messages, Ack, Error>;

/// Malformed frame line. offset is the byte position in the line where parsing failed.
class ParseError : public std::runtime_error {
  public:
    ParseError(std::size_t offset, const std::string& what);
    std::size_t offset() const { return offset_; }

  private:
    std::size_t offset_;
};

/// Canonical single-line encodings without the trailing newline. Throws std::invalid_argument
/// for frames that violate field invariants (e.g. non-printable error text).
std::string encode(const ClientFrame& frame);
std::string encode(const ServerFrame& frame);

/// Accepts exactly the canonical encoding; a single trailing '\n' is tolerated.
ClientFrame decode_client(std::string_view line);
ServerFrame decode_server(std::string_view line);

std::string_view frame_tag(const ClientFrame& frame);
std::string_view frame_tag(const ServerFrame& frame);

/// Upper bound on a frame line accepted from the network.
inline constexpr std::size_t max_line_bytes = 512 * 1024;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace concealed
