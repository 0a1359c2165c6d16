#include "concealed/wire.hpp"

#include <charconv>
#include <optional>

namespace concealed {

namespace {

constexpr std::pair<ErrorCode, std::string_view> error_names[] = {
        {ErrorCode::BadFrame, "BadFrame"},
        {ErrorCode::NoSuchAddress, "NoSuchAddress"},
        {ErrorCode::AccessDenied, "AccessDenied"},
        {ErrorCode::ChallengeExpired, "ChallengeExpired"},
        {ErrorCode::UnknownSession, "UnknownSession"},
        {ErrorCode::TooLarge, "TooLarge"},
        {ErrorCode::OwnerlessForbidden, "OwnerlessForbidden"},
        {ErrorCode::InvalidKey, "InvalidKey"},
};

std::string bytes_field(ByteView b) {
    return b.empty() ? std::string{"-"} : to_hex(b);
}

bool printable(std::string_view text) {
    for (unsigned char c : text)
        if (c < 0x20 || c > 0x7e)
            return false;
    return true;
}

// Splits a line into single-space separated tokens while remembering offsets.
class Tokens {
  public:
    explicit Tokens(std::string_view line) : line_{line} {
        if (!line_.empty() && line_.back() == '\n')
            line_.remove_suffix(1);
        if (line_.empty())
            throw ParseError{0, "empty frame"};
        for (std::size_t i = 0; i < line_.size(); ++i) {
            unsigned char c = line_[i];
            if (c < 0x20 || c > 0x7e)
                throw ParseError{i, "non-printable byte in frame"};
        }
    }

    std::pair<std::string_view, std::size_t> next(const char* what) {
        if (started_) {
            if (pos_ >= line_.size())
                throw ParseError{pos_, std::string{"missing "} + what};
            if (line_[pos_] != ' ')
                throw ParseError{pos_, "expected single space"};
            ++pos_;
        }
        started_ = true;
        auto end = line_.find(' ', pos_);
        if (end == std::string_view::npos)
            end = line_.size();
        if (end == pos_)
            throw ParseError{pos_, std::string{"empty "} + what};
        auto start = pos_;
        pos_ = end;
        return {line_.substr(start, end - start), start};
    }

    /// Everything after the next space (may contain spaces). Empty if the line has ended.
    std::string_view rest() {
        if (pos_ >= line_.size())
            return {};
        if (line_[pos_] != ' ')
            throw ParseError{pos_, "expected single space"};
        auto out = line_.substr(pos_ + 1);
        if (out.empty())
            throw ParseError{pos_, "trailing space"};
        pos_ = line_.size();
        return out;
    }

    void finish() const {
        if (pos_ != line_.size())
            throw ParseError{pos_, "unexpected trailing data"};
    }

  private:
    std::string_view line_;
    std::size_t pos_ = 0;
    bool started_ = false;
};

template <typename F>
auto field(Tokens& t, const char* what, F&& parse) {
    auto [text, offset] = t.next(what);
    try {
        return parse(text);
    } catch (const ParseError&) {
        throw;
    } catch (const std::exception& e) {
        throw ParseError{offset, std::string{"invalid "} + what + ": " + e.what()};
    }
}

AddressId parse_address(Tokens& t) {
    return field(t, "address id", [](auto s) { return AddressId::parse(s); });
}

SessionId parse_session(Tokens& t) {
    return field(t, "session id", [](auto s) { return SessionId::parse(s); });
}

Bytes parse_bytes(Tokens& t, const char* what) {
    return field(t, what, [](std::string_view s) {
        if (s == "-")
            return Bytes{};
        if (!is_lower_hex(s))
            throw std::invalid_argument{"bytes must be lowercase hex"};
        return from_hex(s);
    });
}

std::uint64_t parse_u64(Tokens& t, const char* what) {
    return field(t, what, [](std::string_view s) {
        if (s.size() > 1 && s[0] == '0')
            throw std::invalid_argument{"leading zero"};
        std::uint64_t v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size())
            throw std::invalid_argument{"not a decimal integer"};
        return v;
    });
}

AddressKey parse_key(Tokens& t, const char* what) {
    return field(t, what, [](auto s) { return AddressKey::parse(s); });
}

mpz_class parse_element(Tokens& t, const char* what) {
    return field(t, what, [](auto s) { return element_from_hex(s); });
}

mpz_class parse_positive(Tokens& t, const char* what) {
    return field(t, what, [](auto s) {
        auto v = element_from_hex(s);
        if (v == 0)
            throw std::invalid_argument{"zero is not a group element"};
        return v;
    });
}

}  // namespace

ParseError::ParseError(std::size_t offset, const std::string& what)
        : std::runtime_error{"parse error at byte " + std::to_string(offset) + ": " + what}, offset_{offset} {}

std::string_view to_string(ErrorCode code) {
    for (auto& [c, name] : error_names)
        if (c == code)
            return name;
    return "BadFrame";
}

ErrorCode parse_error_code(std::string_view text) {
    for (auto& [c, name] : error_names)
        if (name == text)
            return c;
    throw std::invalid_argument{"unknown error code"};
}

std::string_view frame_tag(const ClientFrame& frame) {
    return std::visit(
            overloaded{
                    [](const CreateAddress&) { return std::string_view{"CREATE"}; },
                    [](const UpdateAddress&) { return std::string_view{"UPDATE"}; },
                    [](const ReadAddress&) { return std::string_view{"READ"}; },
                    [](const WriteAddress&) { return std::string_view{"WRITE"}; },
                    [](const ChallengeAnswer&) { return std::string_view{"ANSWER"}; },
                    [](const PurgeAddress&) { return std::string_view{"PURGE"}; },
            },
            frame);
}

std::string_view frame_tag(const ServerFrame& frame) {
    return std::visit(
            overloaded{
                    [](const AddressCreated&) { return std::string_view{"CREATED"}; },
                    [](const CreatedBlob&) { return std::string_view{"BLOB"}; },
                    [](const ChallengeIssued&) { return std::string_view{"CHALLENGE"}; },
                    [](const Messages&) { return std::string_view{"MESSAGES"}; },
                    [](const Ack&) { return std::string_view{"ACK"}; },
                    [](const Error&) { return std::string_view{"ERROR"}; },
            },
            frame);
}

std::string encode(const ClientFrame& frame) {
    std::string out{frame_tag(frame)};
    std::visit(
            overloaded{
                    [&](const CreateAddress& f) { out += " " + bytes_field(f.hello); },
                    [&](const UpdateAddress& f) {
                        out += " " + f.address.to_string() + " " + f.read_key.to_string() + " " +
                               f.write_key.to_string() + " " + f.owner_key.to_string();
                    },
                    [&](const ReadAddress& f) {
                        out += " " + f.address.to_string() + " " + std::to_string(f.cursor);
                    },
                    [&](const WriteAddress& f) {
                        out += " " + f.address.to_string() + " " + bytes_field(f.payload);
                    },
                    [&](const ChallengeAnswer& f) {
                        if (f.value < 0)
                            throw std::invalid_argument{"challenge answer must be non-negative"};
                        out += " " + f.session.to_string() + " " + element_to_hex(f.value);
                    },
                    [&](const PurgeAddress& f) {
                        out += " " + f.address.to_string() + " " + std::to_string(f.upto);
                    },
            },
            frame);
    return out;
}

std::string encode(const ServerFrame& frame) {
    std::string out{frame_tag(frame)};
    std::visit(
            overloaded{
                    [&](const AddressCreated& f) { out += " " + f.address.to_string(); },
                    [&](const CreatedBlob& f) { out += " " + bytes_field(f.ciphertext); },
                    [&](const ChallengeIssued& f) {
                        if (f.challenge.c0 < 1 || f.challenge.c1 < 1)
                            throw std::invalid_argument{"challenge elements must be positive"};
                        out += " " + f.session.to_string() + " " + element_to_hex(f.challenge.c0) + " " +
                               element_to_hex(f.challenge.c1);
                    },
                    [&](const Messages& f) {
                        out += " " + std::to_string(f.next_cursor) + " " + std::to_string(f.payloads.size());
                        for (const auto& p : f.payloads)
                            out += " " + bytes_field(p);
                    },
                    [&](const Ack&) {},
                    [&](const Error& f) {
                        if (!printable(f.text))
                            throw std::invalid_argument{"error text must be printable ASCII"};
                        out += " ";
                        out += to_string(f.code);
                        if (!f.text.empty())
                            out += " " + f.text;
                    },
            },
            frame);
    return out;
}

ClientFrame decode_client(std::string_view line) {
    Tokens t{line};
    auto [tag, tag_offset] = t.next("frame tag");
    ClientFrame out;
    if (tag == "CREATE") {
        out = CreateAddress{parse_bytes(t, "hello")};
    } else if (tag == "UPDATE") {
        UpdateAddress f;
        f.address = parse_address(t);
        f.read_key = parse_key(t, "read key");
        f.write_key = parse_key(t, "write key");
        f.owner_key = parse_key(t, "owner key");
        out = std::move(f);
    } else if (tag == "READ") {
        auto address = parse_address(t);
        out = ReadAddress{address, parse_u64(t, "cursor")};
    } else if (tag == "WRITE") {
        auto address = parse_address(t);
        out = WriteAddress{address, parse_bytes(t, "payload")};
    } else if (tag == "ANSWER") {
        auto session = parse_session(t);
        out = ChallengeAnswer{session, parse_element(t, "answer")};
    } else if (tag == "PURGE") {
        auto address = parse_address(t);
        out = PurgeAddress{address, parse_u64(t, "purge index")};
    } else {
        throw ParseError{tag_offset, "unknown client frame tag"};
    }
    t.finish();
    return out;
}

ServerFrame decode_server(std::string_view line) {
    Tokens t{line};
    auto [tag, tag_offset] = t.next("frame tag");
    ServerFrame out;
    if (tag == "CREATED") {
        out = AddressCreated{parse_address(t)};
    } else if (tag == "BLOB") {
        out = CreatedBlob{parse_bytes(t, "ciphertext")};
    } else if (tag == "CHALLENGE") {
        ChallengeIssued f;
        f.session = parse_session(t);
        f.challenge.c0 = parse_positive(t, "c0");
        f.challenge.c1 = parse_positive(t, "c1");
        out = std::move(f);
    } else if (tag == "MESSAGES") {
        Messages f;
        f.next_cursor = parse_u64(t, "next cursor");
        auto count = parse_u64(t, "message count");
        for (std::uint64_t i = 0; i < count; ++i)
            f.payloads.push_back(parse_bytes(t, "message"));
        out = std::move(f);
    } else if (tag == "ACK") {
        out = Ack{};
    } else if (tag == "ERROR") {
        auto code = field(t, "error code", [](auto s) { return parse_error_code(s); });
        out = Error{code, std::string{t.rest()}};
    } else {
        throw ParseError{tag_offset, "unknown server frame tag"};
    }
    t.finish();
    return out;
}

}  // namespace concealed
