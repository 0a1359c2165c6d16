#include <gtest/gtest.h>

#include <fstream>

#include "support/frames.hpp"

using namespace concealed;
using namespace concealed::testing;

namespace {

std::size_t parse_offset(std::string_view line, bool client = true) {
    try {
        if (client)
            decode_client(line);
        else
            decode_server(line);
    } catch (const ParseError& e) {
        return e.offset();
    }
    ADD_FAILURE() << "expected ParseError for: " << line;
    return std::string::npos;
}

const std::string addr(32, 'a');

}  // namespace

TEST(Wire, ReadFrameLooksRight) {
    auto line = encode(ClientFrame{ReadAddress{AddressId::parse(addr), 0}});
    EXPECT_EQ(line, "READ " + addr + " 0");
    EXPECT_EQ(line.find('\n'), std::string::npos);
    EXPECT_EQ(std::get<ReadAddress>(decode_client(line + "\n")).cursor, 0u);
}

TEST(Wire, RandomClientFramesRoundTrip) {
    SeededRng rng{1000};
    for (int i = 0; i < 1000; ++i) {
        auto frame = random_client_frame(rng);
        auto line = encode(frame);
        auto back = decode_client(line);
        ASSERT_EQ(back, frame) << line;
        ASSERT_EQ(encode(back), line);
    }
}

TEST(Wire, RandomServerFramesRoundTrip) {
    SeededRng rng{1001};
    for (int i = 0; i < 1000; ++i) {
        auto frame = random_server_frame(rng);
        auto line = encode(frame);
        auto back = decode_server(line);
        ASSERT_EQ(back, frame) << line;
        ASSERT_EQ(encode(back), line);
    }
}

TEST(Wire, EmptyLineIsParseError) {
    EXPECT_EQ(parse_offset(""), 0u);
    EXPECT_EQ(parse_offset("\n"), 0u);
    EXPECT_EQ(parse_offset("", false), 0u);
}

TEST(Wire, UnknownTag) {
    EXPECT_EQ(parse_offset("DELETE " + addr), 0u);
    EXPECT_EQ(parse_offset("read " + addr + " 0"), 0u);
    EXPECT_EQ(parse_offset("READ " + addr + " 0", false), 0u);
}

TEST(Wire, OffsetsPointAtBadField) {
    EXPECT_EQ(parse_offset("READ " + addr + " 01"), 38u);
    EXPECT_EQ(parse_offset("READ " + addr + " x"), 38u);
    EXPECT_EQ(parse_offset("READ " + addr), 37u);
    EXPECT_EQ(parse_offset("READ " + addr + " 0 1"), 39u);
    EXPECT_EQ(parse_offset("READ " + std::string(31, 'a') + " 0"), 5u);
    EXPECT_EQ(parse_offset("READ " + std::string(32, 'A') + " 0"), 5u);
    EXPECT_EQ(parse_offset("READ  " + addr + " 0"), 5u);
    EXPECT_EQ(parse_offset("WRITE " + addr + " ABCD"), 39u);
    EXPECT_EQ(parse_offset("WRITE " + addr + " abc"), 39u);
    EXPECT_EQ(parse_offset("UPDATE " + addr + " * * 1"), 44u);
    EXPECT_EQ(parse_offset("UPDATE " + addr + " 012 * 5"), 40u);
    EXPECT_EQ(parse_offset("READ " + addr + " 0\t"), 39u);
    EXPECT_EQ(parse_offset("READ " + addr + " 0\n\n"), 39u);
    EXPECT_EQ(parse_offset("READ " + addr + " 18446744073709551616"), 38u);
}

TEST(Wire, ServerOffsets) {
    EXPECT_EQ(parse_offset("MESSAGES 2 2 aa", false), 15u);
    EXPECT_EQ(parse_offset("CHALLENGE " + addr + " 0 5", false), 43u);
    EXPECT_EQ(parse_offset("ERROR Nope text", false), 6u);
    EXPECT_EQ(parse_offset("ERROR AccessDenied ", false), 18u);
    EXPECT_EQ(parse_offset("ACK x", false), 3u);
}

TEST(Wire, ErrorTextMayContainSpaces) {
    ServerFrame f = Error{ErrorCode::BadFrame, "two  spaces and more"};
    EXPECT_EQ(decode_server(encode(f)), f);
}

TEST(Wire, EncodeRejectsInvalidFields) {
    EXPECT_THROW(encode(ServerFrame{Error{ErrorCode::BadFrame, "new\nline"}}), std::invalid_argument);
    EXPECT_THROW(encode(ClientFrame{ChallengeAnswer{SessionId{}, -1}}), std::invalid_argument);
}

TEST(Wire, GoldenFiles) {
    std::ifstream in{std::string{CONCEALED_SOURCE_DIR} + "/testdata/wire/frames.txt"};
    ASSERT_TRUE(in);
    auto expected = golden_frames();
    std::size_t i = 0;
    for (std::string line; std::getline(in, line); ++i) {
        ASSERT_LT(i, expected.size());
        if (std::holds_alternative<ClientFrame>(expected[i])) {
            auto decoded = decode_client(line);
            EXPECT_EQ(decoded, std::get<ClientFrame>(expected[i])) << line;
            EXPECT_EQ(encode(decoded), line);
        } else {
            auto decoded = decode_server(line);
            EXPECT_EQ(decoded, std::get<ServerFrame>(expected[i])) << line;
            EXPECT_EQ(encode(decoded), line);
        }
    }
    EXPECT_EQ(i, 25u);
}
