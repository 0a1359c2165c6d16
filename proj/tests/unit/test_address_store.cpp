#include <gtest/gtest.h>

#include <atomic>
#include <set>
#include <thread>

#include "support/store_helpers.hpp"

using namespace concealed;
using namespace concealed::testing;

namespace {

class StoreTest : public ::testing::Test {
  protected:
    explicit StoreTest(const GroupParams& params = GroupParams::test_group())
            : rng{7},
              store{params, HybridKeyPair::generate(rng), clock, std::make_unique<SeededRng>(8)},
              driver{store, rng} {}

    ServerFrame read(const AddressId& c, const SecretExponent& r, std::uint64_t cursor = 0) {
        return driver.prove(ReadAddress{c, cursor}, r);
    }

    std::vector<std::string> payloads(const ServerFrame& f) {
        std::vector<std::string> out;
        for (auto& p : std::get<Messages>(f).payloads)
            out.push_back(to_string(p));
        return out;
    }

    SeededRng rng;
    ManualClock clock;
    AddressStore store;
    Driver driver;
};

class ProductionStoreTest : public StoreTest {
  protected:
    ProductionStoreTest() : StoreTest{GroupParams::production()} {}
};

const SecretExponent none{0};

}  // namespace

TEST_F(StoreTest, CreateReturnsSealedSecretsBelowQ) {
    auto k = ContentKey::generate(rng);
    auto blob = std::get<CreatedBlob>(store.handle(CreateAddress{hybrid_seal(store.public_key(), k.bytes(), rng)}));
    auto secrets = CreationSecrets::parse(to_string(open(k, blob.ciphertext)));
    for (auto* s : {&secrets.read, &secrets.write, &secrets.owner}) {
        EXPECT_GT(s->value(), 0);
        EXPECT_LT(s->value(), store.params().order);
    }
    EXPECT_EQ(store.pending_creation_count(), 1u);
    EXPECT_EQ(store.address_count(), 0u);
}

TEST_F(StoreTest, CreateRejectsHelloWithoutSessionKey) {
    EXPECT_TRUE(is_error(store.handle(CreateAddress{to_bytes("hi")}), ErrorCode::BadFrame));
}

TEST_F(ProductionStoreTest, TwoCreationsDistinct) {
    std::set<AddressId> ids;
    for (int i = 0; i < 20; ++i)
        ids.insert(driver.create(driver.random_secrets()));
    EXPECT_EQ(ids.size(), 20u);
    EXPECT_EQ(store.pending_creation_count(), 0u);
}

TEST_F(StoreTest, ExpiredPendingCreationIsGone) {
    auto k = ContentKey::generate(rng);
    auto hello = hybrid_seal(store.public_key(), k.bytes(), rng);
    auto first = CreationSecrets::parse(
            to_string(open(k, std::get<CreatedBlob>(store.handle(CreateAddress{hello})).ciphertext)));
    clock.advance(store.config().creation_ttl + Millis{1});
    auto second = CreationSecrets::parse(
            to_string(open(k, std::get<CreatedBlob>(store.handle(CreateAddress{hello})).ciphertext)));
    EXPECT_NE(first.address, second.address);
    EXPECT_EQ(store.pending_creation_count(), 1u);
    auto reply = store.handle(UpdateAddress{first.address, AddressKey::wildcard(), AddressKey::wildcard(),
                                            public_key_for(store.params(), first.owner)});
    EXPECT_TRUE(is_error(reply, ErrorCode::NoSuchAddress));
}

TEST_F(StoreTest, PendingCreationConsumedByFirstUpdate) {
    auto k = ContentKey::generate(rng);
    auto blob = std::get<CreatedBlob>(store.handle(CreateAddress{hybrid_seal(store.public_key(), k.bytes(), rng)}));
    auto s = CreationSecrets::parse(to_string(open(k, blob.ciphertext)));
    auto owner = public_key_for(store.params(), s.owner);
    UpdateAddress update{s.address, AddressKey::wildcard(), AddressKey::wildcard(), owner};
    EXPECT_TRUE(std::holds_alternative<AddressCreated>(driver.prove(update, s.owner)));
    EXPECT_EQ(store.pending_creation_count(), 0u);
    EXPECT_EQ(store.address_count(), 1u);
}

TEST_F(StoreTest, OwnerRekeysAndReadsNeedNewSecret) {
    auto mine = driver.random_secrets();
    auto c = driver.create(mine);
    SecretExponent new_read{mine.read.value() % 10 + 1};
    UpdateAddress update{c, public_key_for(store.params(), new_read), key_for(store.params(), mine.write),
                         key_for(store.params(), mine.owner)};
    EXPECT_TRUE(std::holds_alternative<AddressCreated>(driver.prove(update, mine.owner)));
    EXPECT_TRUE(std::holds_alternative<Messages>(read(c, new_read)));
    EXPECT_TRUE(is_error(read(c, mine.read), ErrorCode::AccessDenied));
}

TEST_F(StoreTest, WrongOwnerAnswerLeavesKeysUnchanged) {
    auto mine = driver.random_secrets();
    auto c = driver.create(mine);
    SecretExponent wrong{mine.owner.value() % 10 + 1};
    UpdateAddress update{c, AddressKey::wildcard(), AddressKey::wildcard(), key_for(store.params(), wrong)};
    EXPECT_TRUE(is_error(driver.prove(update, wrong), ErrorCode::AccessDenied));
    EXPECT_TRUE(std::holds_alternative<ChallengeIssued>(store.handle(ReadAddress{c, 0})));
    EXPECT_TRUE(std::holds_alternative<Messages>(read(c, mine.read)));
}

TEST_F(StoreTest, WildcardReadServedWithoutChallenge) {
    auto mine = driver.random_secrets();
    auto c = driver.create(mine);
    UpdateAddress update{c, AddressKey::wildcard(), key_for(store.params(), mine.write),
                         key_for(store.params(), mine.owner)};
    driver.prove(update, mine.owner);
    EXPECT_TRUE(std::holds_alternative<Messages>(store.handle(ReadAddress{c, 0})));
}

TEST_F(StoreTest, ReadKeyEighteenSolvedWithThree) {
    auto c = driver.create({SecretExponent{3}, SecretExponent{0}, SecretExponent{4}});
    store.handle(WriteAddress{c, to_bytes("hello")});
    auto challenge = std::get<ChallengeIssued>(store.handle(ReadAddress{c, 0}));
    auto answer = solve_challenge(store.params(), SecretExponent{3}, challenge.challenge);
    auto reply = store.handle(ChallengeAnswer{challenge.session, answer});
    EXPECT_EQ(payloads(reply), std::vector<std::string>{"hello"});
}

TEST_F(StoreTest, WrongReadAnswerDenied) {
    auto c = driver.create({SecretExponent{3}, SecretExponent{0}, SecretExponent{4}});
    auto challenge = std::get<ChallengeIssued>(store.handle(ReadAddress{c, 0}));
    auto right = solve_challenge(store.params(), SecretExponent{3}, challenge.challenge);
    mpz_class wrong = right == 6 ? 2 : 6;
    EXPECT_TRUE(is_error(store.handle(ChallengeAnswer{challenge.session, wrong}), ErrorCode::AccessDenied));
}

TEST_F(StoreTest, UnknownAddress) {
    auto c = AddressId::random(rng);
    EXPECT_TRUE(is_error(store.handle(ReadAddress{c, 0}), ErrorCode::NoSuchAddress));
    EXPECT_TRUE(is_error(store.handle(WriteAddress{c, {}}), ErrorCode::NoSuchAddress));
    EXPECT_TRUE(is_error(store.handle(UpdateAddress{c, AddressKey::wildcard(), AddressKey::wildcard(),
                                                    AddressKey::from_element(18)}),
                         ErrorCode::NoSuchAddress));
    EXPECT_TRUE(is_error(store.handle(PurgeAddress{c, 1}), ErrorCode::NoSuchAddress));
}

TEST_F(StoreTest, WildcardWriteAppendsInOrder) {
    auto c = driver.create({SecretExponent{3}, SecretExponent{0}, SecretExponent{4}});
    for (auto s : {"a", "b", "c"})
        EXPECT_TRUE(std::holds_alternative<Ack>(store.handle(WriteAddress{c, to_bytes(s)})));
    EXPECT_EQ(payloads(read(c, SecretExponent{3})), (std::vector<std::string>{"a", "b", "c"}));
    auto tail = read(c, SecretExponent{3}, 2);
    EXPECT_EQ(payloads(tail), std::vector<std::string>{"c"});
    EXPECT_EQ(std::get<Messages>(tail).next_cursor, 3u);
}

TEST_F(StoreTest, FailedWriteChallengeDiscardsPayload) {
    auto c = driver.create({SecretExponent{3}, SecretExponent{5}, SecretExponent{4}});
    EXPECT_TRUE(is_error(driver.prove(WriteAddress{c, to_bytes("x")}, SecretExponent{6}), ErrorCode::AccessDenied));
    EXPECT_TRUE(std::holds_alternative<Ack>(driver.prove(WriteAddress{c, to_bytes("y")}, SecretExponent{5})));
    EXPECT_EQ(payloads(read(c, SecretExponent{3})), std::vector<std::string>{"y"});
}

TEST_F(StoreTest, OversizePayloadRejected) {
    auto c = driver.create({SecretExponent{3}, SecretExponent{0}, SecretExponent{4}});
    Bytes big(store.config().max_payload + 1, 0);
    EXPECT_TRUE(is_error(store.handle(WriteAddress{c, big}), ErrorCode::TooLarge));
    big.pop_back();
    EXPECT_TRUE(std::holds_alternative<Ack>(store.handle(WriteAddress{c, big})));
}

TEST_F(StoreTest, ConcurrentWildcardWriters) {
    auto c = driver.create({SecretExponent{3}, SecretExponent{0}, SecretExponent{4}});
    std::vector<std::thread> writers;
    std::atomic<int> acks{0};
    for (int i = 0; i < 100; ++i)
        writers.emplace_back([&, i] {
            auto frame = decode_client(encode(ClientFrame{WriteAddress{c, to_bytes(std::to_string(i))}}));
            if (std::holds_alternative<Ack>(store.handle(frame)))
                ++acks;
        });
    for (auto& t : writers)
        t.join();
    EXPECT_EQ(acks.load(), 100);
    auto got = payloads(read(c, SecretExponent{3}));
    EXPECT_EQ(got.size(), 100u);
    EXPECT_EQ(std::set<std::string>(got.begin(), got.end()).size(), 100u);
}

TEST_F(StoreTest, SessionIsSingleUse) {
    auto c = driver.create({SecretExponent{3}, SecretExponent{0}, SecretExponent{4}});
    auto ch = std::get<ChallengeIssued>(store.handle(ReadAddress{c, 0}));
    auto value = solve_challenge(store.params(), SecretExponent{3}, ch.challenge);
    EXPECT_TRUE(std::holds_alternative<Messages>(store.handle(ChallengeAnswer{ch.session, value})));
    EXPECT_TRUE(is_error(store.handle(ChallengeAnswer{ch.session, value}), ErrorCode::UnknownSession));
    EXPECT_EQ(store.session_count(), 0u);
}

TEST_F(StoreTest, FailedAnswerAlsoConsumesSession) {
    auto c = driver.create({SecretExponent{3}, SecretExponent{0}, SecretExponent{4}});
    auto ch = std::get<ChallengeIssued>(store.handle(ReadAddress{c, 0}));
    auto value = solve_challenge(store.params(), SecretExponent{3}, ch.challenge);
    store.handle(ChallengeAnswer{ch.session, value == 2 ? 3 : 2});
    EXPECT_TRUE(is_error(store.handle(ChallengeAnswer{ch.session, value}), ErrorCode::UnknownSession));
}

TEST_F(StoreTest, AnswerAfterExpiry) {
    auto c = driver.create({SecretExponent{3}, SecretExponent{0}, SecretExponent{4}});
    auto ch = std::get<ChallengeIssued>(store.handle(ReadAddress{c, 0}));
    auto value = solve_challenge(store.params(), SecretExponent{3}, ch.challenge);
    clock.advance(Millis{30'000});
    EXPECT_TRUE(is_error(store.handle(ChallengeAnswer{ch.session, value}), ErrorCode::ChallengeExpired));
}

TEST_F(StoreTest, AnswerJustBeforeExpiryAccepted) {
    auto c = driver.create({SecretExponent{3}, SecretExponent{0}, SecretExponent{4}});
    auto ch = std::get<ChallengeIssued>(store.handle(ReadAddress{c, 0}));
    auto value = solve_challenge(store.params(), SecretExponent{3}, ch.challenge);
    clock.advance(Millis{29'999});
    EXPECT_TRUE(std::holds_alternative<Messages>(store.handle(ChallengeAnswer{ch.session, value})));
}

TEST_F(StoreTest, ExpiredSessionsEventuallySwept) {
    auto c = driver.create({SecretExponent{3}, SecretExponent{0}, SecretExponent{4}});
    store.handle(ReadAddress{c, 0});
    EXPECT_EQ(store.session_count(), 1u);
    clock.advance(Millis{60'001});
    store.sweep_expired();
    EXPECT_EQ(store.session_count(), 0u);
}

TEST_F(StoreTest, OwnerlessForbiddenByDefault) {
    auto k = ContentKey::generate(rng);
    auto blob = std::get<CreatedBlob>(store.handle(CreateAddress{hybrid_seal(store.public_key(), k.bytes(), rng)}));
    auto s = CreationSecrets::parse(to_string(open(k, blob.ciphertext)));
    auto reply = store.handle(UpdateAddress{s.address, AddressKey::wildcard(), AddressKey::wildcard(), AddressKey::wildcard()});
    EXPECT_TRUE(is_error(reply, ErrorCode::OwnerlessForbidden));
}

TEST_F(StoreTest, KeysOutsideSubgroupRejected) {
    auto c = driver.create({SecretExponent{3}, SecretExponent{0}, SecretExponent{4}});
    auto reply = store.handle(UpdateAddress{c, AddressKey::from_element(5), AddressKey::wildcard(), AddressKey::from_element(18)});
    EXPECT_TRUE(is_error(reply, ErrorCode::InvalidKey));
}

TEST_F(StoreTest, StaleChallengeDeniedAfterRekey) {
    auto c = driver.create({SecretExponent{3}, SecretExponent{0}, SecretExponent{4}});
    auto ch = std::get<ChallengeIssued>(store.handle(ReadAddress{c, 0}));
    auto stale = solve_challenge(store.params(), SecretExponent{3}, ch.challenge);
    UpdateAddress update{c, public_key_for(store.params(), SecretExponent{6}), AddressKey::wildcard(),
                         public_key_for(store.params(), SecretExponent{4})};
    ASSERT_TRUE(std::holds_alternative<AddressCreated>(driver.prove(update, SecretExponent{4})));
    EXPECT_TRUE(is_error(store.handle(ChallengeAnswer{ch.session, stale}), ErrorCode::AccessDenied));
}

TEST_F(StoreTest, ConcurrentRekeyNeverExposesUnderWrongKey) {
    // Readers hold only the original read secret. Once a rekey lands, every later grant would be
    // a leak; grants issued before the rekey are fine.
    auto c = driver.create({SecretExponent{3}, SecretExponent{0}, SecretExponent{4}});
    store.handle(WriteAddress{c, to_bytes("secret")});
    std::atomic<bool> rekeyed{false};
    std::atomic<int> late_grants{0};
    std::vector<std::thread> readers;
    for (int t = 0; t < 4; ++t)
        readers.emplace_back([&] {
            for (int i = 0; i < 200; ++i) {
                auto ch = store.handle(ReadAddress{c, 0});
                auto* issued = std::get_if<ChallengeIssued>(&ch);
                if (!issued)
                    continue;
                auto value = solve_challenge(store.params(), SecretExponent{3}, issued->challenge);
                bool after = rekeyed.load();
                auto reply = store.handle(ChallengeAnswer{issued->session, value});
                if (after && std::holds_alternative<Messages>(reply))
                    ++late_grants;
            }
        });
    std::this_thread::sleep_for(std::chrono::milliseconds{2});
    UpdateAddress update{c, public_key_for(store.params(), SecretExponent{6}), AddressKey::wildcard(),
                         public_key_for(store.params(), SecretExponent{4})};
    ASSERT_TRUE(std::holds_alternative<AddressCreated>(driver.prove(update, SecretExponent{4})));
    rekeyed = true;
    for (auto& t : readers)
        t.join();
    EXPECT_EQ(late_grants.load(), 0);
}

TEST_F(StoreTest, PurgeIsOwnerGated) {
    auto c = driver.create({SecretExponent{3}, SecretExponent{0}, SecretExponent{4}});
    for (auto s : {"a", "b", "c"})
        store.handle(WriteAddress{c, to_bytes(s)});
    EXPECT_TRUE(is_error(driver.prove(PurgeAddress{c, 2}, SecretExponent{5}), ErrorCode::AccessDenied));
    EXPECT_TRUE(std::holds_alternative<Ack>(driver.prove(PurgeAddress{c, 2}, SecretExponent{4})));
    auto rest = read(c, SecretExponent{3});
    EXPECT_EQ(payloads(rest), std::vector<std::string>{"c"});
    EXPECT_EQ(std::get<Messages>(rest).next_cursor, 3u);
}

TEST_F(StoreTest, SnapshotRoundTrip) {
    std::vector<AddressId> ids;
    for (int i = 0; i < 5; ++i) {
        ids.push_back(driver.create({SecretExponent{3}, SecretExponent{0}, SecretExponent{4}}));
        for (int j = 0; j < i; ++j)
            store.handle(WriteAddress{ids.back(), to_bytes("m" + std::to_string(j))});
    }
    store.handle(WriteAddress{ids[0], {}});
    store.handle(ReadAddress{ids[1], 0});
    auto snap = store.snapshot();

    ManualClock clock2;
    AddressStore restored{GroupParams::test_group(), HybridKeyPair::generate(rng), clock2, std::make_unique<SeededRng>(9)};
    restored.restore(snap);
    EXPECT_EQ(restored.snapshot(), snap);
    EXPECT_EQ(restored.session_count(), 0u);
    Driver d2{restored, rng};
    for (auto& c : ids)
        EXPECT_EQ(d2.prove(ReadAddress{c, 0}, SecretExponent{3}), read(c, SecretExponent{3}));
}

TEST_F(StoreTest, SnapshotContainsOnlyRecords) {
    auto c = driver.create({SecretExponent{3}, SecretExponent{0}, SecretExponent{4}});
    store.handle(WriteAddress{c, to_bytes("x")});
    store.handle(ReadAddress{c, 0});
    auto snap = store.snapshot();
    std::istringstream in{snap};
    std::vector<std::string> kinds;
    for (std::string line; std::getline(in, line);)
        kinds.push_back(line.substr(0, line.find(' ')));
    EXPECT_EQ(kinds, (std::vector<std::string>{"concealed-snapshot", "group", "address", "m", "end"}));
}

TEST_F(StoreTest, EmptySnapshotRestoresEmpty) {
    auto snap = store.snapshot();
    store.restore(snap);
    EXPECT_EQ(store.address_count(), 0u);
}

TEST_F(StoreTest, CorruptSnapshotRejected) {
    driver.create({SecretExponent{3}, SecretExponent{0}, SecretExponent{4}});
    auto snap = store.snapshot();
    auto flipped = snap;
    flipped[snap.find("address") + 9] ^= 1;
    EXPECT_THROW(store.restore(flipped), RestoreError);
    EXPECT_THROW(store.restore(snap.substr(0, snap.size() - 3)), RestoreError);
    EXPECT_THROW(store.restore(""), RestoreError);
    EXPECT_THROW(store.restore("garbage\nend 00\n"), RestoreError);
    EXPECT_EQ(store.address_count(), 1u);
}

TEST_F(StoreTest, SnapshotFromOtherGroupRejected) {
    ManualClock clock2;
    AddressStore other{GroupParams::production(), HybridKeyPair::generate(rng), clock2, std::make_unique<SeededRng>(9)};
    EXPECT_THROW(other.restore(store.snapshot()), RestoreError);
}

TEST_F(StoreTest, ObserverSeesDeltasWithoutRequesterData) {
    std::vector<StoreDelta> deltas;
    store.set_observer([&](const StoreDelta& d) { deltas.push_back(d); });
    auto c = driver.create({SecretExponent{3}, SecretExponent{0}, SecretExponent{4}});
    store.handle(WriteAddress{c, to_bytes("abc")});
    ASSERT_EQ(deltas.size(), 2u);
    EXPECT_EQ(deltas[0].kind, StoreDelta::Kind::Created);
    EXPECT_EQ(deltas[1].kind, StoreDelta::Kind::Appended);
    EXPECT_EQ(deltas[1].size, 3u);
}
