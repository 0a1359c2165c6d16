#include <gtest/gtest.h>

#include "concealed/stats.hpp"
#include "support/world.hpp"

using namespace concealed;
using namespace concealed::testing;

namespace {

MixConfig fast_config(std::size_t b = 8) {
    MixConfig c;
    c.batch_threshold = b;
    c.flush_timeout = Millis{2'000};
    c.dedup_window = Millis{60'000};
    c.deletion_delay = Millis{60'000};
    c.retire_grace = Millis{30'000};
    return c;
}

// Fails the next `failures` writes, then passes through.
class FlakyConnection final : public Connection {
  public:
    explicit FlakyConnection(Connection& inner) : inner_{inner} {}
    ServerFrame request(const ClientFrame& frame) override {
        if (std::holds_alternative<WriteAddress>(frame) && failures > 0) {
            --failures;
            return Error{ErrorCode::TooLarge, "injected"};
        }
        return inner_.request(frame);
    }
    int failures = 0;

  private:
    Connection& inner_;
};

class MixTest : public ::testing::Test {
  protected:
    MixTest() : world{11, 1, fast_config(), GroupParams::test_group()}, mix{*world.mixes.front()} {}

    Hop hop() const {
        auto e = mix.directory_entry();
        return {e.public_key, e.inboxes.front()};
    }

    Bytes item_for(const AddressId& destination, std::string_view text) {
        return build_item(format, to_bytes(text), {hop()}, destination, world.rng);
    }

    void write_items(std::vector<Bytes> items) {
        for (auto& e : pack_items(std::move(items), format, world.rng))
            ASSERT_TRUE(std::holds_alternative<Ack>(world.store.handle(WriteAddress{hop().inbox, e})));
    }

    AddressSecrets open_address() {
        Engine engine{world.connection, world.store.params(), world.store.public_key(), world.rng};
        return engine.create_address({.open_write = true});
    }

    std::vector<Bytes> read_all(const AddressSecrets& a) {
        Engine engine{world.connection, world.store.params(), world.store.public_key(), world.rng};
        return engine.read(a.address, a.read).payloads;
    }

    World world;
    MixNode& mix;
    EnvelopeFormat format;
};

}  // namespace

TEST_F(MixTest, RegisterCreatesWildcardWriteInboxes) {
    auto ids = mix.register_inboxes(3);
    ASSERT_EQ(ids.size(), 3u);
    EXPECT_EQ(std::set<AddressId>(ids.begin(), ids.end()).size(), 3u);
    for (auto& c : ids)
        EXPECT_TRUE(std::holds_alternative<Ack>(world.store.handle(WriteAddress{c, to_bytes("x")})));
    EXPECT_EQ(mix.directory_entry().inboxes, ids);
    EXPECT_THROW(mix.register_inboxes(0), std::invalid_argument);
}

TEST_F(MixTest, ReRegistrationDrainsThenRetiresOldInboxes) {
    auto old_inbox = hop().inbox;
    auto dest = open_address();
    world.store.handle(WriteAddress{old_inbox, pack_items({item_for(dest.address, "late")}, format, world.rng).front()});
    auto fresh = mix.register_inboxes(1);
    EXPECT_NE(fresh.front(), old_inbox);
    EXPECT_EQ(mix.directory_entry().inboxes, fresh);
    // Still drained after re-registration.
    EXPECT_EQ(mix.collect(), 1u);
    world.clock.advance(Millis{60'000});
    mix.delete_forwarded();
    world.store.handle(WriteAddress{old_inbox, pack_items({item_for(dest.address, "too late")}, format, world.rng).front()});
    EXPECT_EQ(mix.collect(), 0u);
}

TEST_F(MixTest, CollectsDecryptableItems) {
    auto dest = AddressId::random(world.rng);
    write_items({item_for(dest, "a"), item_for(dest, "b"), item_for(dest, "c")});
    EXPECT_EQ(mix.collect(), 3u);
    EXPECT_EQ(mix.pending(), 3u);
    EXPECT_EQ(mix.collect(), 0u);
}

TEST_F(MixTest, DuplicateCiphertextCollectedOnce) {
    auto envelope = pack_items({item_for(AddressId::random(world.rng), "a")}, format, world.rng).front();
    world.store.handle(WriteAddress{hop().inbox, envelope});
    world.store.handle(WriteAddress{hop().inbox, envelope});
    EXPECT_EQ(mix.collect(), 1u);
    world.store.handle(WriteAddress{hop().inbox, envelope});
    EXPECT_EQ(mix.collect(), 0u);
    EXPECT_EQ(mix.pending(), 1u);
    EXPECT_GE(mix.metrics().duplicates, 2u);
}

TEST_F(MixTest, DuplicateForwardedAfterWindowOnlyIfReplayedLate) {
    auto envelope = pack_items({item_for(AddressId::random(world.rng), "a")}, format, world.rng).front();
    world.store.handle(WriteAddress{hop().inbox, envelope});
    mix.collect();
    world.clock.advance(mix.config().dedup_window);
    world.store.handle(WriteAddress{hop().inbox, envelope});
    EXPECT_EQ(mix.collect(), 1u);
}

TEST_F(MixTest, GarbageDropped) {
    world.store.handle(WriteAddress{hop().inbox, to_bytes("not an envelope")});
    world.store.handle(WriteAddress{hop().inbox, world.rng.bytes(format.envelope_size)});
    world.store.handle(WriteAddress{hop().inbox, pack_items({}, format, world.rng).front()});
    EXPECT_EQ(mix.collect(), 0u);
    EXPECT_EQ(mix.pending(), 0u);
    auto m = mix.metrics();
    EXPECT_GE(m.malformed + m.undecryptable, 3u);
}

TEST_F(MixTest, FlushRules) {
    auto dest = AddressId::random(world.rng);
    EXPECT_FALSE(mix.flush_due());
    write_items({item_for(dest, "a"), item_for(dest, "b")});
    mix.collect();
    EXPECT_FALSE(mix.flush_due());
    world.clock.advance(Millis{1'999});
    EXPECT_FALSE(mix.flush_due());
    world.clock.advance(Millis{1});
    EXPECT_TRUE(mix.flush_due());
}

TEST_F(MixTest, ThresholdTriggersFlush) {
    std::vector<Bytes> items;
    for (int i = 0; i < 8; ++i)
        items.push_back(item_for(AddressId::random(world.rng), "x"));
    write_items({items.begin(), items.begin() + 7});
    mix.collect();
    EXPECT_FALSE(mix.flush_due());
    write_items({items.back()});
    mix.collect();
    EXPECT_TRUE(mix.flush_due());
}

TEST_F(MixTest, SameDestinationMergedIntoOneWrite) {
    auto dest = open_address();
    write_items({item_for(dest.address, "first"), item_for(dest.address, "second")});
    mix.collect();
    auto outputs = mix.process_batch();
    ASSERT_EQ(outputs.size(), 1u);
    EXPECT_EQ(mix.forward(outputs), 1u);
    auto stored = read_all(dest);
    ASSERT_EQ(stored.size(), 1u);
    std::set<std::string> texts;
    for (auto& item : split(stored.front()))
        texts.insert(to_string(item_inner(format, item)));
    EXPECT_EQ(texts, (std::set<std::string>{"first", "second"}));
}

TEST_F(MixTest, MergeOverflowUsesSeveralEnvelopes) {
    auto dest = AddressId::random(world.rng);
    write_items({item_for(dest, "1"), item_for(dest, "2"), item_for(dest, "3")});
    mix.collect();
    auto outputs = mix.process_batch();
    ASSERT_EQ(outputs.size(), 2u);
    for (auto& o : outputs) {
        EXPECT_EQ(o.destination, dest);
        EXPECT_EQ(o.envelope.size(), format.envelope_size);
    }
}

TEST_F(MixTest, FailedWriteRetriedNextFlush) {
    FlakyConnection flaky{world.connection};
    MixNode node{"flaky", HybridKeyPair::generate(world.rng), world.connection, flaky, world.store.params(),
                 world.store.public_key(), world.clock, std::make_unique<SeededRng>(5), fast_config()};
    auto inbox = node.register_inboxes(1).front();
    auto dest = open_address();
    auto item = build_item(format, to_bytes("retry me"), {{node.directory_entry().public_key, inbox}}, dest.address,
                           world.rng);
    world.store.handle(WriteAddress{inbox, pack_items({item}, format, world.rng).front()});
    node.collect();
    flaky.failures = 1;
    EXPECT_EQ(node.forward(node.process_batch()), 0u);
    EXPECT_TRUE(read_all(dest).empty());
    EXPECT_EQ(node.forward(node.process_batch()), 1u);
    EXPECT_EQ(read_all(dest).size(), 1u);
}

TEST_F(MixTest, UndeliverableDroppedAfterMaxAttempts) {
    write_items({item_for(AddressId::random(world.rng), "nowhere")});
    mix.collect();
    auto outputs = mix.process_batch();
    for (std::size_t i = 0; i < mix.config().max_attempts; ++i)
        EXPECT_EQ(mix.forward(i == 0 ? outputs : std::vector<MixOutput>{}), 0u);
    EXPECT_EQ(mix.metrics().dropped, 1u);
}

TEST_F(MixTest, InboxPurgedOnlyAfterDeletionDelay) {
    // The inbox is the only address holding messages, so the snapshot shows whether it was purged.
    auto stored = [&] { return world.store.snapshot().find("\nm ") != std::string::npos; };
    write_items({item_for(AddressId::random(world.rng), "x")});
    mix.collect();
    mix.forward(mix.process_batch());
    mix.delete_forwarded();
    EXPECT_TRUE(stored());
    world.clock.advance(mix.config().deletion_delay - Millis{1});
    mix.delete_forwarded();
    EXPECT_EQ(mix.metrics().purges, 0u);
    world.clock.advance(Millis{1});
    mix.delete_forwarded();
    EXPECT_EQ(mix.metrics().purges, 1u);
    EXPECT_GE(mix.config().deletion_delay, mix.config().dedup_window);
    EXPECT_FALSE(stored());
}

TEST_F(MixTest, OutputsAreEnvelopeSized) {
    std::vector<Bytes> items;
    for (int i = 0; i < 5; ++i)
        items.push_back(item_for(AddressId::random(world.rng), std::string(i * 100, 'z')));
    write_items(items);
    mix.collect();
    for (auto& o : mix.process_batch())
        EXPECT_EQ(o.envelope.size(), format.envelope_size);
}

TEST(MixConfig, Validation) {
    MixConfig c;
    EXPECT_NO_THROW(c.validate());
    c.batch_threshold = 1;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.deletion_delay = c.dedup_window - Millis{1};
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(MixDirectory, RoundTrip) {
    SeededRng rng{1};
    std::vector<MixDirectoryEntry> entries{{"a", HybridKeyPair::generate(rng).public_key(), {AddressId::random(rng)}},
                                           {"b", HybridKeyPair::generate(rng).public_key(),
                                            {AddressId::random(rng), AddressId::random(rng)}}};
    auto text = write_directory(entries);
    auto back = read_directory(text);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].inboxes, entries[1].inboxes);
    EXPECT_EQ(back[0].public_key, entries[0].public_key);
    EXPECT_EQ(write_directory(back), text);
    EXPECT_THROW(read_directory("[{\"name\":\"x\"}]"), std::invalid_argument);
}

TEST(MixShuffle, FirstOutputPositionUniform) {
    World world{12, 1, fast_config(8), GroupParams::test_group()};
    auto& mix = *world.mixes.front();
    auto entry = mix.directory_entry();
    EnvelopeFormat format;
    std::vector<std::size_t> first_position(8, 0);
    for (int batch = 0; batch < 5000; ++batch) {
        std::vector<AddressId> destinations;
        std::vector<Bytes> items;
        for (int i = 0; i < 8; ++i) {
            destinations.push_back(AddressId::random(world.rng));
            items.push_back(build_item(format, Bytes{}, {{entry.public_key, entry.inboxes.front()}},
                                       destinations.back(), world.rng));
        }
        // Arrival order is the order written.
        for (int i = 0; i < 8; i += 2)
            world.store.handle(WriteAddress{entry.inboxes.front(), pack(std::vector<Bytes>{items[i], items[i + 1]},
                                                                         format.envelope_size, world.rng)
                                                                            .front()});
        ASSERT_EQ(mix.collect(), 8u);
        ASSERT_TRUE(mix.flush_due());
        auto outputs = mix.process_batch();
        ASSERT_EQ(outputs.size(), 8u);
        auto pos = std::find(destinations.begin(), destinations.end(), outputs.front().destination) - destinations.begin();
        ++first_position[pos];
    }
    EXPECT_GT(stats::chi_square_uniform_p(first_position), 0.01);
}
