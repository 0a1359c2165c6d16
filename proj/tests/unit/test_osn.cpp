#include <gtest/gtest.h>

#include "concealed/osn.hpp"
#include "support/audit.hpp"
#include "support/world.hpp"

using namespace concealed;
using namespace concealed::testing;

namespace {

MixConfig quick_mix() {
    MixConfig c;
    c.batch_threshold = 2;
    return c;
}

using Kind = ProfileEntry::Kind;

std::vector<ProfileEntry> sample_profile() {
    return {{"Name", Kind::Public, "Sample User", ""},
            {"Date of Birth", Kind::Field, "1990-01-01", "k1"},
            {"Residence", Kind::Field, "Springfield", "k1"},
            {"School", Kind::Field, "Northside High", "k2"},
            {"Postings", Kind::Feed, "", "k1"},
            {"Pinboard", Kind::Pinboard, "", "k3"},
            {"Notes", Kind::Field, "private note", "k3"}};
}

std::multiset<std::string> all_values(const ResolvedProfile& r) {
    std::multiset<std::string> out;
    for (const auto& [label, values] : r.fields)
        for (const auto& v : values)
            if (label != "Public key")
                out.insert(v);
    return out;
}

class OsnTest : public ::testing::Test {
  protected:
    OsnTest()
            : world{33, 2, quick_mix()},
              alice{world.add_user("alice")},
              bob{world.add_user("bob")},
              carol{world.add_user("carol")},
              dave{world.add_user("dave")},
              a{alice, world.directory()},
              b{bob, world.directory()},
              c{carol, world.directory()},
              d{dave, world.directory()} {
        world.introduce(alice, bob);
        world.introduce(alice, carol);
        world.introduce(bob, carol);
        world.introduce(alice, dave, false);
    }

    ProfileAccess access_for(Client& reader, const PublishedProfile& p) {
        return {{}, p.directory_key, &reader.keyring().identity.encryption};
    }

    World world;
    Client& alice;
    Client& bob;
    Client& carol;
    Client& dave;
    Osn a, b, c, d;
};

}  // namespace

TEST_F(OsnTest, StrangerSeesOnlyPublicEntries) {
    auto p = a.publish_profile(sample_profile());
    auto r = d.resolve_profile(p.root, {});
    EXPECT_EQ(r.fields.size(), 2u);
    EXPECT_EQ(r.fields.at("Name"), std::vector<std::string>{"Sample User"});
    EXPECT_TRUE(r.fields.contains("Public key"));
    EXPECT_TRUE(r.links.empty());
    EXPECT_GE(r.opaque, 6u);
    EXPECT_EQ(r.visited.size(), 1u);
}

TEST_F(OsnTest, GrantedKeyOpensItsFieldsOnly) {
    auto p = a.publish_profile(sample_profile());
    a.post_to_feed("Postings", "holiday pictures");
    EXPECT_TRUE(a.grant_profile_access("bob", {p.key_ids.at("k1")}));
    EXPECT_TRUE(a.grant_profile_access("carol", {p.key_ids.at("k2")}));

    auto rb = b.resolve_profile(p.root, access_for(bob, p));
    EXPECT_EQ(rb.fields.at("Date of Birth").back(), "1990-01-01");
    EXPECT_EQ(rb.fields.at("Residence").back(), "Springfield");
    EXPECT_EQ(rb.fields.at("Postings"), std::vector<std::string>{"holiday pictures"});
    EXPECT_FALSE(rb.fields.contains("School"));
    EXPECT_FALSE(rb.fields.contains("Notes"));

    auto rc = c.resolve_profile(p.root, access_for(carol, p));
    EXPECT_EQ(rc.fields.at("School").back(), "Northside High");
    EXPECT_FALSE(rc.fields.contains("Date of Birth"));
    EXPECT_FALSE(rc.fields.contains("Postings"));
}

TEST_F(OsnTest, PostingsGoThroughAnIndirectionHop) {
    auto p = a.publish_profile(sample_profile());
    a.post_to_feed("Postings", "first");
    a.post_to_feed("Postings", "second");
    auto r = b.resolve_profile(p.root, {{{p.key_ids.at("k1"), alice.keyring().content_keys.at(p.key_ids.at("k1"))}}});
    EXPECT_EQ(r.fields.at("Postings"), (std::vector<std::string>{"first", "second"}));
    // root, three k1 targets plus the hop in front of the postings
    EXPECT_EQ(r.visited.size(), 5u);
    EXPECT_EQ(r.links.at("Postings").address, alice.keyring().address("profile/feed/Postings").secrets.address);
}

TEST_F(OsnTest, AccessMatrixMatchesBruteForce) {
    auto p = a.publish_profile(sample_profile());
    a.post_to_feed("Postings", "post under k1");
    std::vector<std::pair<KeyId, ContentKey>> keys;
    for (const auto& [name, id] : p.key_ids)
        keys.push_back({id, alice.keyring().content_keys.at(id)});
    auto items = stored_items(world.store.snapshot());
    for (unsigned mask = 0; mask < (1u << keys.size()); ++mask) {
        std::map<KeyId, ContentKey> held;
        for (std::size_t i = 0; i < keys.size(); ++i)
            if (mask & (1u << i))
                held.insert(keys[i]);

        std::multiset<std::string> expected;
        for (const auto& raw : items) {
            auto parsed = records::parse(raw);
            if (!parsed)
                continue;
            auto record = *parsed;
            if (record["t"] == "plain" && record["label"] != "Public key")
                expected.insert(record["value"].get<std::string>());
            if (record["t"] != "sealed")
                continue;
            for (const auto& [id, key] : held) {
                try {
                    auto inner = Json::parse(to_string(open(key, from_hex(record["box"].get<std::string>()))));
                    if (inner["t"] == "value")
                        expected.insert(inner["value"].get<std::string>());
                } catch (const DecryptError&) {
                }
            }
        }
        EXPECT_EQ(all_values(d.resolve_profile(p.root, {held})), expected) << "mask " << mask;
    }
}

TEST_F(OsnTest, CyclicLinksTerminate) {
    auto key = ContentKey::generate(world.rng);
    KeyId id = 77;
    auto& x = alice.create_address("x");
    auto& y = alice.create_address("y");
    auto link_to = [&](const HeldAddress& h) {
        LinkTarget t;
        t.label = "loop";
        t.address = h.secrets.address;
        t.read = h.secrets.read;
        t.key_id = id;
        t.key = key;
        return records::link(t);
    };
    alice.write_record(x.secrets.address, x.secrets.write, records::sealed(id, key, link_to(y), world.rng));
    alice.write_record(y.secrets.address, y.secrets.write, records::sealed(id, key, link_to(x), world.rng));
    alice.write_record(y.secrets.address, y.secrets.write,
                       records::sealed(id, key, {{"t", "value"}, {"value", "inside"}}, world.rng));
    auto& entry = alice.create_address("entry", {.open_read = true});
    alice.write_record(entry.secrets.address, entry.secrets.write, records::sealed(id, key, link_to(x), world.rng));
    auto rx = a.resolve_profile(entry.secrets.address, {{{id, key}}});
    EXPECT_EQ(rx.visited.size(), 3u);
    EXPECT_EQ(rx.fields.at("loop"), std::vector<std::string>{"inside"});
}

TEST_F(OsnTest, GrantToUnverifiedContactWarns) {
    auto p = a.publish_profile(sample_profile());
    EXPECT_FALSE(a.grant_profile_access("dave", {p.key_ids.at("k2")}));
    auto r = d.resolve_profile(p.root, access_for(dave, p));
    EXPECT_EQ(r.fields.at("School").back(), "Northside High");
    EXPECT_THROW(a.grant_profile_access("bob", {12345}), std::invalid_argument);
}

TEST_F(OsnTest, RotationRevokesOnlyTheRevokedContact) {
    auto p = a.publish_profile(sample_profile());
    auto k1 = p.key_ids.at("k1");
    a.grant_profile_access("bob", {k1});
    a.grant_profile_access("carol", {k1});
    auto fresh = a.rotate_field_key(k1, {"bob"});
    EXPECT_NE(fresh, k1);
    EXPECT_EQ(a.profile_key_ids().at("k1"), fresh);
    a.set_field("Date of Birth", "1990-02-02");
    a.post_to_feed("Postings", "after rotation");

    auto rb = b.resolve_profile(p.root, access_for(bob, p));
    EXPECT_FALSE(rb.keys.contains(fresh));
    if (rb.fields.contains("Date of Birth"))
        for (const auto& v : rb.fields.at("Date of Birth"))
            EXPECT_NE(v, "1990-02-02");
    EXPECT_FALSE(rb.fields.contains("Postings"));

    auto rc = c.resolve_profile(p.root, access_for(carol, p));
    EXPECT_EQ(rc.fields.at("Date of Birth").back(), "1990-02-02");
    EXPECT_EQ(rc.fields.at("Postings").back(), "after rotation");
    EXPECT_EQ(rc.fields.at("Residence").back(), "Springfield");
}

TEST_F(OsnTest, StrangerPostsToPinboardThroughMixes) {
    auto p = a.publish_profile(sample_profile());
    auto k3 = p.key_ids.at("k3");
    a.grant_profile_access("bob", {k3});
    auto r = d.resolve_profile(p.root, {{{k3, alice.keyring().content_keys.at(k3)}}});
    ASSERT_TRUE(r.links.contains("Pinboard"));
    EXPECT_TRUE(r.links.at("Pinboard").open_write);
    d.post(r.links.at("Pinboard"), "hello from a stranger");
    world.drain();
    auto rb = b.resolve_profile(p.root, access_for(bob, p));
    EXPECT_EQ(rb.fields.at("Pinboard"), std::vector<std::string>{"hello from a stranger"});
}

TEST_F(OsnTest, FeedsWithDifferentKeysHaveDisjointAudiences) {
    auto p = a.publish_profile({{"Friends", Kind::Feed, "", "f"}, {"Work", Kind::Feed, "", "w"}});
    a.post_to_feed("Friends", "party");
    a.post_to_feed("Work", "meeting");
    a.grant_profile_access("bob", {p.key_ids.at("f")});
    a.grant_profile_access("carol", {p.key_ids.at("w")});
    auto rb = b.resolve_profile(p.root, access_for(bob, p));
    auto rc = c.resolve_profile(p.root, access_for(carol, p));
    EXPECT_EQ(rb.fields.at("Friends"), std::vector<std::string>{"party"});
    EXPECT_FALSE(rb.fields.contains("Work"));
    EXPECT_EQ(rc.fields.at("Work"), std::vector<std::string>{"meeting"});
    EXPECT_FALSE(rc.fields.contains("Friends"));
}

TEST_F(OsnTest, ServerSeesOnlyIdsPublicEntriesAndKeyIds) {
    auto p = a.publish_profile(sample_profile());
    a.grant_profile_access("bob", {p.key_ids.at("k1")});
    auto text = audit_text(world.store.snapshot());
    EXPECT_NE(text.find("Sample User"), std::string::npos);
    for (const char* secret : {"1990-01-01", "Springfield", "Northside", "private note", "Date of Birth", "School",
                               "Residence", "bob"})
        EXPECT_EQ(text.find(secret), std::string::npos) << secret;
    EXPECT_EQ(text.find(p.directory_key.to_hex()), std::string::npos);
}

TEST_F(OsnTest, ProfileLabelsMustBeUnique) {
    EXPECT_THROW(a.publish_profile({{"A", Kind::Public, "1", ""}, {"A", Kind::Field, "2", "k"}}),
                 std::invalid_argument);
}

TEST_F(OsnTest, TwoPartyChat) {
    a.create_chat("lunch", {"bob"});
    world.drain();
    b.sync();
    ASSERT_EQ(b.chats(), std::vector<std::string>{"lunch"});
    b.send_chat("lunch", "noon?");
    a.send_chat("lunch", "yes");
    auto at_alice = a.read_chat("lunch");
    ASSERT_EQ(at_alice.messages.size(), 2u);
    EXPECT_EQ(at_alice.messages[0].from, "bob");
    EXPECT_EQ(at_alice.messages[0].text, "noon?");
    EXPECT_EQ(b.read_chat("lunch").messages.size(), 2u);
    EXPECT_TRUE(a.read_chat("lunch").messages.empty());
}

TEST_F(OsnTest, FivePartyChatAllReadAll) {
    auto& e = world.add_user("erin");
    auto& f = world.add_user("frank");
    world.introduce(alice, e);
    world.introduce(alice, f);
    Osn oe{e, world.directory()}, of{f, world.directory()};
    a.create_chat("five", {"bob", "carol", "erin", "frank"});
    world.drain();
    std::vector<Osn*> all{&a, &b, &c, &oe, &of};
    for (auto* o : all) {
        o->sync();
        o->send_chat("five", "hi from " + o->client().keyring().name);
    }
    for (auto* o : all) {
        auto got = o->read_chat("five");
        EXPECT_EQ(got.messages.size(), 5u);
        EXPECT_EQ(got.undecryptable, 0u);
    }
}

TEST_F(OsnTest, NonMemberCannotRead) {
    auto chat = a.create_chat("private", {"bob"});
    try {
        dave.engine().read(chat.secrets.address, dave.engine().fresh_secret());
        FAIL();
    } catch (const ProtocolError& e) {
        EXPECT_EQ(e.code(), ErrorCode::AccessDenied);
    }
}

TEST_F(OsnTest, UnverifiedMemberRejected) {
    EXPECT_THROW(a.create_chat("x", {"dave"}), std::invalid_argument);
}

TEST_F(OsnTest, AddedMemberReadsHistoryAndNewMessages) {
    a.create_chat("team", {"bob"});
    a.send_chat("team", "before carol");
    a.add_member("team", "carol");
    a.add_member("team", "carol");
    EXPECT_EQ(a.chat("team").members.size(), 2u);
    a.send_chat("team", "after carol");
    world.drain();
    c.sync();
    auto got = c.read_chat("team");
    ASSERT_EQ(got.messages.size(), 2u);
    EXPECT_EQ(got.messages[0].text, "before carol");
    EXPECT_EQ(got.messages[1].text, "after carol");
}

TEST_F(OsnTest, RemovedMemberLosesAccess) {
    a.create_chat("team", {"bob", "carol"});
    world.drain();
    b.sync();
    c.sync();
    b.send_chat("team", "gen one");
    auto old = b.chat("team");
    a.remove_member("team", "bob");
    EXPECT_EQ(a.chat("team").generation, 2u);
    world.drain();
    b.sync();
    c.sync();
    c.send_chat("team", "gen two secret");

    try {
        b.read_chat("team");
        FAIL();
    } catch (const ProtocolError& e) {
        EXPECT_EQ(e.code(), ErrorCode::AccessDenied);
    }
    auto stored = alice.read_records(old.secrets.address, a.chat("team").secrets.read);
    ASSERT_EQ(stored.size(), 2u);
    auto record = *records::parse(stored[1]);
    for (const auto& [gen, k] : b.chat("team").keys)
        EXPECT_THROW(open(k.second, from_hex(record["box"].get<std::string>())), DecryptError);

    auto rest = c.read_chat("team");
    ASSERT_EQ(rest.messages.size(), 2u);
    EXPECT_EQ(rest.messages[1].generation, 2u);
    EXPECT_THROW(b.remove_member("team", "carol"), std::invalid_argument);
}

TEST_F(OsnTest, ReplayedAnswerIsUnknownSession) {
    auto chat = a.create_chat("team", {"bob"});
    auto reply = world.store.handle(ReadAddress{chat.secrets.address, 0});
    auto challenge = std::get<ChallengeIssued>(reply);
    ChallengeAnswer answer{challenge.session,
                           solve_challenge(world.store.params(), chat.secrets.read, challenge.challenge)};
    EXPECT_TRUE(std::holds_alternative<Messages>(world.store.handle(answer)));
    auto again = world.store.handle(answer);
    ASSERT_TRUE(std::holds_alternative<Error>(again));
    EXPECT_EQ(std::get<Error>(again).code, ErrorCode::UnknownSession);
}

TEST_F(OsnTest, GroupSectionsAndRoles) {
    a.create_group("club", {"bob"}, {"carol"}, {{"news", true}, {"forum", false}});
    world.drain();
    b.sync();
    c.sync();
    ASSERT_EQ(c.groups(), std::vector<std::string>{"club"});
    a.post_to_group("club", "news", "welcome");
    b.post_to_group("club", "news", "meeting friday");
    c.post_to_group("club", "forum", "hello all");
    try {
        c.post_to_group("club", "news", "spoof");
        FAIL();
    } catch (const ProtocolError& e) {
        EXPECT_EQ(e.code(), ErrorCode::AccessDenied);
    }
    EXPECT_EQ(c.read_group("club", "news"), (std::vector<std::string>{"welcome", "meeting friday"}));
    EXPECT_EQ(b.read_group("club", "forum"), std::vector<std::string>{"hello all"});
    EXPECT_EQ(c.group("club").admin_only, std::set<std::string>{"news"});
}

TEST_F(OsnTest, LurkerExposesNothing) {
    a.create_group("club", {}, {"bob", "carol"}, {{"forum", false}});
    world.drain();
    b.sync();
    c.sync();
    b.post_to_group("club", "forum", "visible post");
    auto before = world.store.snapshot();
    EXPECT_EQ(c.read_group("club", "forum"), std::vector<std::string>{"visible post"});
    auto after = world.store.snapshot();
    EXPECT_EQ(before, after);
    auto text = audit_text(after);
    EXPECT_EQ(text.find("carol"), std::string::npos);
    EXPECT_EQ(text.find(to_hex(carol.keyring().identity.signing.public_key())), std::string::npos);
}

TEST_F(OsnTest, RosterEntriesAreSigned) {
    auto p = c.publish_profile({{"Name", Kind::Public, "Carol C", ""}});
    a.create_group("club", {}, {"bob", "carol"}, {});
    world.drain();
    b.sync();
    c.sync();
    c.publish_roster_entry("club", p.root);
    Json forged{{"group", alice.keyring().osn_state["groups"]["club"]["root"]},
                {"name", "alice"},
                {"signing_key", to_hex(alice.keyring().identity.signing.public_key())}};
    forged["sig"] = to_hex(bob.keyring().identity.signing.sign(to_bytes(canonical(forged))));
    b.post_to_group("club", "roster", canonical(forged));
    auto roster = a.roster("club");
    ASSERT_EQ(roster.size(), 2u);
    EXPECT_EQ(roster[0].name, "carol");
    EXPECT_TRUE(roster[0].valid);
    EXPECT_EQ(roster[0].profile, p.root);
    EXPECT_FALSE(roster[1].valid);
}

TEST_F(OsnTest, StateSurvivesKeyringReload) {
    a.create_chat("team", {"bob"});
    a.send_chat("team", "persisted");
    auto file = alice.keyring().save("pw", world.rng, true);
    auto reloaded = Keyring::load(file, "pw");
    Client again{reloaded, world.connection, world.store.params(), world.store.public_key(), world.rng};
    Osn o{again, world.directory()};
    EXPECT_EQ(o.read_chat("team").messages.at(0).text, "persisted");
}
