#include "concealed/harness/run.hpp"

#include <deque>
#include <functional>
#include <memory>
#include <set>

#include "concealed/harness/baseline.hpp"
#include "concealed/osn.hpp"

namespace concealed::harness {

namespace {

constexpr Millis start_time{1'000'000};
constexpr Millis action_gap{500};
constexpr Millis mix_offset{40'000};
constexpr Millis sync_offset{50'000};
constexpr std::size_t region_count = 5;

struct Action {
    std::string tag;
    std::function<void()> run;
};

/// Endpoint ids and their synthetic regions; identical for both store kinds.
void assign_endpoints(const ScenarioScript& s, GroundTruth& truth) {
    SeededRng rng = SeededRng{s.seed}.derive("endpoints");
    auto fresh = [&] {
        auto ep = "ep-" + to_hex(rng.bytes(6));
        truth.locations[ep] = "region-" + std::to_string(rng.uniform(region_count));
        return ep;
    };
    for (std::size_t i = 0; i < s.users.size(); ++i)
        truth.endpoints.push_back(fresh());
    for (std::size_t i = 0; i < s.mixes; ++i)
        truth.mix_endpoints.push_back(fresh());
}

/// Runs each round's actions in a seeded random order, then the hook for mixes and the hook for
/// user polling.
void run_rounds(const ScenarioScript& s, const RunOptions& o, ManualClock& clock, Rng& rng,
                const std::function<std::vector<Action>(std::uint32_t)>& actions_for,
                const std::function<void()>& mix_step, const std::function<void(std::uint32_t)>& poll,
                TraceRecorder& rec) {
    auto base = clock.now();
    for (std::uint32_t round = 1; round <= s.rounds + o.drain_rounds; ++round) {
        auto t0 = base + o.round_length * round;
        clock.set(t0);
        std::vector<Action> actions;
        if (round <= s.rounds)
            actions = actions_for(round);
        rng.shuffle(actions.begin(), actions.end());
        for (auto& a : actions) {
            rec.set_tag(a.tag);
            a.run();
            clock.advance(action_gap);
        }
        rec.set_tag("");
        clock.set(t0 + mix_offset);
        mix_step();
        clock.set(t0 + sync_offset);
        poll(round);
        rec.set_tag("");
    }
}

std::string tag(const char* kind, std::uint32_t a) {
    return std::string{kind} + ":" + std::to_string(a);
}

std::string tag(const char* kind, std::uint32_t a, std::uint32_t b) {
    return tag(kind, a) + ":" + std::to_string(b);
}

std::vector<std::uint32_t> chat_members_at(const ScenarioChat& c, std::uint32_t round) {
    std::vector<std::uint32_t> out{c.owner};
    for (auto m : c.members)
        if (m != c.removed || round < c.remove_round)
            out.push_back(m);
    return out;
}

RunOutput run_concealed(const ScenarioScript& s, const RunOptions& o) {
    RunOutput out;
    out.trace.store = StoreKind::Concealed;
    assign_endpoints(s, out.truth);
    if (s.users.empty())
        return out;

    SeededRng root{s.seed};
    SeededRng rng = root.derive("concealed");
    const auto params = GroupParams::production();
    ManualClock clock{start_time};
    TraceRecorder rec{clock};
    AddressStore store{params, HybridKeyPair::generate(rng), clock, std::make_unique<SeededRng>(rng.derive("store"))};
    store.set_observer([&rec](const StoreDelta& d) { rec.on_delta(d); });
    LocalConnection local{store};

    std::deque<RecordingConnection> connections;
    std::vector<std::unique_ptr<MixNode>> mixes;
    for (std::size_t i = 0; i < s.mixes; ++i) {
        auto& conn = connections.emplace_back(local, rec, out.truth.mix_endpoints[i]);
        auto name = "mix" + std::to_string(i);
        mixes.push_back(std::make_unique<MixNode>(name, HybridKeyPair::generate(rng), conn, conn, params,
                                                  store.public_key(), clock,
                                                  std::make_unique<SeededRng>(rng.derive(name)), o.mix));
        clock.advance(action_gap);
        for (const auto& inbox : mixes.back()->register_inboxes(1))
            out.trace.mix_objects.push_back(inbox.to_string());
    }
    std::vector<MixDirectoryEntry> directory;
    for (const auto& m : mixes)
        directory.push_back(m->directory_entry());

    struct User {
        SeededRng rng;
        Keyring keyring;
        std::unique_ptr<Client> client;
        std::unique_ptr<Osn> osn;
        AddressId root;
    };
    std::deque<User> users;
    const auto n = static_cast<std::uint32_t>(s.users.size());
    for (std::uint32_t u = 0; u < n; ++u) {
        auto user_rng = rng.derive("user/" + s.users[u]);
        auto keyring = Keyring::generate(s.users[u], user_rng);
        auto& user = users.emplace_back(User{std::move(user_rng), std::move(keyring), nullptr, nullptr, {}});
        auto& conn = connections.emplace_back(local, rec, out.truth.endpoints[u]);
        user.client = std::make_unique<Client>(user.keyring, conn, params, store.public_key(), user.rng);
        user.osn = std::make_unique<Osn>(*user.client, directory);
    }

    auto step_mixes = [&] {
        for (auto& m : mixes)
            m->collect();
        for (auto& m : mixes)
            if (m->flush_due())
                m->forward(m->process_batch());
    };

    rec.set_tag("setup");
    for (std::uint32_t u = 0; u < n; ++u) {
        users[u].client->ensure_inbox();
        std::vector<ProfileEntry> entries;
        if (s.public_name[u])
            entries.push_back({"Name", ProfileEntry::Kind::Public, s.users[u], ""});
        entries.push_back({"Hometown", ProfileEntry::Kind::Field, "region " + std::to_string(u % region_count), "friends"});
        entries.push_back({"Postings", ProfileEntry::Kind::Feed, "", "friends"});
        users[u].root = users[u].osn->publish_profile(entries).root;
        clock.advance(action_gap);
    }
    for (auto [a, b] : s.edges) {
        auto& ca = *users[a].client;
        auto& cb = *users[b].client;
        ca.add_contact(users[b].osn->profile_card());
        cb.add_contact(users[a].osn->profile_card());
        ca.verify_contact(s.users[b], cb.fingerprint_key_ids(s.users[a]), cb.fingerprint_with(s.users[a]));
        cb.verify_contact(s.users[a], ca.fingerprint_key_ids(s.users[b]), ca.fingerprint_with(s.users[b]));
    }
    for (auto [a, b] : s.edges) {
        for (auto [owner, reader] : {std::pair{a, b}, std::pair{b, a}}) {
            rec.set_tag(tag("grant", owner, reader));
            auto& osn = *users[owner].osn;
            osn.grant_profile_access(s.users[reader], {osn.profile_key_ids().at("friends")});
            clock.advance(action_gap);
        }
    }
    if (s.chat) {
        rec.set_tag("chat-create");
        std::vector<std::string> members;
        for (auto m : s.chat->members)
            members.push_back(s.users[m]);
        users[s.chat->owner].osn->create_chat(s.chat->title, members);
    }
    rec.set_tag("setup");
    for (int i = 0; i < 4; ++i) {
        clock.advance(o.mix.flush_timeout);
        step_mixes();
    }
    clock.advance(action_gap);
    for (auto& user : users)
        user.osn->sync();

    std::set<std::uint32_t> delivered;
    auto poll = [&](std::uint32_t) {
        for (std::uint32_t u = 0; u < n; ++u) {
            rec.set_tag("sync");
            for (const auto& mail : users[u].osn->sync())
                if (mail.value("t", "") == "msg")
                    delivered.insert(mail.value("id", std::uint32_t{0}));
            clock.advance(action_gap);
        }
        if (!s.chat)
            return;
        for (auto u : chat_members_at(*s.chat, 1)) {
            rec.set_tag("chat-read");
            try {
                users[u].osn->read_chat(s.chat->title);
            } catch (const ProtocolError&) {
            }
            clock.advance(action_gap);
        }
    };

    auto actions_for = [&](std::uint32_t round) {
        std::vector<Action> actions;
        for (const auto& m : s.messages) {
            if (m.round != round)
                continue;
            actions.push_back({tag("msg", m.id), [&, &m = m] {
                                   Json mail{{"t", "msg"}, {"id", m.id}, {"text", m.body}};
                                   users[m.sender].client->send_mail(s.users[m.receiver], mail, directory,
                                                                     o.path_length);
                               }});
        }
        for (const auto& p : s.posts)
            if (p.round == round)
                actions.push_back({tag("post", p.id), [&, &p = p] { users[p.owner].osn->post_to_feed("Postings", p.body); }});
        for (const auto& l : s.lookups)
            if (l.round == round)
                actions.push_back({tag("lookup", l.id), [&, &l = l] {
                                       users[l.viewer].osn->resolve_profile(users[l.target].root, {});
                                   }});
        if (s.chat) {
            for (std::size_t i = 0; i < s.chat->lines.size(); ++i) {
                const auto& line = s.chat->lines[i];
                if (line.round != round)
                    continue;
                actions.push_back({tag("chat", static_cast<std::uint32_t>(i)), [&, &line = line] {
                                       try {
                                           users[line.sender].osn->send_chat(s.chat->title, line.body);
                                       } catch (const ProtocolError&) {
                                           // written under secrets the owner has just replaced
                                       }
                                   }});
            }
        }
        if (s.chat && round == s.chat->remove_round) {
            // Removal happens before anything else in its round.
            rec.set_tag("remove");
            users[s.chat->owner].osn->remove_member(s.chat->title, s.users[s.chat->removed]);
            clock.advance(action_gap);
        }
        return actions;
    };

    auto schedule = root.derive("schedule");
    run_rounds(s, o, clock, schedule, actions_for, step_mixes, poll, rec);
    out.truth.delivered = delivered.size();
    out.trace.events = std::move(rec.trace().events);
    out.truth.tags = std::move(rec.tags());
    out.snapshot = store.snapshot();
    return out;
}

RunOutput run_baseline(const ScenarioScript& s, const RunOptions& o) {
    RunOutput out;
    out.trace.store = StoreKind::Baseline;
    assign_endpoints(s, out.truth);
    if (s.users.empty())
        return out;

    SeededRng schedule = SeededRng{s.seed}.derive("schedule");
    ManualClock clock{start_time};
    TraceRecorder rec{clock};
    BaselineStore store;
    const auto n = static_cast<std::uint32_t>(s.users.size());
    std::size_t delivered = 0;
    auto call = [&](std::uint32_t u, const Json& request) {
        auto result = store.handle(request);
        for (const auto& m : result.response.value("messages", Json::array()))
            if (m.value("to", "") == s.users[u])
                ++delivered;
        rec.add_deltas(std::move(result.deltas));
        rec.record(out.truth.endpoints[u], request.dump(), result.response.dump());
    };

    rec.set_tag("setup");
    for (std::uint32_t u = 0; u < n; ++u) {
        call(u, {{"op", "register"}, {"user", s.users[u]}});
        Json profile{{"Hometown", "region " + std::to_string(u % region_count)}};
        if (s.public_name[u])
            profile["Name"] = s.users[u];
        call(u, {{"op", "publish"}, {"user", s.users[u]}, {"profile", profile}});
        clock.advance(action_gap);
    }
    for (auto [a, b] : s.edges) {
        rec.set_tag(tag("contact", a, b));
        call(a, {{"op", "add_contact"}, {"user", s.users[a]}, {"contact", s.users[b]}});
        clock.advance(action_gap);
    }
    for (auto [a, b] : s.edges) {
        for (auto [owner, reader] : {std::pair{a, b}, std::pair{b, a}}) {
            rec.set_tag(tag("grant", owner, reader));
            call(owner, {{"op", "grant"}, {"owner", s.users[owner]}, {"reader", s.users[reader]}, {"key", "friends"}});
            clock.advance(action_gap);
        }
    }
    if (s.chat) {
        rec.set_tag("chat-create");
        std::vector<std::string> members;
        for (auto m : s.chat->members)
            members.push_back(s.users[m]);
        call(s.chat->owner, {{"op", "chat_create"}, {"owner", s.users[s.chat->owner]}, {"chat", s.chat->title},
                             {"members", members}});
    }
    clock.advance(o.mix.flush_timeout * 4);

    auto kind = [](bool media) { return media ? "media" : "text"; };
    auto actions_for = [&](std::uint32_t round) {
        std::vector<Action> actions;
        for (const auto& m : s.messages)
            if (m.round == round)
                actions.push_back({tag("msg", m.id), [&, &m = m] {
                                       call(m.sender, {{"op", "send"}, {"from", s.users[m.sender]},
                                                       {"to", s.users[m.receiver]}, {"kind", kind(m.media)},
                                                       {"size", m.body.size()}, {"body", m.body}});
                                   }});
        for (const auto& p : s.posts)
            if (p.round == round)
                actions.push_back({tag("post", p.id), [&, &p = p] {
                                       call(p.owner, {{"op", "post"}, {"user", s.users[p.owner]}, {"kind", kind(p.media)},
                                                      {"size", p.body.size()}, {"body", p.body}});
                                   }});
        for (const auto& l : s.lookups)
            if (l.round == round)
                actions.push_back({tag("lookup", l.id), [&, &l = l] {
                                       call(l.viewer, {{"op", "lookup"}, {"user", s.users[l.viewer]},
                                                       {"target", s.users[l.target]}});
                                   }});
        if (s.chat) {
            for (std::size_t i = 0; i < s.chat->lines.size(); ++i) {
                const auto& line = s.chat->lines[i];
                if (line.round == round)
                    actions.push_back({tag("chat", static_cast<std::uint32_t>(i)), [&, &line = line] {
                                           call(line.sender, {{"op", "chat_send"}, {"user", s.users[line.sender]},
                                                              {"chat", s.chat->title}, {"body", line.body}});
                                       }});
            }
        }
        if (s.chat && round == s.chat->remove_round) {
            rec.set_tag("remove");
            call(s.chat->owner, {{"op", "chat_remove"}, {"owner", s.users[s.chat->owner]}, {"chat", s.chat->title},
                                 {"member", s.users[s.chat->removed]}});
            clock.advance(action_gap);
        }
        return actions;
    };
    auto poll = [&](std::uint32_t) {
        for (std::uint32_t u = 0; u < n; ++u) {
            rec.set_tag("sync");
            call(u, {{"op", "fetch"}, {"user", s.users[u]}});
            clock.advance(action_gap);
        }
        if (!s.chat)
            return;
        for (auto u : chat_members_at(*s.chat, 1)) {
            rec.set_tag("chat-read");
            call(u, {{"op", "chat_read"}, {"user", s.users[u]}, {"chat", s.chat->title}});
            clock.advance(action_gap);
        }
    };

    run_rounds(s, o, clock, schedule, actions_for, [] {}, poll, rec);
    out.truth.delivered = delivered;
    out.trace.events = std::move(rec.trace().events);
    out.truth.tags = std::move(rec.tags());
    return out;
}

}  // namespace

RunOutput run_scenario(const ScenarioScript& script, StoreKind kind, const RunOptions& options) {
    return kind == StoreKind::Concealed ? run_concealed(script, options) : run_baseline(script, options);
}

}  // namespace concealed::harness
