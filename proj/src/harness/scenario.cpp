#include "concealed/harness/scenario.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <stdexcept>

#include "concealed/random.hpp"

namespace concealed::harness {

namespace {

std::string random_words(Rng& rng, std::size_t length) {
    static constexpr char letters[] = "abcdefghijklmnopqrstuvwxyz";
    std::string out;
    while (out.size() < length) {
        if (!out.empty())
            out += ' ';
        auto word = 2 + rng.uniform(8);
        for (std::uint64_t i = 0; i < word; ++i)
            out += letters[rng.uniform(26)];
    }
    out.resize(length);
    return out;
}

std::string body(Rng& rng, bool media) {
    return media ? "media " + random_words(rng, 700 + rng.uniform(200)) : random_words(rng, 30 + rng.uniform(90));
}

}  // namespace

ScenarioScript ScenarioScript::generate(std::uint64_t seed, const ScenarioOptions& options) {
    SeededRng rng{seed};
    ScenarioScript s;
    s.seed = seed;
    s.mixes = options.mixes;
    s.rounds = options.rounds;
    auto n = static_cast<std::uint32_t>(options.users);
    for (std::uint32_t i = 0; i < n; ++i) {
        char name[16];
        std::snprintf(name, sizeof name, "user%02u", i);
        s.users.emplace_back(name);
        s.public_name.push_back(rng.unit() < options.public_name_fraction);
    }

    std::set<std::pair<std::uint32_t, std::uint32_t>> edges;
    for (std::uint32_t a = 0; a < n; ++a)
        for (std::uint32_t b = a + 1; b < n; ++b)
            if (rng.unit() < options.edge_probability)
                edges.insert({a, b});
    if (n > 1) {
        for (std::uint32_t a = 0; a < n; ++a) {
            bool isolated = std::none_of(edges.begin(), edges.end(),
                                         [a](const auto& e) { return e.first == a || e.second == a; });
            if (!isolated)
                continue;
            auto b = static_cast<std::uint32_t>(rng.uniform(n - 1));
            if (b >= a)
                ++b;
            edges.insert({std::min(a, b), std::max(a, b)});
        }
    }
    s.edges.assign(edges.begin(), edges.end());
    auto adj = s.adjacency();

    for (std::uint32_t round = 1; round <= options.rounds && n > 1; ++round) {
        for (std::uint32_t u = 0; u < n; ++u) {
            ScenarioMessage m;
            m.id = static_cast<std::uint32_t>(s.messages.size());
            m.round = round;
            m.sender = u;
            m.receiver = adj[u][rng.uniform(adj[u].size())];
            m.media = rng.unit() < options.media_fraction;
            m.body = body(rng, m.media);
            s.messages.push_back(std::move(m));
            if (rng.unit() < options.post_probability) {
                ScenarioPost p;
                p.id = static_cast<std::uint32_t>(s.posts.size());
                p.round = round;
                p.owner = u;
                p.media = rng.unit() < options.media_fraction;
                p.body = body(rng, p.media);
                s.posts.push_back(std::move(p));
            }
        }
        for (std::size_t i = 0; i < options.lookups_per_round; ++i) {
            ScenarioLookup l;
            l.id = static_cast<std::uint32_t>(s.lookups.size());
            l.round = round;
            l.viewer = static_cast<std::uint32_t>(rng.uniform(n));
            l.target = static_cast<std::uint32_t>(rng.uniform(n - 1));
            if (l.target >= l.viewer)
                ++l.target;
            s.lookups.push_back(l);
        }
    }

    if (options.chat && n > 2 && options.rounds >= 2) {
        std::vector<std::uint32_t> owners;
        for (std::uint32_t u = 0; u < n; ++u)
            if (adj[u].size() >= 2)
                owners.push_back(u);
        if (!owners.empty()) {
            ScenarioChat c;
            c.title = "circle";
            c.owner = owners[rng.uniform(owners.size())];
            auto pool = adj[c.owner];
            rng.shuffle(pool.begin(), pool.end());
            pool.resize(std::min<std::size_t>(pool.size(), 3));
            std::sort(pool.begin(), pool.end());
            c.members = pool;
            c.removed = c.members[rng.uniform(c.members.size())];
            c.remove_round = static_cast<std::uint32_t>(options.rounds / 2 + 1);
            for (std::uint32_t round = 1; round <= options.rounds; ++round) {
                std::vector<std::uint32_t> present{c.owner};
                for (auto m : c.members)
                    if (m != c.removed || round < c.remove_round)
                        present.push_back(m);
                for (auto u : present)
                    if (rng.unit() < 0.5)
                        c.lines.push_back({round, u, random_words(rng, 20 + rng.uniform(60))});
            }
            s.chat = std::move(c);
        }
    }
    return s;
}

std::vector<std::vector<std::uint32_t>> ScenarioScript::adjacency() const {
    std::vector<std::vector<std::uint32_t>> adj(users.size());
    for (auto [a, b] : edges) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    for (auto& v : adj)
        std::sort(v.begin(), v.end());
    return adj;
}

std::vector<std::size_t> ScenarioScript::degrees() const {
    std::vector<std::size_t> d(users.size());
    for (auto [a, b] : edges) {
        ++d[a];
        ++d[b];
    }
    return d;
}

bool ScenarioScript::adjacent(std::uint32_t a, std::uint32_t b) const {
    return std::binary_search(edges.begin(), edges.end(), std::pair{std::min(a, b), std::max(a, b)});
}

Json ScenarioScript::to_json() const {
    Json j;
    j["seed"] = seed;
    j["users"] = users;
    j["mixes"] = mixes;
    j["rounds"] = rounds;
    j["public_name"] = public_name;
    j["edges"] = Json::array();
    for (auto [a, b] : edges)
        j["edges"].push_back({a, b});
    j["messages"] = Json::array();
    for (const auto& m : messages)
        j["messages"].push_back({{"id", m.id}, {"round", m.round}, {"sender", m.sender},
                                 {"receiver", m.receiver}, {"media", m.media}, {"body", m.body}});
    j["posts"] = Json::array();
    for (const auto& p : posts)
        j["posts"].push_back(
                {{"id", p.id}, {"round", p.round}, {"owner", p.owner}, {"media", p.media}, {"body", p.body}});
    j["lookups"] = Json::array();
    for (const auto& l : lookups)
        j["lookups"].push_back({{"id", l.id}, {"round", l.round}, {"viewer", l.viewer}, {"target", l.target}});
    if (chat) {
        Json c{{"title", chat->title}, {"owner", chat->owner}, {"members", chat->members},
               {"removed", chat->removed}, {"remove_round", chat->remove_round}};
        c["lines"] = Json::array();
        for (const auto& line : chat->lines)
            c["lines"].push_back({{"round", line.round}, {"sender", line.sender}, {"body", line.body}});
        j["chat"] = c;
    } else {
        j["chat"] = nullptr;
    }
    return j;
}

ScenarioScript ScenarioScript::from_json(const Json& j) {
    ScenarioScript s;
    s.seed = j.value("seed", std::uint64_t{0});
    s.users = j.at("users").get<std::vector<std::string>>();
    s.mixes = j.value("mixes", std::size_t{2});
    s.rounds = j.value("rounds", std::size_t{0});
    s.public_name = j.value("public_name", std::vector<bool>(s.users.size(), false));
    if (s.public_name.size() != s.users.size())
        throw std::invalid_argument{"public_name must have one entry per user"};
    auto n = static_cast<std::uint32_t>(s.users.size());
    auto check = [n](std::uint32_t u) {
        if (u >= n)
            throw std::invalid_argument{"scenario refers to an unknown user"};
        return u;
    };
    for (const auto& e : j.value("edges", Json::array())) {
        auto a = check(e.at(0).get<std::uint32_t>());
        auto b = check(e.at(1).get<std::uint32_t>());
        if (a == b)
            throw std::invalid_argument{"self edge in scenario"};
        s.edges.push_back({std::min(a, b), std::max(a, b)});
    }
    std::sort(s.edges.begin(), s.edges.end());
    s.edges.erase(std::unique(s.edges.begin(), s.edges.end()), s.edges.end());
    for (const auto& m : j.value("messages", Json::array())) {
        ScenarioMessage x{m.at("id"), m.at("round"), check(m.at("sender")), check(m.at("receiver")),
                          m.value("media", false), m.at("body")};
        if (!s.adjacent(x.sender, x.receiver))
            throw std::invalid_argument{"message between users who are not contacts"};
        s.messages.push_back(std::move(x));
    }
    for (const auto& p : j.value("posts", Json::array()))
        s.posts.push_back({p.at("id"), p.at("round"), check(p.at("owner")), p.value("media", false), p.at("body")});
    for (const auto& l : j.value("lookups", Json::array()))
        s.lookups.push_back({l.at("id"), l.at("round"), check(l.at("viewer")), check(l.at("target"))});
    if (j.contains("chat") && !j["chat"].is_null()) {
        const auto& c = j["chat"];
        ScenarioChat x;
        x.title = c.at("title");
        x.owner = check(c.at("owner"));
        for (auto m : c.at("members").get<std::vector<std::uint32_t>>()) {
            if (!s.adjacent(x.owner, check(m)))
                throw std::invalid_argument{"chat member is not a contact of the owner"};
            x.members.push_back(m);
        }
        x.removed = check(c.at("removed"));
        x.remove_round = c.at("remove_round");
        for (const auto& line : c.value("lines", Json::array()))
            x.lines.push_back({line.at("round"), check(line.at("sender")), line.at("body")});
        s.chat = std::move(x);
    }
    return s;
}

}  // namespace concealed::harness
