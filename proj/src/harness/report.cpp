#include "concealed/harness/report.hpp"

#include <cstdio>
#include <set>

#include "concealed/harness/attacks.hpp"
#include "concealed/random.hpp"
#include "concealed/stats.hpp"

namespace concealed::harness {

namespace {

constexpr std::size_t permutations = 1000;

double fraction(std::size_t hits, std::size_t total) {
    return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

template <typename T>
std::optional<double> jaccard(const std::set<T>& a, const std::set<T>& b) {
    if (a.empty() && b.empty())
        return std::nullopt;
    std::size_t common = 0;
    for (const auto& x : a)
        common += b.count(x);
    return fraction(common, a.size() + b.size() - common);
}

Json number_or_null(const std::optional<double>& x) {
    return x ? Json(*x) : Json(nullptr);
}

std::string column_of(const AttackReport& r) {
    if (r.store == StoreKind::Baseline || r.variant.empty() || r.variant == "mixed")
        return std::string{to_string(r.store)};
    return std::string{to_string(r.store)} + "-" + r.variant;
}

}  // namespace

AttackReport evaluate(const ScenarioScript& s, const RunOutput& run, const std::string& variant) {
    AttackReport r;
    r.store = run.trace.store;
    r.seed = s.seed;
    r.variant = variant;
    r.users = s.users.size();
    const auto& truth = run.truth;
    const auto n = static_cast<std::uint32_t>(s.users.size());
    std::map<std::string, std::uint32_t> user_of;
    for (std::uint32_t u = 0; u < truth.endpoints.size(); ++u)
        user_of[truth.endpoints[u]] = u;
    auto user = [&](const std::string& ep) -> std::int64_t {
        auto it = user_of.find(ep);
        return it == user_of.end() ? -1 : it->second;
    };
    auto ep = [&](std::uint32_t u) { return truth.endpoints.at(u); };
    std::map<std::string, std::vector<std::size_t>> tagged;
    for (std::size_t i = 0; i < truth.tags.size(); ++i)
        if (!truth.tags[i].empty())
            tagged[truth.tags[i]].push_back(i);
    auto tag = [](const char* kind, auto id) { return std::string{kind} + ":" + std::to_string(id); };
    // First guess made for any event caused by the tagged action.
    auto guess_for = [&](const std::vector<LinkGuess>& guesses, const std::string& t) -> std::int64_t {
        std::map<std::size_t, const LinkGuess*> by_event;
        for (const auto& g : guesses)
            by_event[g.event] = &g;
        for (auto e : tagged[t]) {
            auto it = by_event.find(e);
            if (it != by_event.end())
                return user(it->second->receiver);
        }
        return -1;
    };

    auto adj = s.adjacency();
    auto deg = s.degrees();

    auto degree = attack_degree(run.trace);
    {
        std::size_t exact = 0, close = 0;
        for (std::uint32_t u = 0; u < n; ++u) {
            double est = degree.degree.count(ep(u)) ? degree.degree.at(ep(u)) : 0.0;
            r.degree_estimate.push_back(est);
            r.degree_true.push_back(static_cast<double>(deg[u]));
            exact += est == static_cast<double>(deg[u]);
            double true_nd = 0;
            for (auto v : adj[u])
                true_nd += static_cast<double>(deg[v]);
            true_nd = adj[u].empty() ? 0.0 : true_nd / static_cast<double>(adj[u].size());
            double est_nd = degree.neighbour_degree.count(ep(u)) ? degree.neighbour_degree.at(ep(u)) : 0.0;
            close += std::abs(est_nd - true_nd) <= 0.5;
        }
        r.vectors["NS1"] = {n ? std::optional{fraction(exact, n)} : std::nullopt,
                            {{"r", stats::pearson(r.degree_estimate, r.degree_true)}}};
        r.vectors["NS2"] = {n ? std::optional{fraction(close, n)} : std::nullopt, {{"tolerance", 0.5}}};
    }

    auto links = attack_linking(run.trace);
    {
        std::size_t hits = 0;
        double chance = 0;
        std::set<std::pair<std::int64_t, std::int64_t>> predicted, actual;
        for (const auto& m : s.messages) {
            auto g = guess_for(links, tag("msg", m.id));
            hits += g == m.receiver;
            chance += 1.0 / static_cast<double>(n - 1);
            actual.insert({std::min(m.sender, m.receiver), std::max(m.sender, m.receiver)});
            if (g >= 0)
                predicted.insert({std::min<std::int64_t>(m.sender, g), std::max<std::int64_t>(m.sender, g)});
        }
        auto total = s.messages.size();
        r.linking_chance = total ? chance / static_cast<double>(total) : 0.0;
        r.vectors["CI3"] = {total ? std::optional{fraction(hits, total)} : std::nullopt,
                            {{"chance", r.linking_chance}, {"messages", total}}};
        r.vectors["DS2"] = {jaccard(predicted, actual), {{"predicted_pairs", predicted.size()}, {"pairs", actual.size()}}};
    }

    auto timing = attack_timing(run.trace);
    {
        std::vector<std::int64_t> guess;
        std::map<std::uint32_t, std::vector<std::size_t>> by_round;
        for (std::size_t i = 0; i < s.messages.size(); ++i) {
            guess.push_back(guess_for(timing.nearest, tag("msg", s.messages[i].id)));
            by_round[s.messages[i].round].push_back(i);
        }
        auto accuracy = [&](const std::vector<std::uint32_t>& receivers) {
            std::size_t hits = 0;
            for (std::size_t i = 0; i < receivers.size(); ++i)
                hits += guess[i] == receivers[i];
            return fraction(hits, receivers.size());
        };
        std::vector<std::uint32_t> receivers;
        for (const auto& m : s.messages)
            receivers.push_back(m.receiver);
        double observed = accuracy(receivers);
        SeededRng rng = SeededRng{s.seed}.derive("permutation");
        std::size_t as_good = 0;
        for (std::size_t k = 0; k < permutations && !receivers.empty(); ++k) {
            auto shuffled = receivers;
            for (const auto& [round, idx] : by_round) {
                std::vector<std::uint32_t> group;
                for (auto i : idx)
                    group.push_back(receivers[i]);
                rng.shuffle(group.begin(), group.end());
                for (std::size_t j = 0; j < idx.size(); ++j)
                    shuffled[idx[j]] = group[j];
            }
            as_good += accuracy(shuffled) >= observed;
        }
        r.timing_p = receivers.empty() ? 1.0 : static_cast<double>(1 + as_good) / static_cast<double>(1 + permutations);
        r.vectors["T1"] = {receivers.empty() ? std::nullopt : std::optional{observed}, {{"p", r.timing_p}}};

        std::size_t grants = 0, grant_hits = 0;
        for (auto [a, b] : s.edges)
            for (auto [owner, reader] : {std::pair{a, b}, std::pair{b, a}}) {
                ++grants;
                grant_hits += guess_for(timing.key_readers, tag("grant", owner) + ":" + std::to_string(reader)) == reader;
            }
        r.vectors["T2"] = {grants ? std::optional{fraction(grant_hits, grants)} : std::nullopt, {{"grants", grants}}};

        if (s.chat) {
            bool hit = guess_for(timing.removals, "remove") == s.chat->removed;
            r.vectors["T3"] = {hit ? 1.0 : 0.0, {{"removals", 1}}};
        } else {
            r.vectors["T3"] = {std::nullopt, {{"removals", 0}}};
        }
    }

    auto sizes = attack_sizes(run.trace);
    {
        // Balanced accuracy so that a constant guess scores 0.5.
        std::size_t hit[2] = {0, 0}, count[2] = {0, 0};
        auto score = [&](const std::string& t, bool media) {
            for (auto e : tagged[t]) {
                auto it = sizes.media.find(e);
                if (it == sizes.media.end())
                    continue;
                ++count[media];
                hit[media] += it->second == media;
                return;
            }
            ++count[media];
        };
        for (const auto& m : s.messages)
            score(tag("msg", m.id), m.media);
        for (const auto& p : s.posts)
            score(tag("post", p.id), p.media);
        std::optional<double> acc;
        if (count[0] + count[1] >= 2) {
            if (count[0] && count[1])
                acc = (fraction(hit[0], count[0]) + fraction(hit[1], count[1])) / 2;
            else
                acc = fraction(hit[0] + hit[1], count[0] + count[1]);
        }
        r.vectors["DS3"] = {acc, {{"objects", count[0] + count[1]}}};

        std::vector<std::size_t> posts(n);
        for (const auto& p : s.posts)
            ++posts[p.owner];
        std::size_t count_hits = 0, history_hits = 0;
        for (std::uint32_t u = 0; u < n; ++u) {
            auto c = sizes.object_count.find(ep(u));
            auto h = sizes.update_count.find(ep(u));
            count_hits += c != sizes.object_count.end() && c->second == static_cast<double>(deg[u]);
            history_hits += h != sizes.update_count.end() ? h->second == static_cast<double>(posts[u]) : posts[u] == 0;
        }
        r.vectors["DS1"] = {n ? std::optional{fraction(count_hits, n)} : std::nullopt, {{"counted", "contacts"}}};
        r.vectors["DS4"] = {n ? std::optional{fraction(history_hits, n)} : std::nullopt, {{"counted", "posts"}}};
    }

    auto endpoints = attack_endpoints(run.trace, truth.locations);
    {
        std::set<std::pair<std::int64_t, std::int64_t>> predicted, actual;
        for (const auto& [a, b] : endpoints.pairs) {
            auto x = user(a), y = user(b);
            if (x >= 0 && y >= 0)
                predicted.insert({std::min(x, y), std::max(x, y)});
        }
        for (auto [a, b] : s.edges)
            actual.insert({a, b});
        r.vectors["CI1"] = {jaccard(predicted, actual), {{"predicted_pairs", predicted.size()}}};

        std::size_t located = 0;
        for (std::uint32_t u = 0; u < n; ++u) {
            auto it = endpoints.region_of.find(s.users[u]);
            auto guess = it == endpoints.region_of.end() ? endpoints.default_region : it->second;
            located += truth.locations.count(ep(u)) && guess == truth.locations.at(ep(u));
        }
        r.vectors["CI2"] = {n ? std::optional{fraction(located, n)} : std::nullopt,
                            {{"identified", endpoints.region_of.size()}}};

        std::size_t events = 0, recovered = 0;
        auto seen = [&](const char* kind, std::uint32_t a, std::uint32_t b) {
            return endpoints.control.count({kind, ep(a), ep(b)}) > 0;
        };
        for (auto [a, b] : s.edges) {
            ++events;
            recovered += seen("contact", a, b) || seen("contact", b, a);
        }
        for (const auto& l : s.lookups) {
            ++events;
            recovered += seen("lookup", l.viewer, l.target);
        }
        r.vectors["CI4"] = {events ? std::optional{fraction(recovered, events)} : std::nullopt,
                            {{"control_events", events}}};
    }
    return r;
}

Json AttackReport::to_json() const {
    Json v = Json::object();
    for (const auto& [name, score] : vectors) {
        Json entry = score.detail;
        entry["accuracy"] = number_or_null(score.accuracy);
        v[name] = entry;
    }
    return {{"store", to_string(store)},
            {"seed", seed},
            {"variant", variant},
            {"users", users},
            {"vectors", v},
            {"degree", {{"estimate", degree_estimate}, {"true", degree_true}}},
            {"linking_chance", linking_chance},
            {"timing_p", timing_p}};
}

AttackReport AttackReport::from_json(const Json& j) {
    AttackReport r;
    r.store = parse_store_kind(j.at("store").get<std::string>());
    r.seed = j.at("seed");
    r.variant = j.value("variant", "mixed");
    r.users = j.value("users", std::size_t{0});
    for (const auto& [name, entry] : j.at("vectors").items()) {
        VectorScore s;
        if (!entry.at("accuracy").is_null())
            s.accuracy = entry.at("accuracy").get<double>();
        s.detail = entry;
        s.detail.erase("accuracy");
        r.vectors[name] = s;
    }
    r.degree_estimate = j.at("degree").at("estimate").get<std::vector<double>>();
    r.degree_true = j.at("degree").at("true").get<std::vector<double>>();
    r.linking_chance = j.value("linking_chance", 0.0);
    r.timing_p = j.value("timing_p", 1.0);
    return r;
}

Json compare(const std::vector<AttackReport>& reports) {
    std::set<std::string> columns;
    std::set<std::uint64_t> seeds;
    std::map<std::string, std::map<std::uint64_t, const AttackReport*>> by_column;
    for (const auto& r : reports) {
        columns.insert(column_of(r));
        seeds.insert(r.seed);
        by_column[column_of(r)][r.seed] = &r;
    }
    Json out;
    out["seeds"] = seeds;
    out["columns"] = columns;
    out["vectors"] = Json::object();
    for (const auto* name : vector_names) {
        Json row = Json::object();
        for (const auto& c : columns) {
            double sum = 0;
            std::size_t k = 0;
            for (const auto& [seed, r] : by_column[c]) {
                auto it = r->vectors.find(name);
                if (it != r->vectors.end() && it->second.accuracy) {
                    sum += *it->second.accuracy;
                    ++k;
                }
            }
            row[c] = k ? Json(sum / static_cast<double>(k)) : Json(nullptr);
        }
        bool dominates = true;
        std::size_t pairs = 0;
        for (const auto& [seed, b] : by_column["baseline"]) {
            auto c = by_column["concealed"].find(seed);
            if (c == by_column["concealed"].end())
                continue;
            auto bi = b->vectors.find(name);
            auto ci = c->second->vectors.find(name);
            if (bi == b->vectors.end() || ci == c->second->vectors.end() || !bi->second.accuracy ||
                !ci->second.accuracy)
                continue;
            ++pairs;
            dominates = dominates && *bi->second.accuracy >= *ci->second.accuracy;
        }
        row["dominates"] = pairs ? Json(dominates) : Json(nullptr);
        row["pairs"] = pairs;
        out["vectors"][name] = row;
    }
    out["degree_r"] = Json::object();
    out["linking"] = Json::object();
    out["timing_p_min"] = Json::object();
    for (const auto& c : columns) {
        std::vector<double> est, tru;
        double acc = 0, chance = 0, p_min = 1;
        std::size_t k = 0;
        for (const auto& [seed, r] : by_column[c]) {
            est.insert(est.end(), r->degree_estimate.begin(), r->degree_estimate.end());
            tru.insert(tru.end(), r->degree_true.begin(), r->degree_true.end());
            auto it = r->vectors.find("CI3");
            if (it != r->vectors.end() && it->second.accuracy) {
                acc += *it->second.accuracy;
                chance += r->linking_chance;
                ++k;
            }
            p_min = std::min(p_min, r->timing_p);
        }
        out["degree_r"][c] = stats::pearson(est, tru);
        out["linking"][c] = {{"accuracy", k ? acc / static_cast<double>(k) : 0.0},
                             {"chance", k ? chance / static_cast<double>(k) : 0.0}};
        out["timing_p_min"][c] = p_min;
    }
    return out;
}

std::string compare_table(const Json& cmp) {
    auto fmt = [](const Json& x) {
        if (x.is_null())
            return std::string{"n/a"};
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3f", x.get<double>());
        return std::string{buf};
    };
    auto pad = [](std::string s, std::size_t w) {
        s.resize(std::max(w, s.size()), ' ');
        return s;
    };
    std::vector<std::string> columns = cmp.at("columns").get<std::vector<std::string>>();
    std::size_t width = 10;
    for (const auto& c : columns)
        width = std::max(width, c.size() + 2);
    std::string out = pad("vector", 16);
    for (const auto& c : columns)
        out += pad(c, width);
    out += "dominates\n";
    for (const auto* name : vector_names) {
        const auto& row = cmp.at("vectors").at(name);
        out += pad(name, 16);
        for (const auto& c : columns)
            out += pad(fmt(row.at(c)), width);
        const auto& d = row.at("dominates");
        out += d.is_null() ? "n/a" : (d.get<bool>() ? "yes" : "NO");
        out += "\n";
    }
    out += "\n";
    out += pad("degree r", 16);
    for (const auto& c : columns)
        out += pad(fmt(cmp.at("degree_r").at(c)), width);
    out += "\n" + pad("linking", 16);
    for (const auto& c : columns)
        out += pad(fmt(cmp.at("linking").at(c).at("accuracy")), width);
    out += "\n" + pad("chance", 16);
    for (const auto& c : columns)
        out += pad(fmt(cmp.at("linking").at(c).at("chance")), width);
    out += "\n" + pad("T1 p min", 16);
    for (const auto& c : columns)
        out += pad(fmt(cmp.at("timing_p_min").at(c)), width);
    out += "\n";
    return out;
}

}  // namespace concealed::harness
