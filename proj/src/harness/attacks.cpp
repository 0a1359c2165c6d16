#include "concealed/harness/attacks.hpp"

#include <algorithm>
#include <numeric>

#include "concealed/envelope.hpp"
#include "concealed/osn.hpp"
#include "concealed/random.hpp"

namespace concealed::harness {

namespace {

constexpr std::int64_t window_ms = 60'000;
constexpr std::size_t max_chain = 6;

std::pair<std::string, std::string> ordered(const std::string& a, const std::string& b) {
    return a < b ? std::pair{a, b} : std::pair{b, a};
}

/// Deterministic tie breaking among candidates.
std::string pick(std::set<std::string> candidates, Rng& rng) {
    if (candidates.empty())
        return {};
    std::vector<std::string> v(candidates.begin(), candidates.end());
    return v[rng.uniform(v.size())];
}

std::string endpoint_of(const TraceView& view, const Json& op, const char* field) {
    auto it = view.endpoint_of.find(op.value(field, ""));
    return it == view.endpoint_of.end() ? std::string{} : it->second;
}

bool is_user(const TraceView& view, const std::string& endpoint) {
    return view.user_endpoints.count(endpoint) > 0;
}

std::string creator(const TraceView& view, const std::string& object) {
    auto it = view.creator.find(object);
    return it == view.creator.end() ? std::string{} : it->second;
}

}  // namespace

TraceView TraceView::build(const ServerTrace& trace) {
    TraceView v;
    v.store = trace.store;
    v.mix_objects.insert(trace.mix_objects.begin(), trace.mix_objects.end());
    std::set<std::string> endpoints;
    for (const auto& e : trace.events)
        endpoints.insert(e.endpoint);

    if (trace.store == StoreKind::Baseline) {
        for (const auto& e : trace.events) {
            auto op = Json::parse(e.request);
            if (op.value("op", "") == "register")
                v.endpoint_of[op.value("user", "")] = e.endpoint;
            v.ops.push_back(std::move(op));
        }
        v.user_endpoints = endpoints;
        return v;
    }

    std::map<std::string, std::size_t> pending;
    for (std::size_t i = 0; i < trace.events.size(); ++i) {
        const auto& e = trace.events[i];
        ServerFrame reply;
        ClientFrame frame;
        try {
            frame = decode_client(e.request);
            reply = decode_server(e.response);
        } catch (const std::exception&) {
            continue;
        }
        bool challenged = std::holds_alternative<ChallengeIssued>(reply);
        bool failed = std::holds_alternative<Error>(reply);
        if (const auto* answer = std::get_if<ChallengeAnswer>(&frame)) {
            (void)answer;
            auto it = pending.find(e.endpoint);
            if (it != pending.end()) {
                v.accesses[it->second].ok = !failed;
                pending.erase(it);
            }
            continue;
        }
        Access a;
        a.event = i;
        a.time = e.time;
        a.endpoint = e.endpoint;
        a.ok = !failed;
        std::visit(overloaded{
                           [&](const CreateAddress&) { a.op = Access::Op::Create; },
                           [&](const UpdateAddress& f) {
                               a.op = Access::Op::Update;
                               a.object = f.address.to_string();
                           },
                           [&](const ReadAddress& f) {
                               a.op = Access::Op::Read;
                               a.object = f.address.to_string();
                               a.open = std::holds_alternative<Messages>(reply);
                           },
                           [&](const WriteAddress& f) {
                               a.op = Access::Op::Write;
                               a.object = f.address.to_string();
                               a.size = f.payload.size();
                           },
                           [&](const PurgeAddress& f) {
                               a.op = Access::Op::Purge;
                               a.object = f.address.to_string();
                           },
                           [&](const ChallengeAnswer&) {},
                   },
                   frame);
        if (a.op == Access::Op::Update && !v.creator.count(a.object)) {
            v.creator[a.object] = a.endpoint;
            v.created_at[a.object] = a.time;
        }
        if (v.mix_objects.count(a.object) && (a.op == Access::Op::Read || a.op == Access::Op::Update))
            v.mix_endpoints.insert(a.endpoint);
        if (challenged)
            pending[e.endpoint] = v.accesses.size();
        v.accesses.push_back(std::move(a));
    }
    for (const auto& ep : endpoints)
        if (!v.mix_endpoints.count(ep))
            v.user_endpoints.insert(ep);
    return v;
}

DegreeEstimate attack_degree(const ServerTrace& trace) {
    auto view = TraceView::build(trace);
    DegreeEstimate out;
    if (view.store == StoreKind::Baseline) {
        for (const auto& op : view.ops) {
            if (op.value("op", "") != "add_contact")
                continue;
            auto a = endpoint_of(view, op, "user");
            auto b = endpoint_of(view, op, "contact");
            out.neighbours[a].insert(b);
            out.neighbours[b].insert(a);
        }
    } else {
        std::map<std::string, std::set<std::string>> touched;
        for (const auto& a : view.accesses)
            if (!a.object.empty() && !view.mix_objects.count(a.object) && is_user(view, a.endpoint))
                touched[a.object].insert(a.endpoint);
        for (const auto& [object, who] : touched)
            for (const auto& x : who)
                for (const auto& y : who)
                    if (x != y)
                        out.neighbours[x].insert(y);
    }
    for (const auto& ep : view.user_endpoints)
        out.degree[ep] = static_cast<double>(out.neighbours[ep].size());
    for (const auto& ep : view.user_endpoints) {
        const auto& nb = out.neighbours[ep];
        double sum = 0;
        for (const auto& x : nb)
            sum += out.degree[x];
        out.neighbour_degree[ep] = nb.empty() ? 0.0 : sum / static_cast<double>(nb.size());
    }
    return out;
}

std::vector<LinkGuess> attack_linking(const ServerTrace& trace) {
    auto view = TraceView::build(trace);
    std::vector<LinkGuess> out;
    SeededRng rng{0x11cc};
    if (view.store == StoreKind::Baseline) {
        for (std::size_t i = 0; i < view.ops.size(); ++i)
            if (view.ops[i].value("op", "") == "send")
                out.push_back({i, trace.events[i].endpoint, endpoint_of(view, view.ops[i], "to"), 1});
        return out;
    }

    // Reads of each mix inbox and writes of each mix, in log order.
    std::map<std::string, std::vector<const Access*>> inbox_reads;
    std::map<std::string, std::vector<const Access*>> mix_writes;
    for (const auto& a : view.accesses) {
        if (a.op == Access::Op::Read && view.mix_objects.count(a.object))
            inbox_reads[a.object].push_back(&a);
        if (a.op == Access::Op::Write && view.mix_endpoints.count(a.endpoint))
            mix_writes[a.endpoint].push_back(&a);
    }
    // Writes of the first flush by the inbox's reader after the inbox was next read.
    auto next_flush = [&](const std::string& inbox, std::size_t after) {
        std::vector<const Access*> group;
        const auto& reads = inbox_reads[inbox];
        auto r = std::find_if(reads.begin(), reads.end(), [after](const Access* a) { return a->event > after; });
        if (r == reads.end())
            return group;
        const auto& writes = mix_writes[(*r)->endpoint];
        auto w = std::find_if(writes.begin(), writes.end(), [&](const Access* a) { return a->event > (*r)->event; });
        for (auto it = w; it != writes.end() && (*it)->time == (*w)->time; ++it)
            group.push_back(*it);
        return group;
    };

    for (const auto& a : view.accesses) {
        if (a.op != Access::Op::Write || !is_user(view, a.endpoint))
            continue;
        std::set<std::string> candidates;
        if (!view.mix_objects.count(a.object)) {
            auto owner = creator(view, a.object);
            if (is_user(view, owner) && owner != a.endpoint)
                candidates.insert(owner);
        } else {
            std::vector<std::pair<std::string, std::size_t>> frontier{{a.object, a.event}};
            std::set<std::pair<std::string, std::size_t>> seen;
            for (std::size_t hop = 0; hop < max_chain && !frontier.empty(); ++hop) {
                std::vector<std::pair<std::string, std::size_t>> next;
                for (const auto& [inbox, after] : frontier) {
                    for (const auto* w : next_flush(inbox, after)) {
                        if (view.mix_objects.count(w->object)) {
                            if (seen.insert({w->object, w->event}).second)
                                next.push_back({w->object, w->event});
                            continue;
                        }
                        auto owner = creator(view, w->object);
                        if (is_user(view, owner) && owner != a.endpoint)
                            candidates.insert(owner);
                    }
                }
                frontier = std::move(next);
            }
        }
        out.push_back({a.event, a.endpoint, pick(candidates, rng), candidates.size()});
    }
    return out;
}

TimingLinks attack_timing(const ServerTrace& trace) {
    auto view = TraceView::build(trace);
    TimingLinks out;
    const auto& events = trace.events;

    if (view.store == StoreKind::Baseline) {
        for (std::size_t i = 0; i < view.ops.size(); ++i) {
            const auto& op = view.ops[i];
            auto kind = op.value("op", "");
            if (kind == "send") {
                std::string receiver;
                for (std::size_t j = i; j < events.size() && receiver.empty(); ++j)
                    for (const auto& d : events[j].deltas)
                        if (d.kind == "appended" && d.object.starts_with("mailbox/")) {
                            receiver = view.endpoint_of[d.object.substr(8)];
                            break;
                        }
                out.nearest.push_back({i, events[i].endpoint, receiver, 1});
            } else if (kind == "grant") {
                out.key_readers.push_back({i, events[i].endpoint, endpoint_of(view, op, "reader"), 1});
            } else if (kind == "chat_remove") {
                out.removals.push_back({i, events[i].endpoint, endpoint_of(view, op, "member"), 1});
            }
        }
        return out;
    }

    // Objects that receive writes from someone other than their creator act as mailboxes.
    std::set<std::string> mailboxes;
    for (const auto& a : view.accesses)
        if (a.op == Access::Op::Write && !view.mix_objects.count(a.object) && creator(view, a.object) != a.endpoint)
            mailboxes.insert(a.object);
    std::map<std::string, std::vector<const Access*>> by_object;
    for (const auto& a : view.accesses)
        if (!a.object.empty())
            by_object[a.object].push_back(&a);

    for (const auto& a : view.accesses) {
        if (!is_user(view, a.endpoint))
            continue;
        if (a.op == Access::Op::Write) {
            std::string receiver;
            for (std::size_t j = a.event; j < events.size() && receiver.empty(); ++j)
                for (const auto& d : events[j].deltas)
                    if (d.kind == "appended" && mailboxes.count(d.object) && creator(view, d.object) != a.endpoint) {
                        receiver = creator(view, d.object);
                        break;
                    }
            out.nearest.push_back({a.event, a.endpoint, receiver, receiver.empty() ? 0u : 1u});

            std::string reader;
            if (creator(view, a.object) == a.endpoint)
                for (const auto* b : by_object[a.object])
                    if (b->event > a.event && b->op == Access::Op::Read && b->endpoint != a.endpoint &&
                        is_user(view, b->endpoint)) {
                        reader = b->endpoint;
                        break;
                    }
            out.key_readers.push_back({a.event, a.endpoint, reader, reader.empty() ? 0u : 1u});
        }
        if (a.op == Access::Op::Update && creator(view, a.object) == a.endpoint) {
            const auto& log = by_object[a.object];
            if (log.empty() || log.front()->event == a.event)
                continue;  // the creation handshake itself
            std::set<std::string> before;
            std::map<std::string, bool> later_ok;
            for (const auto* b : log) {
                if (b->endpoint == a.endpoint || !is_user(view, b->endpoint))
                    continue;
                if (b->event < a.event)
                    before.insert(b->endpoint);
                else if (b->event > a.event && before.count(b->endpoint))
                    later_ok[b->endpoint] = later_ok[b->endpoint] || b->ok;
            }
            std::set<std::string> cut;
            for (const auto& [ep, ok] : later_ok)
                if (!ok)
                    cut.insert(ep);
            SeededRng rng{a.event};
            out.removals.push_back({a.event, a.endpoint, pick(cut, rng), cut.size()});
        }
    }
    return out;
}

SizeGuesses attack_sizes(const ServerTrace& trace) {
    auto view = TraceView::build(trace);
    SizeGuesses out;
    std::vector<std::pair<std::size_t, double>> sizes;

    if (view.store == StoreKind::Baseline) {
        std::map<std::string, double> contacts, posts;
        for (std::size_t i = 0; i < view.ops.size(); ++i) {
            const auto& op = view.ops[i];
            auto kind = op.value("op", "");
            if (kind == "send" || kind == "post" || kind == "chat_send")
                sizes.push_back({i, static_cast<double>(op.value("body", std::string{}).size())});
            if (kind == "add_contact") {
                contacts[endpoint_of(view, op, "user")] += 1;
                contacts[endpoint_of(view, op, "contact")] += 1;
            }
            if (kind == "post")
                posts[trace.events[i].endpoint] += 1;
        }
        for (const auto& ep : view.user_endpoints) {
            out.object_count[ep] = contacts[ep];
            out.update_count[ep] = posts[ep];
        }
    } else {
        std::map<std::string, std::map<std::string, std::set<std::int64_t>>> windows;
        for (const auto& a : view.accesses) {
            if (a.op != Access::Op::Write || !is_user(view, a.endpoint))
                continue;
            sizes.push_back({a.event, static_cast<double>(a.size)});
            if (creator(view, a.object) == a.endpoint) {
                auto w = a.time / window_ms;
                if (w > view.created_at[a.object] / window_ms)
                    windows[a.endpoint][a.object].insert(w);
            }
        }
        std::map<std::string, double> created;
        for (const auto& [object, ep] : view.creator)
            created[ep] += 1;
        for (const auto& ep : view.user_endpoints) {
            out.object_count[ep] = created[ep];
            std::size_t most = 0;
            for (const auto& [object, w] : windows[ep])
                most = std::max(most, w.size());
            out.update_count[ep] = static_cast<double>(most);
        }
    }

    // Two-means split of the observed sizes; a single size means no split at all.
    if (sizes.empty())
        return out;
    auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end(),
                                        [](const auto& x, const auto& y) { return x.second < y.second; });
    double c0 = lo->second, c1 = hi->second;
    for (int iter = 0; iter < 50 && c0 < c1; ++iter) {
        double s0 = 0, s1 = 0, n0 = 0, n1 = 0;
        for (const auto& [e, s] : sizes) {
            if (s - c0 <= c1 - s) {
                s0 += s;
                ++n0;
            } else {
                s1 += s;
                ++n1;
            }
        }
        c0 = n0 > 0 ? s0 / n0 : c0;
        c1 = n1 > 0 ? s1 / n1 : c1;
    }
    for (const auto& [e, s] : sizes)
        out.media[e] = c0 < c1 && s - c0 > c1 - s;
    return out;
}

EndpointLinks attack_endpoints(const ServerTrace& trace, const std::map<std::string, std::string>& locations) {
    auto view = TraceView::build(trace);
    EndpointLinks out;
    std::map<std::string, std::string> name_to_endpoint;

    if (view.store == StoreKind::Baseline) {
        for (std::size_t i = 0; i < view.ops.size(); ++i) {
            const auto& op = view.ops[i];
            auto kind = op.value("op", "");
            if (kind == "add_contact") {
                auto a = endpoint_of(view, op, "user");
                auto b = endpoint_of(view, op, "contact");
                out.pairs.insert(ordered(a, b));
                out.control.insert({"contact", a, b});
            } else if (kind == "lookup") {
                out.control.insert({"lookup", trace.events[i].endpoint, endpoint_of(view, op, "target")});
            }
        }
        name_to_endpoint = view.endpoint_of;
    } else {
        for (const auto& [ep, nb] : attack_degree(trace).neighbours)
            for (const auto& x : nb)
                out.pairs.insert(ordered(ep, x));
        const EnvelopeFormat format;
        for (const auto& a : view.accesses) {
            if (!is_user(view, a.endpoint))
                continue;
            if (a.op == Access::Op::Read && a.open) {
                auto owner = creator(view, a.object);
                if (is_user(view, owner) && owner != a.endpoint)
                    out.control.insert({"lookup", a.endpoint, owner});
            }
            if (a.op != Access::Op::Write || view.mix_objects.count(a.object))
                continue;
            // Deliberately public profile entries are readable inside direct writes.
            auto frame = std::get<WriteAddress>(decode_client(trace.events[a.event].request));
            std::vector<Bytes> items;
            try {
                items = split(frame.payload);
            } catch (const std::exception&) {
                continue;
            }
            for (const auto& item : items) {
                std::optional<Json> record;
                try {
                    record = records::parse(item_inner(format, item));
                } catch (const std::exception&) {
                    continue;
                }
                if (record && record->value("t", "") == "plain" && record->value("label", "") == "Name")
                    name_to_endpoint[record->value("value", "")] = a.endpoint;
            }
        }
    }

    std::map<std::string, std::size_t> region_counts;
    for (const auto& ep : view.user_endpoints) {
        auto it = locations.find(ep);
        if (it != locations.end())
            ++region_counts[it->second];
    }
    std::size_t best = 0;
    for (const auto& [region, count] : region_counts)
        if (count > best) {
            best = count;
            out.default_region = region;
        }
    for (const auto& [name, ep] : name_to_endpoint) {
        auto it = locations.find(ep);
        if (it != locations.end())
            out.region_of[name] = it->second;
    }
    return out;
}

}  // namespace concealed::harness
