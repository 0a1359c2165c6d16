#include "concealed/harness/trace.hpp"

#include <stdexcept>

namespace concealed::harness {

std::string_view to_string(StoreKind kind) {
    return kind == StoreKind::Concealed ? "concealed" : "baseline";
}

StoreKind parse_store_kind(std::string_view text) {
    if (text == "concealed")
        return StoreKind::Concealed;
    if (text == "baseline")
        return StoreKind::Baseline;
    throw std::invalid_argument{"store must be concealed or baseline"};
}

namespace {

std::string_view delta_kind(StoreDelta::Kind kind) {
    switch (kind) {
    case StoreDelta::Kind::Created:
        return "created";
    case StoreDelta::Kind::Updated:
        return "updated";
    case StoreDelta::Kind::Appended:
        return "appended";
    case StoreDelta::Kind::Purged:
        return "purged";
    }
    return "?";
}

}  // namespace

Json ServerTrace::to_json() const {
    Json j;
    j["store"] = to_string(store);
    j["mix_objects"] = mix_objects;
    j["events"] = Json::array();
    for (const auto& e : events) {
        Json deltas = Json::array();
        for (const auto& d : e.deltas)
            deltas.push_back({{"kind", d.kind}, {"object", d.object}, {"index", d.index}, {"size", d.size}});
        j["events"].push_back({{"time", e.time}, {"endpoint", e.endpoint}, {"request", e.request},
                               {"response", e.response}, {"deltas", deltas}});
    }
    return j;
}

ServerTrace ServerTrace::from_json(const Json& j) {
    ServerTrace t;
    t.store = parse_store_kind(j.at("store").get<std::string>());
    t.mix_objects = j.value("mix_objects", std::vector<std::string>{});
    for (const auto& e : j.at("events")) {
        TraceEvent ev{e.at("time"), e.at("endpoint"), e.at("request"), e.at("response"), {}};
        for (const auto& d : e.value("deltas", Json::array()))
            ev.deltas.push_back({d.at("kind"), d.at("object"), d.value("index", std::uint64_t{0}),
                                 d.value("size", std::size_t{0})});
        t.events.push_back(std::move(ev));
    }
    return t;
}

Json GroundTruth::to_json() const {
    return {{"endpoints", endpoints}, {"mix_endpoints", mix_endpoints}, {"tags", tags},
            {"locations", locations}, {"delivered", delivered}};
}

GroundTruth GroundTruth::from_json(const Json& j) {
    GroundTruth g;
    g.endpoints = j.at("endpoints").get<std::vector<std::string>>();
    g.mix_endpoints = j.value("mix_endpoints", std::vector<std::string>{});
    g.tags = j.value("tags", std::vector<std::string>{});
    g.locations = j.value("locations", std::map<std::string, std::string>{});
    g.delivered = j.value("delivered", std::size_t{0});
    return g;
}

void TraceRecorder::on_delta(const StoreDelta& delta) {
    pending_.push_back({std::string{delta_kind(delta.kind)}, delta.address.to_string(), delta.index, delta.size});
}

void TraceRecorder::add_deltas(std::vector<TraceDelta> deltas) {
    pending_.insert(pending_.end(), std::make_move_iterator(deltas.begin()), std::make_move_iterator(deltas.end()));
}

void TraceRecorder::record(const std::string& endpoint, std::string request, std::string response) {
    trace_.events.push_back({clock_.now().count(), endpoint, std::move(request), std::move(response), std::move(pending_)});
    pending_.clear();
    tags_.push_back(tag_);
}

ServerFrame RecordingConnection::request(const ClientFrame& frame) {
    auto line = encode(frame);
    auto reply = inner_.request(frame);
    recorder_.record(endpoint_, std::move(line), encode(reply));
    return reply;
}

}  // namespace concealed::harness
