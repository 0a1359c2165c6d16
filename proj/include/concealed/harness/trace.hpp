#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "concealed/address_store.hpp"
#include "concealed/connection.hpp"
#include "concealed/harness/scenario.hpp"

namespace concealed::harness {

enum class StoreKind { Concealed, Baseline };

std::string_view to_string(StoreKind kind);
StoreKind parse_store_kind(std::string_view text);

struct TraceDelta {
    std::string kind;
    std::string object;
    std::uint64_t index = 0;
    std::size_t size = 0;
};

/// One request as the server saw it: when, from which transport endpoint, the frame and the
/// reply (wire lines for the concealed store, JSON text for the baseline) and what changed.
struct TraceEvent {
    std::int64_t time = 0;
    std::string endpoint;
    std::string request;
    std::string response;
    std::vector<TraceDelta> deltas;
};

/// Everything a malicious server operator can log, plus the public mix directory.
struct ServerTrace {
    StoreKind store = StoreKind::Concealed;
    /// Mix inbox addresses (hex) from the published directory.
    std::vector<std::string> mix_objects;
    std::vector<TraceEvent> events;

    Json to_json() const;
    static ServerTrace from_json(const Json& j);
};

/// Facts an attacker does not get to see, kept next to the trace so reports can be scored.
struct GroundTruth {
    /// Endpoint of each scenario user.
    std::vector<std::string> endpoints;
    std::vector<std::string> mix_endpoints;
    /// Per trace event: what scenario action caused it, e.g. "msg:12", or empty.
    std::vector<std::string> tags;
    /// Synthetic geolocation database available to the attacker: endpoint -> region.
    std::map<std::string, std::string> locations;
    /// Scenario messages that reached their receiver.
    std::size_t delivered = 0;

    Json to_json() const;
    static GroundTruth from_json(const Json& j);
};

/// Serializes trace appends from every connection. The current tag labels events until
/// changed.
class TraceRecorder {
  public:
    explicit TraceRecorder(const Clock& clock) : clock_{clock} {}

    void set_tag(std::string tag) { tag_ = std::move(tag); }
    void on_delta(const StoreDelta& delta);
    void record(const std::string& endpoint, std::string request, std::string response);
    void add_deltas(std::vector<TraceDelta> deltas);

    ServerTrace& trace() { return trace_; }
    std::vector<std::string>& tags() { return tags_; }

  private:
    const Clock& clock_;
    std::string tag_;
    std::vector<TraceDelta> pending_;
    ServerTrace trace_;
    std::vector<std::string> tags_;
};

/// Connection wrapper that logs each exchange under a fixed endpoint id.
class RecordingConnection final : public Connection {
  public:
    RecordingConnection(Connection& inner, TraceRecorder& recorder, std::string endpoint)
            : inner_{inner}, recorder_{recorder}, endpoint_{std::move(endpoint)} {}

    ServerFrame request(const ClientFrame& frame) override;
    const std::string& endpoint() const { return endpoint_; }

  private:
    Connection& inner_;
    TraceRecorder& recorder_;
    std::string endpoint_;
};

}  // namespace concealed::harness
