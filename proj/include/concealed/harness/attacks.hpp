#pragma once

#include <map>
#include <set>
#include <tuple>

#include "concealed/harness/trace.hpp"

namespace concealed::harness {

/// One request reduced to who touched which object. Challenge answers are folded into the
/// request they answer.
struct Access {
    enum class Op { Create, Update, Read, Write, Purge };
    std::size_t event = 0;
    std::int64_t time = 0;
    std::string endpoint;
    Op op = Op::Read;
    std::string object;
    std::size_t size = 0;
    bool ok = true;
    /// Read answered without a challenge (open_read object).
    bool open = false;
};

/// Log-derived facts shared by the estimators. For the concealed store objects are address ids
/// and creators are the endpoints that first installed keys; the baseline names everything.
struct TraceView {
    StoreKind store = StoreKind::Concealed;
    std::vector<Access> accesses;
    std::set<std::string> mix_objects;
    std::set<std::string> mix_endpoints;
    std::set<std::string> user_endpoints;
    std::map<std::string, std::string> creator;
    std::map<std::string, std::int64_t> created_at;
    /// Baseline only: account name -> endpoint, from registrations.
    std::map<std::string, std::string> endpoint_of;
    /// Baseline only: the parsed request of every event.
    std::vector<Json> ops;

    static TraceView build(const ServerTrace& trace);
};

/// A guessed counterpart for one trace event. receiver is empty when there was nothing to go on.
struct LinkGuess {
    std::size_t event = 0;
    std::string sender;
    std::string receiver;
    std::size_t candidates = 0;
};

struct DegreeEstimate {
    std::map<std::string, std::set<std::string>> neighbours;
    std::map<std::string, double> degree;
    std::map<std::string, double> neighbour_degree;
};

struct TimingLinks {
    /// Receiver of the first delivery following each outgoing write.
    std::vector<LinkGuess> nearest;
    /// First other reader of an object after a write to it.
    std::vector<LinkGuess> key_readers;
    /// Access holder cut off by a rekey.
    std::vector<LinkGuess> removals;
};

struct SizeGuesses {
    /// Per content write: guessed media (true) or text.
    std::map<std::size_t, bool> media;
    /// Per endpoint: number of objects it keeps.
    std::map<std::string, double> object_count;
    /// Per endpoint: how often it changed its own objects after creating them.
    std::map<std::string, double> update_count;
};

struct EndpointLinks {
    /// Unordered endpoint pairs seen touching the same object.
    std::set<std::pair<std::string, std::string>> pairs;
    /// Account name -> region, for every account the log ties to an endpoint.
    std::map<std::string, std::string> region_of;
    /// Fallback guess for accounts that stay anonymous.
    std::string default_region;
    /// (kind, actor endpoint, target endpoint); kind is "contact" or "lookup".
    std::set<std::tuple<std::string, std::string, std::string>> control;
};

DegreeEstimate attack_degree(const ServerTrace& trace);
std::vector<LinkGuess> attack_linking(const ServerTrace& trace);
TimingLinks attack_timing(const ServerTrace& trace);
SizeGuesses attack_sizes(const ServerTrace& trace);
EndpointLinks attack_endpoints(const ServerTrace& trace, const std::map<std::string, std::string>& locations);

}  // namespace concealed::harness
