#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace concealed::harness {

using Json = nlohmann::json;

struct ScenarioMessage {
    std::uint32_t id = 0;
    std::uint32_t round = 0;
    std::uint32_t sender = 0;
    std::uint32_t receiver = 0;
    bool media = false;
    std::string body;
};

struct ScenarioPost {
    std::uint32_t id = 0;
    std::uint32_t round = 0;
    std::uint32_t owner = 0;
    bool media = false;
    std::string body;
};

/// A user looks up another user's public profile.
struct ScenarioLookup {
    std::uint32_t id = 0;
    std::uint32_t round = 0;
    std::uint32_t viewer = 0;
    std::uint32_t target = 0;
};

struct ScenarioChatLine {
    std::uint32_t round = 0;
    std::uint32_t sender = 0;
    std::string body;
};

struct ScenarioChat {
    std::string title;
    std::uint32_t owner = 0;
    /// Excluding the owner.
    std::vector<std::uint32_t> members;
    std::uint32_t removed = 0;
    std::uint32_t remove_round = 0;
    std::vector<ScenarioChatLine> lines;
};

struct ScenarioOptions {
    std::size_t users = 20;
    std::size_t mixes = 2;
    std::size_t rounds = 6;
    double edge_probability = 0.2;
    double media_fraction = 0.3;
    double post_probability = 0.3;
    std::size_t lookups_per_round = 3;
    double public_name_fraction = 0.25;
    bool chat = true;
};

/// Ground truth of one simulated deployment. Users are referred to by index into users.
struct ScenarioScript {
    std::uint64_t seed = 0;
    std::vector<std::string> users;
    std::size_t mixes = 0;
    std::size_t rounds = 0;
    /// Undirected contact graph, a < b, sorted.
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    /// Users whose profile shows their name publicly.
    std::vector<bool> public_name;
    std::vector<ScenarioMessage> messages;
    std::vector<ScenarioPost> posts;
    std::vector<ScenarioLookup> lookups;
    std::optional<ScenarioChat> chat;

    static ScenarioScript generate(std::uint64_t seed, const ScenarioOptions& options = {});

    std::vector<std::vector<std::uint32_t>> adjacency() const;
    std::vector<std::size_t> degrees() const;
    bool adjacent(std::uint32_t a, std::uint32_t b) const;

    Json to_json() const;
    static ScenarioScript from_json(const Json& j);
};

}  // namespace concealed::harness
