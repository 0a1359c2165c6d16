#pragma once

#include <array>
#include <optional>

#include "concealed/harness/run.hpp"

namespace concealed::harness {

inline constexpr std::array<const char*, 13> vector_names{"NS1", "NS2", "DS1", "DS2", "DS3", "DS4", "T1",
                                                          "T2",  "T3",  "CI1", "CI2", "CI3", "CI4"};

struct VectorScore {
    /// In [0, 1]; unset when the vector has nothing to score (reported as n/a).
    std::optional<double> accuracy;
    Json detail = Json::object();
};

struct AttackReport {
    StoreKind store = StoreKind::Concealed;
    std::uint64_t seed = 0;
    std::string variant;
    std::size_t users = 0;
    std::map<std::string, VectorScore> vectors;
    /// Per user, in scenario order.
    std::vector<double> degree_estimate;
    std::vector<double> degree_true;
    double linking_chance = 0;
    /// Permutation p-value of the timing match against receivers shuffled within each round.
    double timing_p = 1;

    Json to_json() const;
    static AttackReport from_json(const Json& j);
};

/// Runs every estimator on the trace and scores it against the script.
AttackReport evaluate(const ScenarioScript& script, const RunOutput& run, const std::string& variant = "mixed");

/// Baseline-versus-concealed summary over any number of seeds: mean accuracy per vector,
/// per-seed dominance, pooled degree correlation and linking margin over chance.
Json compare(const std::vector<AttackReport>& reports);
/// The same summary as an aligned plain-text table.
std::string compare_table(const Json& comparison);

}  // namespace concealed::harness
