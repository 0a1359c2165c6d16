#pragma once

#include <optional>

#include "concealed/group.hpp"
#include "concealed/harness/trace.hpp"
#include "concealed/mix_node.hpp"

namespace concealed::harness {

/// Batch of 8 with a 20 s timeout.
inline MixConfig harness_mix_config() {
    MixConfig c;
    c.batch_threshold = 8;
    c.flush_timeout = Millis{20'000};
    return c;
}

struct RunOptions {
    /// Mix path length for messages; unset means the client default. 0 writes straight into
    /// the receiver's inbox.
    std::optional<std::size_t> path_length;
    MixConfig mix = harness_mix_config();
    Millis round_length{60'000};
    /// Extra rounds without new actions so that mixed traffic drains.
    std::size_t drain_rounds = 2;
};

struct RunOutput {
    ServerTrace trace;
    GroundTruth truth;
    /// Final store snapshot; empty for the baseline.
    std::string snapshot;
};

/// Drives the script through the real client, mix and store components, or through the
/// plaintext reference store. Deterministic in the script's seed.
RunOutput run_scenario(const ScenarioScript& script, StoreKind kind, const RunOptions& options = {});

}  // namespace concealed::harness
