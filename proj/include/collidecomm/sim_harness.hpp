#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "collidecomm/bandit_env.hpp"
#include "collidecomm/player.hpp"

namespace collidecomm {

enum class Engine {
    lockstep,  // one environment step per round, full RoundRecords
    batched,   // same protocol, rounds between decisions sampled in bulk
};

Engine parse_engine(const std::string& name);
std::string_view to_string(Engine engine);

// Rows are written for every round up to dense_until, then at rounds growing
// geometrically by `ratio`, plus every round with a protocol event.
struct GridSpec {
    std::uint64_t dense_until = 10000;
    double ratio = 1.1;
};

struct SimConfig {
    std::uint64_t horizon = 0;
    CollisionMode mode = CollisionMode::zero;
    double blowup = kDefaultBlowup;
    Engine engine = Engine::batched;
    GridSpec grid;
    // Stop right after the n-th RECURSE performed by a communicator (0: never).
    int stop_after_recursions = 0;
    bool skip_quiet_cycles = true;
    // Batched engine only: spans are capped at t/fraction + 1 rounds so the
    // good-event check still sees the estimators at a fine resolution.
    std::uint64_t good_event_span_fraction = 64;
    // Lock-step engine only: receives every round.
    std::function<void(const RoundRecord&)> record_sink;
};

struct GridRow {
    std::uint64_t round = 0;
    double cum_regret = 0.0;
    std::uint64_t cum_collisions = 0;
    PhaseTag phase = PhaseTag::round_robin;
    std::string event;  // "player:TYPE=value" entries joined by ';'
};

// One communication episode seen from the ground truth.
struct CommEpisode {
    std::uint64_t origin = 0;
    std::uint64_t end_round = 0;
    std::vector<int> arms;
    std::vector<int> members;
    EpisodeSummary communicator;
    std::vector<EpisodeSummary> listeners;  // final (non-failed if any) summary per listener
    bool listener_failed = false;
    bool message_recovered = false;  // every listener decoded the communicator's component
    bool aligned = false;            // every listener's t_listen equals t_comm1
    // min true mean in the sent component minus max true mean outside it.
    double partition_gap = 0.0;
};

struct RunMetrics {
    std::uint64_t seed = 0;
    std::uint64_t replica = 0;
    std::uint64_t rounds_played = 0;
    std::vector<GridRow> grid;

    double cum_regret = 0.0;
    double collision_aware_regret = 0.0;
    std::uint64_t collisions = 0;
    std::array<double, 3> regret_by_phase{};
    std::array<std::uint64_t, 3> collisions_by_phase{};
    std::array<std::uint64_t, 3> rounds_by_phase{};

    bool good_event_held = true;
    std::uint64_t good_event_violation_round = 0;

    std::vector<ProtocolEvent> events;
    std::vector<EpisodeSummary> episodes;
    std::vector<CommEpisode> communications;
    int recursions = 0;  // by communicators
    bool any_failure = false;

    bool all_exploit = false;
    std::uint64_t exploit_entry_round = 0;
    double regret_at_exploit_entry = 0.0;
    std::vector<Phase> final_phases;
    std::vector<std::vector<int>> final_arms;

    std::uint64_t round_robin_collisions() const {
        return collisions_by_phase[static_cast<int>(PhaseTag::round_robin)];
    }
};

struct RegretDecomposition {
    double round_robin = 0.0;
    double collision = 0.0;
    double exploit = 0.0;
    double total() const { return round_robin + collision + exploit; }
};

RegretDecomposition regret_decomposition(const std::vector<RoundRecord>& records);
RegretDecomposition regret_decomposition(const RunMetrics& metrics);

// Regret of every player cycling over all K arms for T rounds.
double round_robin_baseline_regret(const BanditInstance& instance, int num_players, std::uint64_t horizon);

// Runs one replica of the protocol. Players get `params`; the instance is
// seen only by the environment and the diagnostics.
RunMetrics run(const SimConfig& config, const BanditInstance& instance, const ConfidenceParams& params,
               std::uint64_t seed, std::uint64_t replica = 0);

// Runs replicas 0..count-1 on up to `jobs` threads; results in replica order.
std::vector<RunMetrics> run_replicas(const SimConfig& config, const BanditInstance& instance,
                                     const ConfidenceParams& params, std::uint64_t seed, int count,
                                     int jobs = 1);

}  // namespace collidecomm
