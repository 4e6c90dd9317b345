#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "collidecomm/sim_harness.hpp"

// Parameterised property checks shared by the acceptance binary and the
// `verify` subcommand.

namespace collidecomm::checks {

struct CheckResult {
    std::string id;
    std::string title;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

std::string format(const CheckResult& r);

// A batch of seeded replicas of one experiment, kept together with
// everything needed to re-run any replica.
struct RunSet {
    std::string name;
    BanditInstance instance;
    ConfidenceParams params;
    SimConfig config;
    std::uint64_t seed = 0;
    std::vector<RunMetrics> runs;
    double seconds = 0.0;
};

RunSet make_run_set(std::string name, BanditInstance instance, ConfidenceParams params, SimConfig config,
                    std::uint64_t seed, int replicas, int jobs);

// Zero mode, K=5, M=3, means 0.9..0.3 in steps of 0.15, delta 0.02; each run
// stops at the first split.
RunSet message_recovery_runs(int replicas, std::uint64_t seed, int jobs);
// Collision mode, K=6, M=3, collision mean 0.1, delta 0.01.
RunSet plateau_runs(std::uint64_t horizon, int replicas, std::uint64_t seed, int jobs);
// Zero mode, K=3, M=2, delta 0.05, lock-step engine.
RunSet good_event_runs(int replicas, std::uint64_t horizon, std::uint64_t seed, int jobs);
// Zero mode, K=5, M=2 with uneven gaps, run until every player exploits.
RunSet uneven_gap_runs(int replicas, std::uint64_t seed, int jobs);

CheckResult check_encode_decode(int max_arms = 10);
CheckResult check_unique_power(int cases = 10000, std::uint64_t seed = 1);
CheckResult check_components(int cases = 1000, int max_arms = 12, std::uint64_t seed = 1);
CheckResult check_one_bit_recovery(int trials = 500, std::uint64_t seed = 1);
CheckResult check_message_recovery(const RunSet& set);
CheckResult check_sandwich(const RunSet& set);
CheckResult check_comm1_ratio(const RunSet& set);
CheckResult check_gap_ratio(const std::vector<const RunSet*>& sets);
CheckResult check_witness_interval(const std::vector<const RunSet*>& sets);
CheckResult check_regret_plateau(const RunSet& set);
CheckResult check_bernstein_coverage(int streams = 1000, std::uint64_t n_max = 10000, double delta_prime = 0.05,
                                     std::uint64_t seed = 1);
CheckResult check_good_event_frequency(const RunSet& set);
// Zero collisions in Round Robin rounds for every run, and bit-identical
// metrics when the first `reruns` replicas of each set are run again.
CheckResult check_rr_collisions_and_determinism(const std::vector<const RunSet*>& sets, int reruns);

// Everything observable about a run, rendered exactly (hex floats).
std::string fingerprint(const RunMetrics& m);

}  // namespace collidecomm::checks
