#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "collidecomm/comm_protocol.hpp"
#include "collidecomm/connectivity.hpp"
#include "collidecomm/events.hpp"
#include "collidecomm/schedule_math.hpp"

// Player logic sees only its own rewards and the shared constants; nothing in
// here depends on the bandit instance.

namespace collidecomm {

enum class Phase {
    CollisionEstimate,
    Explore,
    FindPower,
    PreComm,
    Communicating,
    ListenProbe,
    Decoding,
    Exploit,
};

enum class Role { communicator, listener, exploiter };

std::string_view to_string(Phase phase);
std::string_view to_string(Role role);

// How a pull feeds the puller's estimators.
enum class PullKind : std::uint8_t { arm_sample, collision_sample, discard };

struct Pull {
    int arm = 0;  // global arm index
    PullKind kind = PullKind::arm_sample;
    // Deliberate collision traffic: signalling pulls and the extra rounds of
    // the collision-estimation cycle.
    bool signalling = false;
};

inline constexpr std::uint64_t kNever = std::numeric_limits<std::uint64_t>::max();

// Constants shared by every player of a replica.
struct ProtocolSetup {
    ConfidenceParams params;
    CollisionMode mode = CollisionMode::zero;
    double blowup = kDefaultBlowup;
    BoundaryThresholds thresholds;
    std::shared_ptr<TriggerSchedule> schedule;
    // Skip special rounds at which a trigger is provably impossible. Does not
    // change behaviour; off only for equivalence tests.
    bool skip_quiet_cycles = true;
};

ProtocolSetup make_setup(const ConfidenceParams& params, CollisionMode mode,
                         double blowup = kDefaultBlowup);

struct SubProblem {
    std::vector<int> arms;     // global arm indices, increasing; local label = position
    std::vector<int> members;  // global player indices, increasing; rank = position
    std::uint64_t origin = 0;  // global round after which the sub-problem starts
};

// Everything a player knew about one finished sub-problem, for diagnostics.
struct EpisodeSummary {
    int player = 0;
    Role role = Role::listener;
    bool collision_mode = false;
    std::vector<int> arms;
    std::vector<int> members;
    std::uint64_t origin = 0;        // start of the sub-problem
    std::uint64_t clock_origin = 0;  // start of the round counter the times below use
    std::uint64_t end_round = 0;

    std::uint64_t t_first = 0;
    std::uint64_t s_first = 0;
    std::uint64_t s_first_effective = 0;
    double ratio_at_first = 0.0;  // N / g(N) at t_first
    std::uint64_t t_comm = 0;
    std::uint64_t t_comm1 = 0;
    std::uint64_t t_listen = 0;
    int probes = 0;
    std::uint64_t block_len = 0;  // pulls per arm per block
    int signal_arm = -1;          // global, communicator only

    // Collision-estimation phase (collision mode only).
    std::uint64_t c_first_collision = 0;
    double collision_ratio_at_first = 0.0;
    std::uint64_t t_comm1_collision = 0;
    std::uint64_t t_listen_collision = 0;
    int collision_probes = 0;

    std::vector<Witness> witnesses;  // listener's snapshot, global arm ids
    double collision_estimate = 0.0;
    std::vector<int> top;            // sent or decoded component, global arms
    bool failed = false;
};

// Per-arm aggregated observations handed over by the batched engine. Indexed
// by global arm.
struct BatchObservation {
    std::vector<ArmStats> arm_samples;
    ArmStats collision_samples;
};

// Largest k such that consecutive empirical means at most `gap` apart stay
// within overlapping C-blowup intervals for every count in (n, n + k],
// whatever the next k samples of each arm are.
std::uint64_t quiet_cycles(double gap, std::uint64_t n, double blowup, const ConfidenceParams& params);

class Player {
public:
    Player(int id, std::shared_ptr<const ProtocolSetup> setup, SubProblem initial);

    int id() const { return id_; }
    Phase phase() const { return phase_; }
    Role role() const { return role_; }
    const SubProblem& sub_problem() const { return sub_; }
    std::uint64_t clock_origin() const { return clock_origin_; }
    // Bumped whenever the arm estimators restart.
    std::uint64_t epoch() const { return epoch_; }
    bool in_collision_estimate() const { return phase_ == Phase::CollisionEstimate; }

    // Arm choice for global round t; constant behaviour up to next_decision().
    Pull plan(std::uint64_t t) const;
    // plan(t + period()) == plan(t) for every t up to next_decision().
    std::uint64_t period() const;
    // Earliest global round after which the player may change its behaviour.
    std::uint64_t next_decision() const { return next_decision_; }

    void observe(std::uint64_t t, int arm, double reward);
    void observe_batch(const BatchObservation& obs);
    // Called after the observations for round t; runs the protocol logic
    // when t is a decision round.
    void end_round(std::uint64_t t, std::vector<ProtocolEvent>& events);

    const std::vector<ArmStats>& stats() const { return stats_; }
    const std::vector<EpisodeSummary>& episodes() const { return episodes_; }

private:
    enum class CeStage { explore, find_power, pre_comm, ping, probe };

    int k_local() const { return static_cast<int>(sub_.arms.size()); }
    int m_local() const { return static_cast<int>(sub_.members.size()); }
    std::uint64_t cycle_len() const;
    bool in_window() const;
    int rr_arm(std::uint64_t tau) const;

    void start_subproblem(SubProblem sub, std::uint64_t t, std::vector<ProtocolEvent>& events);
    void start_phase2(std::uint64_t t);
    void reset_estimators();
    void schedule_trigger(std::uint64_t from_cycle, std::uint64_t t, std::vector<ProtocolEvent>& events);

    void on_explore(std::uint64_t t, std::vector<ProtocolEvent>& events);
    void on_trigger(std::uint64_t t, std::vector<ProtocolEvent>& events);
    void start_probe(std::uint64_t t, std::vector<ProtocolEvent>& events);
    void on_block_end(std::uint64_t t, std::vector<ProtocolEvent>& events);
    void on_ce_check(std::uint64_t t, std::vector<ProtocolEvent>& events);
    void on_ce_trigger(std::uint64_t t, std::vector<ProtocolEvent>& events);
    void on_ce_window_end(std::uint64_t t, std::vector<ProtocolEvent>& events);
    void fail(std::uint64_t t, std::vector<ProtocolEvent>& events);
    void recurse(const std::vector<int>& top_local, std::uint64_t t, std::vector<ProtocolEvent>& events);

    void emit(std::vector<ProtocolEvent>& events, std::uint64_t t, EventType type, std::int64_t value) const;
    EpisodeSummary summary_base(std::uint64_t t) const;

    int id_;
    std::shared_ptr<const ProtocolSetup> setup_;
    SubProblem sub_;
    int rank_ = 0;
    Phase phase_ = Phase::Explore;
    Role role_ = Role::communicator;
    CeStage ce_stage_ = CeStage::explore;
    bool phase2_ = false;
    std::uint64_t clock_origin_ = 0;
    std::uint64_t epoch_ = 0;
    std::uint64_t next_decision_ = kNever;

    std::vector<ArmStats> stats_;
    ArmStats coll_stats_;
    std::vector<ArmStats> block_;

    // Protocol times in local rounds of the current clock.
    std::uint64_t t_first_ = 0;
    std::uint64_t s_first_ = 0;
    std::uint64_t s_first_eff_ = 0;
    double ratio_at_first_ = 0.0;
    std::uint64_t t_comm_ = 0;
    std::uint64_t t_comm1_ = 0;
    std::uint64_t t_listen_ = 0;
    int probes_ = 0;
    std::uint64_t block_len_ = 0;
    std::uint64_t comm_start_ = 0;
    std::size_t blocks_done_ = 0;
    int sigma_hat_ = -1;
    Message message_;
    std::vector<int> top_at_first_;
    std::vector<bool> decoded_;
    std::vector<Witness> witnesses_;

    // Collision-estimation results carried into the second phase.
    int sigma_coll_ = -1;
    std::uint64_t c_collision_test_ = 0;
    std::vector<Witness> saved_witnesses_;
    double saved_collision_estimate_ = 0.0;
    std::uint64_t c_first_coll_ = 0;
    double coll_ratio_at_first_ = 0.0;
    std::uint64_t t_comm1_coll_ = 0;
    std::uint64_t t_listen_coll_ = 0;
    int coll_probes_ = 0;

    std::vector<EpisodeSummary> episodes_;
};

}  // namespace collidecomm
