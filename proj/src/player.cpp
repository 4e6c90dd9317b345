#include "collidecomm/player.hpp"

#include <algorithm>
#include <string>

namespace collidecomm {

namespace {

constexpr double kSkipMargin = 1e-12;

double max_adjacent_gap(const std::vector<ArmStats>& stats) {
    std::vector<double> m;
    m.reserve(stats.size());
    for (const auto& s : stats) m.push_back(s.mean());
    std::sort(m.begin(), m.end());
    double gap = 0.0;
    for (std::size_t i = 0; i + 1 < m.size(); ++i) gap = std::max(gap, m[i + 1] - m[i]);
    return gap;
}

}  // namespace

std::string_view to_string(Phase phase) {
    switch (phase) {
        case Phase::CollisionEstimate: return "CollisionEstimate";
        case Phase::Explore: return "Explore";
        case Phase::FindPower: return "FindPower";
        case Phase::PreComm: return "PreComm";
        case Phase::Communicating: return "Communicating";
        case Phase::ListenProbe: return "ListenProbe";
        case Phase::Decoding: return "Decoding";
        case Phase::Exploit: return "Exploit";
    }
    return "?";
}

std::string_view to_string(Role role) {
    switch (role) {
        case Role::communicator: return "communicator";
        case Role::listener: return "listener";
        case Role::exploiter: return "exploiter";
    }
    return "?";
}

ProtocolSetup make_setup(const ConfidenceParams& params, CollisionMode mode, double blowup) {
    if (!(blowup >= 1.0)) throw DomainError("blowup constant must be at least 1");
    ProtocolSetup setup{params, mode, blowup, boundary_thresholds(params),
                        std::make_shared<TriggerSchedule>(params), true};
    return setup;
}

std::uint64_t quiet_cycles(double gap, std::uint64_t n, double blowup, const ConfidenceParams& params) {
    if (n == 0) return 0;
    // A mean moves by at most k/(n+k) after k more samples in [0,1], so a
    // sorted gap grows by at most twice that, while D(n+k) shrinks.
    auto stays_connected = [&](std::uint64_t k) {
        const double nk = static_cast<double>(n + k);
        return gap + 2.0 * static_cast<double>(k) / nk <= 2.0 * blowup * D(n + k, params) - kSkipMargin;
    };
    if (!stays_connected(1)) return 0;
    std::uint64_t lo = 1;
    std::uint64_t hi = 2;
    constexpr std::uint64_t kMax = 1ULL << 50;
    while (stays_connected(hi)) {
        lo = hi;
        hi *= 2;
        if (hi > kMax) return lo;
    }
    while (hi - lo > 1) {
        const std::uint64_t mid = lo + (hi - lo) / 2;
        if (stays_connected(mid)) lo = mid; else hi = mid;
    }
    return lo;
}

Player::Player(int id, std::shared_ptr<const ProtocolSetup> setup, SubProblem initial)
    : id_(id), setup_(std::move(setup)) {
    if (!setup_ || !setup_->schedule) throw ContractViolation("player needs a protocol setup");
    std::vector<ProtocolEvent> ignored;
    start_subproblem(std::move(initial), 0, ignored);
}

std::uint64_t Player::cycle_len() const {
    const auto k = static_cast<std::uint64_t>(k_local());
    return phase_ == Phase::CollisionEstimate ? k + static_cast<std::uint64_t>(m_local()) : k;
}

bool Player::in_window() const {
    return phase_ == Phase::ListenProbe || phase_ == Phase::Decoding ||
           (phase_ == Phase::CollisionEstimate && ce_stage_ == CeStage::probe);
}

int Player::rr_arm(std::uint64_t tau) const {
    const auto k = static_cast<std::uint64_t>(k_local());
    return static_cast<int>((static_cast<std::uint64_t>(rank_) + tau - 1) % k);
}

Pull Player::plan(std::uint64_t t) const {
    if (t <= clock_origin_) throw ContractViolation("plan for a round before the player's clock origin");
    const std::uint64_t tau = t - clock_origin_;
    const auto k = static_cast<std::uint64_t>(k_local());
    switch (phase_) {
        case Phase::Exploit:
            return {sub_.arms[rr_arm(tau)], PullKind::discard, false};
        case Phase::CollisionEstimate: {
            if (ce_stage_ == CeStage::ping) return {sub_.arms[sigma_coll_], PullKind::discard, true};
            const std::uint64_t q = (tau - 1) % cycle_len();
            if (q < k) return {sub_.arms[(static_cast<std::uint64_t>(rank_) + q) % k], PullKind::arm_sample, false};
            const std::uint64_t j = q - k;
            const auto last = static_cast<std::uint64_t>(m_local() - 1);
            if (rank_ == 0) {
                return {sub_.arms[last], j == 0 ? PullKind::collision_sample : PullKind::discard, true};
            }
            const std::uint64_t r = static_cast<std::uint64_t>(rank_);
            return {sub_.arms[(r + j) % k], j == last - r ? PullKind::collision_sample : PullKind::discard, true};
        }
        case Phase::Communicating: {
            const std::uint64_t j = (tau - comm_start_ - 1) / (k * block_len_) + 1;
            const bool on = j == 1 || message_.bits[j - 2];
            if (on) return {sub_.arms[sigma_hat_], PullKind::discard, true};
            return {sub_.arms[rr_arm(tau)], PullKind::arm_sample, false};
        }
        default:
            return {sub_.arms[rr_arm(tau)], PullKind::arm_sample, false};
    }
}

std::uint64_t Player::period() const {
    switch (phase_) {
        case Phase::CollisionEstimate:
            return ce_stage_ == CeStage::ping ? 1 : cycle_len();
        case Phase::Communicating: {
            const std::size_t j = blocks_done_ + 1;
            const bool on = j == 1 || message_.bits[j - 2];
            return on ? 1 : cycle_len();
        }
        default:
            return cycle_len();
    }
}

void Player::observe(std::uint64_t t, int arm, double reward) {
    const Pull p = plan(t);
    if (p.arm != arm) {
        throw ContractViolation("player " + std::to_string(id_) + " observed arm " + std::to_string(arm) +
                                " but chose " + std::to_string(p.arm) + " in round " + std::to_string(t));
    }
    if (p.kind == PullKind::arm_sample) {
        const auto it = std::lower_bound(sub_.arms.begin(), sub_.arms.end(), arm);
        const auto local = static_cast<std::size_t>(it - sub_.arms.begin());
        stats_[local].add(reward);
        if (in_window()) block_[local].add(reward);
    } else if (p.kind == PullKind::collision_sample) {
        coll_stats_.add(reward);
    }
}

void Player::observe_batch(const BatchObservation& obs) {
    const bool window = in_window();
    for (std::size_t a = 0; a < sub_.arms.size(); ++a) {
        const ArmStats& s = obs.arm_samples[static_cast<std::size_t>(sub_.arms[a])];
        if (s.count == 0) continue;
        stats_[a].add(s.count, s.sum);
        if (window) block_[a].add(s.count, s.sum);
    }
    if (obs.collision_samples.count > 0) coll_stats_.add(obs.collision_samples.count, obs.collision_samples.sum);
}

void Player::emit(std::vector<ProtocolEvent>& events, std::uint64_t t, EventType type, std::int64_t value) const {
    events.push_back({t, id_, type, value});
}

void Player::reset_estimators() {
    stats_.assign(sub_.arms.size(), ArmStats{});
    block_.assign(sub_.arms.size(), ArmStats{});
    coll_stats_ = {};
    ++epoch_;
}

void Player::start_subproblem(SubProblem sub, std::uint64_t t, std::vector<ProtocolEvent>& events) {
    sub_ = std::move(sub);
    rank_ = static_cast<int>(std::find(sub_.members.begin(), sub_.members.end(), id_) - sub_.members.begin());
    if (rank_ >= m_local()) throw ContractViolation("player is not a member of its sub-problem");
    if (m_local() > k_local()) throw ContractViolation("sub-problem has more players than arms");
    clock_origin_ = sub_.origin;
    phase2_ = false;
    t_first_ = s_first_ = s_first_eff_ = t_comm_ = t_comm1_ = t_listen_ = 0;
    ratio_at_first_ = 0.0;
    probes_ = 0;
    block_len_ = comm_start_ = 0;
    blocks_done_ = 0;
    sigma_hat_ = sigma_coll_ = -1;
    message_ = {};
    top_at_first_.clear();
    decoded_.clear();
    witnesses_.clear();
    saved_witnesses_.clear();
    saved_collision_estimate_ = 0.0;
    c_collision_test_ = c_first_coll_ = t_comm1_coll_ = t_listen_coll_ = 0;
    coll_ratio_at_first_ = 0.0;
    coll_probes_ = 0;
    reset_estimators();

    if (k_local() == m_local()) {
        phase_ = Phase::Exploit;
        role_ = Role::exploiter;
        next_decision_ = kNever;
        emit(events, t, EventType::EXPLOIT, k_local());
        return;
    }
    role_ = rank_ == 0 ? Role::communicator : Role::listener;
    if (setup_->mode == CollisionMode::collision && m_local() >= 2) {
        phase_ = Phase::CollisionEstimate;
        ce_stage_ = CeStage::explore;
    } else {
        phase_ = Phase::Explore;
    }
    next_decision_ = clock_origin_ + cycle_len();
}

void Player::start_phase2(std::uint64_t t) {
    phase2_ = true;
    clock_origin_ = t;
    reset_estimators();
    phase_ = Phase::Explore;
    t_first_ = s_first_ = s_first_eff_ = t_comm_ = t_comm1_ = t_listen_ = 0;
    probes_ = 0;
    witnesses_.clear();
    next_decision_ = clock_origin_ + cycle_len();
}

void Player::end_round(std::uint64_t t, std::vector<ProtocolEvent>& events) {
    if (t != next_decision_) return;
    switch (phase_) {
        case Phase::Explore: on_explore(t, events); break;
        case Phase::FindPower:
        case Phase::PreComm: on_trigger(t, events); break;
        case Phase::Communicating:
        case Phase::ListenProbe:
        case Phase::Decoding: on_block_end(t, events); break;
        case Phase::CollisionEstimate:
            switch (ce_stage_) {
                case CeStage::explore: on_ce_check(t, events); break;
                case CeStage::find_power:
                case CeStage::pre_comm: on_ce_trigger(t, events); break;
                case CeStage::ping:
                case CeStage::probe: on_ce_window_end(t, events); break;
            }
            break;
        case Phase::Exploit: break;
    }
}

void Player::schedule_trigger(std::uint64_t from_cycle, std::uint64_t t, std::vector<ProtocolEvent>& events) {
    const std::uint64_t c = setup_->schedule->next_at_or_after(std::max<std::uint64_t>(from_cycle, 1));
    next_decision_ = clock_origin_ + cycle_len() * c;
    if (next_decision_ == t) end_round(t, events);
}

void Player::on_explore(std::uint64_t t, std::vector<ProtocolEvent>& events) {
    const std::uint64_t tau = t - clock_origin_;
    const auto k = static_cast<std::uint64_t>(k_local());
    const std::uint64_t s = tau / k;
    const ConfidenceParams& params = setup_->params;
    const ConnectivityGraph graph = build_graph(stats_, setup_->blowup, params);
    if (conn_count(graph) < 2) {
        const std::uint64_t n = stats_[0].count;
        const std::uint64_t skip =
            setup_->skip_quiet_cycles ? quiet_cycles(max_adjacent_gap(stats_), n, setup_->blowup, params) : 0;
        next_decision_ = clock_origin_ + k * (s + skip + 1);
        return;
    }
    t_first_ = tau;
    s_first_ = s;
    const std::uint64_t n = stats_[0].count;
    ratio_at_first_ = static_cast<double>(n) / g(n, params);
    top_at_first_ = graph.components.front();
    emit(events, t, EventType::TFIRST, static_cast<std::int64_t>(s));
    if (m_local() == 1) {
        recurse(top_at_first_, t, events);
        return;
    }
    if (role_ == Role::communicator) message_ = encode(top_at_first_, k_local());
    const std::uint64_t s_boundary =
        setup_->thresholds.t_first_boundary / static_cast<std::uint64_t>(params.num_arms());
    s_first_eff_ = std::max(s, s_boundary);
    phase_ = Phase::FindPower;
    schedule_trigger(s_first_eff_, t, events);
}

void Player::on_trigger(std::uint64_t t, std::vector<ProtocolEvent>& events) {
    const std::uint64_t tau = t - clock_origin_;
    const auto k = static_cast<std::uint64_t>(k_local());
    const std::uint64_t s = tau / k;
    if (phase_ == Phase::FindPower) {
        if (role_ != Role::communicator) {
            start_probe(t, events);
            return;
        }
        t_comm_ = tau;
        emit(events, t, EventType::TCOMM, static_cast<std::int64_t>(s));
        phase_ = Phase::PreComm;
        schedule_trigger(s + 1, t, events);
        return;
    }
    t_comm1_ = tau;
    emit(events, t, EventType::TCOMM1, static_cast<std::int64_t>(s));
    sigma_hat_ = phase2_ ? sigma_coll_ : signal_arm(stats_, setup_->params);
    block_len_ = phase2_ ? c_collision_test_ : comm_length_for_cycles(s, setup_->params);
    comm_start_ = tau;
    blocks_done_ = 0;
    phase_ = Phase::Communicating;
    next_decision_ = t + k * block_len_;
}

void Player::start_probe(std::uint64_t t, std::vector<ProtocolEvent>& events) {
    const std::uint64_t tau = t - clock_origin_;
    const auto k = static_cast<std::uint64_t>(k_local());
    const std::uint64_t s = tau / k;
    t_listen_ = tau;
    ++probes_;
    emit(events, t, EventType::TLISTEN, static_cast<std::int64_t>(s));
    if (phase2_) {
        witnesses_ = saved_witnesses_;
        block_len_ = c_collision_test_;
    } else {
        const auto arms = max_arms(stats_, CollisionMode::zero);
        witnesses_ = make_witnesses(stats_, arms, CollisionMode::zero, std::nullopt, setup_->params, tau);
        block_len_ = comm_length_for_cycles(s, setup_->params);
    }
    block_.assign(sub_.arms.size(), ArmStats{});
    phase_ = Phase::ListenProbe;
    next_decision_ = t + k * block_len_;
}

void Player::on_block_end(std::uint64_t t, std::vector<ProtocolEvent>& events) {
    const auto k = static_cast<std::uint64_t>(k_local());
    if (phase_ == Phase::Communicating) {
        ++blocks_done_;
        const bool bit = blocks_done_ == 1 || message_.bits[blocks_done_ - 2];
        emit(events, t, EventType::BIT_SENT, bit ? 1 : 0);
        if (blocks_done_ == sub_.arms.size() + 1) {
            recurse(decode(message_), t, events);
        } else {
            next_decision_ = t + k * block_len_;
        }
        return;
    }

    int bit = 0;
    try {
        bit = bit_test(witnesses_, block_);
    } catch (const ContractViolation&) {
        fail(t, events);
        return;
    }
    block_.assign(sub_.arms.size(), ArmStats{});

    if (phase_ == Phase::ListenProbe) {
        emit(events, t, EventType::PROBE, bit);
        if (bit == 1) {
            phase_ = Phase::Decoding;
            decoded_.clear();
            next_decision_ = t + k * block_len_;
        } else {
            phase_ = Phase::FindPower;
            schedule_trigger((t - clock_origin_) / k, t, events);
        }
        return;
    }

    emit(events, t, EventType::BIT_DECODED, bit);
    decoded_.push_back(bit == 1);
    if (decoded_.size() < sub_.arms.size()) {
        next_decision_ = t + k * block_len_;
        return;
    }
    const Message msg{decoded_};
    if (is_malformed(msg)) {
        fail(t, events);
        return;
    }
    recurse(decode(msg), t, events);
}

void Player::on_ce_check(std::uint64_t t, std::vector<ProtocolEvent>& events) {
    const std::uint64_t tau = t - clock_origin_;
    const std::uint64_t c = tau / cycle_len();
    const ConfidenceParams& params = setup_->params;
    const std::uint64_t n = stats_[0].count;
    const int sigma = signal_arm(stats_, params);
    const double top = stats_[sigma].mean();
    const double coll = coll_stats_.mean();
    const double w = setup_->blowup * D(n, params);
    if (!(top - w > coll + w)) {
        const std::uint64_t skip = setup_->skip_quiet_cycles ? quiet_cycles(top - coll, n, setup_->blowup, params) : 0;
        next_decision_ = clock_origin_ + cycle_len() * (c + skip + 1);
        return;
    }
    c_first_coll_ = c;
    coll_ratio_at_first_ = static_cast<double>(n) / g(n, params);
    sigma_coll_ = sigma;
    emit(events, t, EventType::TFIRST, static_cast<std::int64_t>(c));
    ce_stage_ = CeStage::find_power;
    const std::uint64_t s_boundary =
        setup_->thresholds.t_first_boundary / static_cast<std::uint64_t>(params.num_arms());
    schedule_trigger(std::max(c, s_boundary), t, events);
}

void Player::on_ce_trigger(std::uint64_t t, std::vector<ProtocolEvent>& events) {
    const std::uint64_t tau = t - clock_origin_;
    const std::uint64_t c = tau / cycle_len();
    if (ce_stage_ == CeStage::find_power) {
        if (role_ == Role::communicator) {
            emit(events, t, EventType::TCOMM, static_cast<std::int64_t>(c));
            ce_stage_ = CeStage::pre_comm;
            schedule_trigger(c + 1, t, events);
            return;
        }
        t_listen_coll_ = tau;
        ++coll_probes_;
        emit(events, t, EventType::TLISTEN, static_cast<std::int64_t>(c));
        const double coll = coll_stats_.mean();
        const auto arms = max_arms(stats_, CollisionMode::collision, coll);
        witnesses_ = make_witnesses(stats_, arms, CollisionMode::collision, coll, setup_->params, tau);
        block_.assign(sub_.arms.size(), ArmStats{});
        ce_stage_ = CeStage::probe;
        next_decision_ = clock_origin_ + 2 * tau;
        return;
    }
    t_comm1_coll_ = tau;
    emit(events, t, EventType::TCOMM1, static_cast<std::int64_t>(c));
    ce_stage_ = CeStage::ping;
    next_decision_ = clock_origin_ + 2 * tau;
}

void Player::on_ce_window_end(std::uint64_t t, std::vector<ProtocolEvent>& events) {
    const std::uint64_t tau = t - clock_origin_;
    if (ce_stage_ == CeStage::ping) {
        emit(events, t, EventType::BIT_SENT, 1);
        c_collision_test_ = t_comm1_coll_ / cycle_len();
        start_phase2(t);
        return;
    }
    int bit = 0;
    try {
        bit = bit_test(witnesses_, block_);
    } catch (const ContractViolation&) {
        fail(t, events);
        return;
    }
    emit(events, t, EventType::PROBE, bit);
    if (bit == 1) {
        c_collision_test_ = t_listen_coll_ / cycle_len();
        saved_witnesses_ = witnesses_;
        saved_collision_estimate_ = coll_stats_.mean();
        start_phase2(t);
        return;
    }
    ce_stage_ = CeStage::find_power;
    schedule_trigger(tau / cycle_len(), t, events);
}

EpisodeSummary Player::summary_base(std::uint64_t t) const {
    EpisodeSummary es;
    es.player = id_;
    es.role = role_;
    es.collision_mode = setup_->mode == CollisionMode::collision;
    es.arms = sub_.arms;
    es.members = sub_.members;
    es.origin = sub_.origin;
    es.clock_origin = clock_origin_;
    es.end_round = t;
    es.t_first = t_first_;
    es.s_first = s_first_;
    es.s_first_effective = s_first_eff_;
    es.ratio_at_first = ratio_at_first_;
    es.t_comm = t_comm_;
    es.t_comm1 = t_comm1_;
    es.t_listen = t_listen_;
    es.probes = probes_;
    es.block_len = block_len_;
    es.signal_arm = sigma_hat_ >= 0 ? sub_.arms[sigma_hat_] : -1;
    es.c_first_collision = c_first_coll_;
    es.collision_ratio_at_first = coll_ratio_at_first_;
    es.t_comm1_collision = t_comm1_coll_;
    es.t_listen_collision = t_listen_coll_;
    es.collision_probes = coll_probes_;
    es.collision_estimate = saved_collision_estimate_;
    for (Witness w : witnesses_) {
        w.arm = sub_.arms[w.arm];
        es.witnesses.push_back(w);
    }
    return es;
}

void Player::fail(std::uint64_t t, std::vector<ProtocolEvent>& events) {
    emit(events, t, EventType::FAILURE, 0);
    EpisodeSummary es = summary_base(t);
    es.failed = true;
    episodes_.push_back(std::move(es));

    // Resume exploring the same sub-problem with the current estimators.
    const std::uint64_t tau = t - clock_origin_;
    const std::uint64_t len = cycle_len();
    if (phase_ == Phase::CollisionEstimate) {
        ce_stage_ = CeStage::explore;
    } else {
        phase_ = Phase::Explore;
    }
    witnesses_.clear();
    decoded_.clear();
    next_decision_ = clock_origin_ + len * (tau / len + 1);
}

void Player::recurse(const std::vector<int>& top_local, std::uint64_t t, std::vector<ProtocolEvent>& events) {
    EpisodeSummary es = summary_base(t);
    std::vector<int> top;
    std::vector<int> rest;
    std::vector<char> in_top(sub_.arms.size(), 0);
    for (int a : top_local) in_top[static_cast<std::size_t>(a)] = 1;
    for (std::size_t a = 0; a < sub_.arms.size(); ++a) (in_top[a] ? top : rest).push_back(sub_.arms[a]);
    es.top = top;
    episodes_.push_back(std::move(es));
    emit(events, t, EventType::RECURSE, static_cast<std::int64_t>(top.size()));

    const std::size_t c = top.size();
    const std::size_t m = sub_.members.size();
    if (c >= m) {
        start_subproblem({top, sub_.members, t}, t, events);
    } else if (static_cast<std::size_t>(rank_) < c) {
        start_subproblem({top, {sub_.members.begin(), sub_.members.begin() + static_cast<long>(c)}, t}, t, events);
    } else {
        start_subproblem({rest, {sub_.members.begin() + static_cast<long>(c), sub_.members.end()}, t}, t, events);
    }
}

}  // namespace collidecomm
