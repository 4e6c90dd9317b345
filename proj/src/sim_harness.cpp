#include "collidecomm/sim_harness.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace collidecomm {

Engine parse_engine(const std::string& name) {
    if (name == "lockstep") return Engine::lockstep;
    if (name == "batched") return Engine::batched;
    throw DomainError("unknown engine '" + name + "' (expected lockstep or batched)");
}

std::string_view to_string(Engine engine) {
    return engine == Engine::lockstep ? "lockstep" : "batched";
}

RegretDecomposition regret_decomposition(const std::vector<RoundRecord>& records) {
    RegretDecomposition out;
    for (const auto& r : records) {
        switch (r.phase) {
            case PhaseTag::round_robin: out.round_robin += r.instantaneous_regret; break;
            case PhaseTag::collision: out.collision += r.instantaneous_regret; break;
            case PhaseTag::exploit: out.exploit += r.instantaneous_regret; break;
        }
    }
    return out;
}

RegretDecomposition regret_decomposition(const RunMetrics& metrics) {
    return {metrics.regret_by_phase[0], metrics.regret_by_phase[1], metrics.regret_by_phase[2]};
}

double round_robin_baseline_regret(const BanditInstance& instance, int num_players, std::uint64_t horizon) {
    const auto& m = instance.means();
    const double avg = std::accumulate(m.begin(), m.end(), 0.0) / static_cast<double>(m.size());
    const double per_round = instance.top_sum(num_players) - num_players * avg;
    return static_cast<double>(horizon) * std::max(0.0, per_round);
}

namespace {

constexpr std::uint64_t kMaxPattern = 1 << 16;

int tag_index(PhaseTag tag) { return static_cast<int>(tag); }

std::string format_events(const std::vector<ProtocolEvent>& events) {
    std::string out;
    for (const auto& e : events) {
        if (!out.empty()) out += ';';
        out += 'p' + std::to_string(e.player) + ':' + std::string(to_string(e.type)) + '=' + std::to_string(e.value);
    }
    return out;
}

// Per-player tally of one pattern of rounds, bucketed by (arm, kind, collided).
struct Tally {
    std::vector<std::vector<std::uint64_t>> buckets;  // [player][arm * 6 + kind * 2 + collided]
    double regret = 0.0;
    double aware_regret = 0.0;
    std::array<double, 3> regret_by_tag{};
    std::array<std::uint64_t, 3> collisions_by_tag{};
    std::array<std::uint64_t, 3> rounds_by_tag{};

    Tally(int players, int arms) : buckets(static_cast<std::size_t>(players), std::vector<std::uint64_t>(static_cast<std::size_t>(arms) * 6, 0)) {}

    void add_scaled(const Tally& o, std::uint64_t times) {
        for (std::size_t p = 0; p < buckets.size(); ++p) {
            for (std::size_t b = 0; b < buckets[p].size(); ++b) buckets[p][b] += o.buckets[p][b] * times;
        }
        const auto f = static_cast<double>(times);
        regret += o.regret * f;
        aware_regret += o.aware_regret * f;
        for (int i = 0; i < 3; ++i) {
            regret_by_tag[i] += o.regret_by_tag[i] * f;
            collisions_by_tag[i] += o.collisions_by_tag[i] * times;
            rounds_by_tag[i] += o.rounds_by_tag[i] * times;
        }
    }
};

class Replica {
public:
    Replica(const SimConfig& config, const BanditInstance& instance, const ConfidenceParams& params,
            std::uint64_t seed, std::uint64_t replica)
        : config_(config),
          instance_(instance),
          params_(params),
          env_(instance, params.num_players(), make_replica_rng(seed, replica)),
          top_sum_(instance.top_sum(params.num_players())) {
        if (config.horizon == 0) throw DomainError("horizon must be positive");
        if (params.num_arms() != instance.num_arms()) {
            throw DomainError("confidence parameters and instance disagree on the number of arms");
        }
        if (params.num_players() > instance.num_arms()) throw DomainError("more players than arms");
        if (config.mode == CollisionMode::zero && instance.collision_mean() != 0.0) {
            throw DomainError("zero mode needs a collision mean of 0");
        }
        if (!(config.grid.ratio > 1.0)) throw DomainError("grid ratio must exceed 1");
        auto setup = std::make_shared<ProtocolSetup>(make_setup(params, config.mode, config.blowup));
        setup->skip_quiet_cycles = config.skip_quiet_cycles;
        const int m = params.num_players();
        const int k = params.num_arms();
        SubProblem all;
        all.arms.resize(static_cast<std::size_t>(k));
        std::iota(all.arms.begin(), all.arms.end(), 0);
        all.members.resize(static_cast<std::size_t>(m));
        std::iota(all.members.begin(), all.members.end(), 0);
        for (int p = 0; p < m; ++p) players_.emplace_back(p, setup, all);
        trackers_.assign(static_cast<std::size_t>(m), std::vector<ArmStats>(static_cast<std::size_t>(k)));
        epochs_.resize(static_cast<std::size_t>(m));
        for (int p = 0; p < m; ++p) epochs_[static_cast<std::size_t>(p)] = players_[static_cast<std::size_t>(p)].epoch();
        metrics_.seed = seed;
        metrics_.replica = replica;
        grid_next_ = 1;
        check_exploit_entry(0);
    }

    RunMetrics run() {
        if (config_.engine == Engine::lockstep) lockstep(); else batched();
        finish();
        return std::move(metrics_);
    }

private:
    int num_players() const { return static_cast<int>(players_.size()); }

    PhaseTag tag_for(const std::vector<Pull>& pulls) const {
        bool all_exploit = true;
        for (std::size_t p = 0; p < pulls.size(); ++p) {
            if (pulls[p].signalling) return PhaseTag::collision;
            all_exploit = all_exploit && players_[p].phase() == Phase::Exploit;
        }
        return all_exploit ? PhaseTag::exploit : PhaseTag::round_robin;
    }

    void check_tracker(int p, int arm, std::uint64_t t) {
        const ArmStats& s = trackers_[static_cast<std::size_t>(p)][static_cast<std::size_t>(arm)];
        if (s.count == 0 || !metrics_.good_event_held) return;
        if (std::abs(s.mean() - instance_.mean(arm)) > D(s.count, params_)) {
            metrics_.good_event_held = false;
            metrics_.good_event_violation_round = t;
        }
    }

    void check_exploit_entry(std::uint64_t t) {
        if (metrics_.all_exploit) return;
        for (const auto& pl : players_) {
            if (pl.phase() != Phase::Exploit) return;
        }
        metrics_.all_exploit = true;
        metrics_.exploit_entry_round = t;
        metrics_.regret_at_exploit_entry = metrics_.cum_regret;
    }

    // Runs every player's end-of-round logic for round t and the bookkeeping
    // that depends on it.
    std::vector<ProtocolEvent> decide(std::uint64_t t) {
        std::vector<ProtocolEvent> events;
        for (auto& pl : players_) {
            const Role before = pl.role();
            const std::size_t first = events.size();
            pl.end_round(t, events);
            for (std::size_t i = first; i < events.size(); ++i) {
                if (events[i].type == EventType::RECURSE && before == Role::communicator) ++metrics_.recursions;
                if (events[i].type == EventType::FAILURE) metrics_.any_failure = true;
            }
        }
        for (int p = 0; p < num_players(); ++p) {
            const auto e = players_[static_cast<std::size_t>(p)].epoch();
            if (e != epochs_[static_cast<std::size_t>(p)]) {
                epochs_[static_cast<std::size_t>(p)] = e;
                std::fill(trackers_[static_cast<std::size_t>(p)].begin(), trackers_[static_cast<std::size_t>(p)].end(), ArmStats{});
            }
        }
        metrics_.events.insert(metrics_.events.end(), events.begin(), events.end());
        if (config_.stop_after_recursions > 0 && metrics_.recursions >= config_.stop_after_recursions) stop_ = true;
        return events;
    }

    void advance_grid(std::uint64_t t) {
        while (grid_next_ <= t) {
            if (grid_next_ < config_.grid.dense_until) {
                ++grid_next_;
            } else {
                const auto next = static_cast<std::uint64_t>(std::ceil(static_cast<double>(grid_next_) * config_.grid.ratio));
                grid_next_ = std::max(grid_next_ + 1, next);
            }
        }
    }

    void end_of_round(std::uint64_t t, const std::vector<ProtocolEvent>& events, PhaseTag tag) {
        metrics_.rounds_played = t;
        check_exploit_entry(t);
        const bool last = t == config_.horizon || stop_;
        if (t == grid_next_ || !events.empty() || last) {
            metrics_.grid.push_back({t, metrics_.cum_regret, metrics_.collisions, tag, format_events(events)});
        }
        advance_grid(t);
    }

    void lockstep() {
        const int m = num_players();
        std::vector<Pull> pulls(static_cast<std::size_t>(m));
        std::vector<int> choices(static_cast<std::size_t>(m));
        for (std::uint64_t t = 1; t <= config_.horizon && !stop_; ++t) {
            for (int p = 0; p < m; ++p) {
                pulls[static_cast<std::size_t>(p)] = players_[static_cast<std::size_t>(p)].plan(t);
                choices[static_cast<std::size_t>(p)] = pulls[static_cast<std::size_t>(p)].arm;
            }
            RoundRecord rec = env_.resolve_round(t, choices);
            rec.phase = tag_for(pulls);
            for (int p = 0; p < m; ++p) {
                const auto sp = static_cast<std::size_t>(p);
                players_[sp].observe(t, choices[sp], rec.rewards[sp]);
                if (pulls[sp].kind == PullKind::arm_sample && !rec.collided[sp]) {
                    trackers_[sp][static_cast<std::size_t>(choices[sp])].add(rec.rewards[sp]);
                    check_tracker(p, choices[sp], t);
                }
            }
            std::uint64_t collided = 0;
            for (char c : rec.collided) collided += c ? 1 : 0;
            const int ti = tag_index(rec.phase);
            metrics_.cum_regret += rec.instantaneous_regret;
            metrics_.collision_aware_regret += rec.collision_aware_regret;
            metrics_.collisions += collided;
            metrics_.regret_by_phase[ti] += rec.instantaneous_regret;
            metrics_.collisions_by_phase[ti] += collided;
            metrics_.rounds_by_phase[ti] += 1;

            rec.events = decide(t);
            if (config_.record_sink) config_.record_sink(rec);
            end_of_round(t, rec.events, rec.phase);
        }
    }

    // Tallies rounds t0+1 .. t0+len, snapshotting the prefix of length
    // `prefix` into *head; returns the tag of the round t0+tag_at.
    PhaseTag tally_rounds(std::uint64_t t0, std::uint64_t len, std::uint64_t prefix, std::uint64_t tag_at,
                          Tally& full, Tally& head) {
        const int m = num_players();
        std::vector<Pull> pulls(static_cast<std::size_t>(m));
        std::vector<int> choices(static_cast<std::size_t>(m));
        const double coll_mean = instance_.collision_mean();
        PhaseTag tag_out = PhaseTag::round_robin;
        for (std::uint64_t i = 1; i <= len; ++i) {
            for (int p = 0; p < m; ++p) {
                pulls[static_cast<std::size_t>(p)] = players_[static_cast<std::size_t>(p)].plan(t0 + i);
                choices[static_cast<std::size_t>(p)] = pulls[static_cast<std::size_t>(p)].arm;
            }
            const auto collided = collision_flags(choices);
            const PhaseTag tag = tag_for(pulls);
            if (i == tag_at) tag_out = tag;
            const double pulled = instance_.sum_of_means(choices);
            double aware = 0.0;
            std::uint64_t ncoll = 0;
            for (int p = 0; p < m; ++p) {
                const auto sp = static_cast<std::size_t>(p);
                const double mu = instance_.mean(choices[sp]);
                aware += collided[sp] ? coll_mean : mu;
                ncoll += collided[sp] ? 1 : 0;
                const auto b = static_cast<std::size_t>(choices[sp]) * 6 +
                               static_cast<std::size_t>(pulls[sp].kind) * 2 + (collided[sp] ? 1 : 0);
                ++full.buckets[sp][b];
            }
            const int ti = tag_index(tag);
            full.regret += top_sum_ - pulled;
            full.aware_regret += top_sum_ - aware;
            full.regret_by_tag[ti] += top_sum_ - pulled;
            full.collisions_by_tag[ti] += ncoll;
            full.rounds_by_tag[ti] += 1;
            if (i == prefix) head = full;
        }
        return tag_out;
    }

    void batched() {
        const int m = num_players();
        const int k = instance_.num_arms();
        std::uint64_t t = 0;
        while (t < config_.horizon && !stop_) {
            std::uint64_t end = config_.horizon;
            for (const auto& pl : players_) end = std::min(end, pl.next_decision());
            end = std::min(end, grid_next_);
            if (config_.good_event_span_fraction > 0) end = std::min(end, t + t / config_.good_event_span_fraction + 1);
            std::uint64_t lcm = 1;
            for (const auto& pl : players_) {
                lcm = std::lcm(lcm, pl.period());
                if (lcm > kMaxPattern) break;
            }
            std::uint64_t span = end - t;
            if (lcm > kMaxPattern) {
                span = std::min<std::uint64_t>(span, kMaxPattern);
                end = t + span;
                lcm = span;
            }
            const std::uint64_t pattern = std::min(lcm, span);
            const std::uint64_t reps = span / pattern;
            const std::uint64_t rem = span % pattern;
            const std::uint64_t last_index = (span - 1) % pattern + 1;

            Tally one(m, k);
            Tally head(m, k);
            const PhaseTag last_tag = tally_rounds(t, pattern, rem, last_index, one, head);
            Tally total(m, k);
            total.add_scaled(one, reps);
            if (rem > 0) total.add_scaled(head, 1);

            for (int p = 0; p < m; ++p) {
                const auto sp = static_cast<std::size_t>(p);
                BatchObservation obs;
                obs.arm_samples.assign(static_cast<std::size_t>(k), ArmStats{});
                for (int a = 0; a < k; ++a) {
                    for (int coll = 0; coll < 2; ++coll) {
                        const auto base = static_cast<std::size_t>(a) * 6 + static_cast<std::size_t>(coll);
                        const std::uint64_t n_arm = total.buckets[sp][base + 2 * static_cast<int>(PullKind::arm_sample)];
                        if (n_arm > 0) {
                            const double s = env_.sample_sum(a, coll == 1, n_arm);
                            obs.arm_samples[static_cast<std::size_t>(a)].add(n_arm, s);
                            if (coll == 0) trackers_[sp][static_cast<std::size_t>(a)].add(n_arm, s);
                        }
                        const std::uint64_t n_coll =
                            total.buckets[sp][base + 2 * static_cast<int>(PullKind::collision_sample)];
                        if (n_coll > 0) obs.collision_samples.add(n_coll, env_.sample_sum(a, coll == 1, n_coll));
                    }
                }
                players_[sp].observe_batch(obs);
                for (int a = 0; a < k; ++a) {
                    if (obs.arm_samples[static_cast<std::size_t>(a)].count > 0) check_tracker(p, a, end);
                }
            }

            metrics_.cum_regret += total.regret;
            metrics_.collision_aware_regret += total.aware_regret;
            for (int i = 0; i < 3; ++i) {
                metrics_.regret_by_phase[i] += total.regret_by_tag[i];
                metrics_.collisions_by_phase[i] += total.collisions_by_tag[i];
                metrics_.rounds_by_phase[i] += total.rounds_by_tag[i];
                metrics_.collisions += total.collisions_by_tag[i];
            }
            t = end;
            const auto events = decide(t);
            end_of_round(t, events, last_tag);
        }
    }

    void finish() {
        for (const auto& pl : players_) {
            metrics_.episodes.insert(metrics_.episodes.end(), pl.episodes().begin(), pl.episodes().end());
            metrics_.final_phases.push_back(pl.phase());
            metrics_.final_arms.push_back(pl.sub_problem().arms);
        }
        std::stable_sort(metrics_.episodes.begin(), metrics_.episodes.end(),
                         [](const EpisodeSummary& a, const EpisodeSummary& b) {
                             if (a.end_round != b.end_round) return a.end_round < b.end_round;
                             return a.player < b.player;
                         });
        assemble_communications();
    }

    void assemble_communications() {
        using Key = std::pair<std::uint64_t, std::vector<int>>;
        std::map<Key, std::vector<const EpisodeSummary*>> by_key;
        for (const auto& e : metrics_.episodes) by_key[{e.origin, e.arms}].push_back(&e);
        for (const auto& [key, eps] : by_key) {
            const EpisodeSummary* comm = nullptr;
            for (const auto* e : eps) {
                if (e->role == Role::communicator && !e->failed) comm = e;
            }
            if (comm == nullptr) continue;
            CommEpisode ce;
            ce.origin = key.first;
            ce.end_round = comm->end_round;
            ce.arms = key.second;
            ce.members = comm->members;
            ce.communicator = *comm;
            ce.message_recovered = true;
            ce.aligned = true;
            for (std::size_t r = 1; r < comm->members.size(); ++r) {
                const int player = comm->members[r];
                const EpisodeSummary* final_ep = nullptr;
                for (const auto* e : eps) {
                    if (e->player != player) continue;
                    if (e->failed) ce.listener_failed = true;
                    final_ep = e;
                }
                if (final_ep == nullptr || final_ep->failed || final_ep->top != comm->top) {
                    ce.message_recovered = false;
                }
                if (final_ep == nullptr) {
                    ce.aligned = false;
                    continue;
                }
                ce.listeners.push_back(*final_ep);
                if (final_ep->t_listen != comm->t_comm1) ce.aligned = false;
                if (final_ep->collision_mode && final_ep->t_listen_collision != comm->t_comm1_collision) {
                    ce.aligned = false;
                }
            }
            if (ce.listener_failed) ce.message_recovered = false;
            double lo_top = 2.0;
            double hi_rest = -1.0;
            for (int a : ce.arms) {
                const bool in_top = std::find(comm->top.begin(), comm->top.end(), a) != comm->top.end();
                if (in_top) lo_top = std::min(lo_top, instance_.mean(a));
                else hi_rest = std::max(hi_rest, instance_.mean(a));
            }
            ce.partition_gap = lo_top - hi_rest;
            metrics_.communications.push_back(std::move(ce));
        }
        std::stable_sort(metrics_.communications.begin(), metrics_.communications.end(),
                         [](const CommEpisode& a, const CommEpisode& b) { return a.end_round < b.end_round; });
    }

    const SimConfig& config_;
    const BanditInstance& instance_;
    ConfidenceParams params_;
    Environment env_;
    double top_sum_;
    std::vector<Player> players_;
    std::vector<std::vector<ArmStats>> trackers_;
    std::vector<std::uint64_t> epochs_;
    RunMetrics metrics_;
    std::uint64_t grid_next_ = 1;
    bool stop_ = false;
};

}  // namespace

RunMetrics run(const SimConfig& config, const BanditInstance& instance, const ConfidenceParams& params,
               std::uint64_t seed, std::uint64_t replica) {
    Replica r(config, instance, params, seed, replica);
    return r.run();
}

std::vector<RunMetrics> run_replicas(const SimConfig& config, const BanditInstance& instance,
                                     const ConfidenceParams& params, std::uint64_t seed, int count, int jobs) {
    std::vector<RunMetrics> out(static_cast<std::size_t>(std::max(count, 0)));
    jobs = std::max(1, std::min(jobs, count));
    if (jobs == 1) {
        for (int i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = run(config, instance, params, seed, static_cast<std::uint64_t>(i));
        return out;
    }
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) {
        pool.emplace_back([&, j] {
            for (int i = j; i < count; i += jobs) {
                try {
                    out[static_cast<std::size_t>(i)] = run(config, instance, params, seed, static_cast<std::uint64_t>(i));
                } catch (...) {
                    errors[static_cast<std::size_t>(i)] = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

}  // namespace collidecomm
