#include "collidecomm/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "collidecomm/comm_protocol.hpp"
#include "collidecomm/connectivity.hpp"
#include "collidecomm/oracle_testkit.hpp"
#include "collidecomm/schedule_math.hpp"

namespace collidecomm::checks {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

std::string hex(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

const CommEpisode* first_communication(const RunMetrics& m) {
    for (const auto& c : m.communications) {
        if (c.origin == 0) return &c;
    }
    return nullptr;
}

}  // namespace

std::string format(const CheckResult& r) {
    std::ostringstream os;
    os << (r.passed ? "PASS " : "FAIL ") << r.id << " " << r.title << ": " << r.detail << " ("
       << fmt("%.2f", r.seconds) << " s)";
    return os.str();
}

RunSet make_run_set(std::string name, BanditInstance instance, ConfidenceParams params, SimConfig config,
                    std::uint64_t seed, int replicas, int jobs) {
    RunSet set{std::move(name), std::move(instance), params, std::move(config), seed, {}, 0.0};
    const auto t0 = Clock::now();
    set.runs = run_replicas(set.config, set.instance, set.params, seed, replicas, jobs);
    set.seconds = since(t0);
    return set;
}

RunSet message_recovery_runs(int replicas, std::uint64_t seed, int jobs) {
    SimConfig cfg;
    cfg.mode = CollisionMode::zero;
    cfg.horizon = 100000000000ULL;
    cfg.stop_after_recursions = 1;
    return make_run_set("message-recovery", BanditInstance({0.9, 0.75, 0.6, 0.45, 0.3}, 0.0),
                        ConfidenceParams(3, 5, 0.02, true), cfg, seed, replicas, jobs);
}

RunSet plateau_runs(std::uint64_t horizon, int replicas, std::uint64_t seed, int jobs) {
    SimConfig cfg;
    cfg.mode = CollisionMode::collision;
    cfg.horizon = horizon;
    return make_run_set("plateau", BanditInstance({0.9, 0.8, 0.7, 0.5, 0.4, 0.3}, 0.1),
                        ConfidenceParams(3, 6, 0.01, true), cfg, seed, replicas, jobs);
}

RunSet good_event_runs(int replicas, std::uint64_t horizon, std::uint64_t seed, int jobs) {
    SimConfig cfg;
    cfg.mode = CollisionMode::zero;
    cfg.engine = Engine::lockstep;
    cfg.horizon = horizon;
    return make_run_set("good-event", BanditInstance({0.9, 0.5, 0.2}, 0.0), ConfidenceParams(2, 3, 0.05, true),
                        cfg, seed, replicas, jobs);
}

RunSet uneven_gap_runs(int replicas, std::uint64_t seed, int jobs) {
    SimConfig cfg;
    cfg.mode = CollisionMode::zero;
    cfg.horizon = 100000000000ULL;
    return make_run_set("uneven-gaps", BanditInstance({0.9, 0.85, 0.55, 0.45, 0.1}, 0.0),
                        ConfidenceParams(2, 5, 0.01, true), cfg, seed, replicas, jobs);
}

CheckResult check_encode_decode(int max_arms) {
    const auto t0 = Clock::now();
    CheckResult r{"C1", "encode/decode exhaustive round trip", true, "", 0.0};
    std::uint64_t subsets = 0;
    std::uint64_t bad = 0;
    for (int k = 2; k <= max_arms; ++k) {
        for (std::uint32_t mask = 1; mask + 1 < (1u << k); ++mask) {
            std::vector<int> comp;
            for (int a = 0; a < k; ++a) {
                if (mask & (1u << a)) comp.push_back(a);
            }
            const Message msg = encode(comp, k);
            // Noiseless channel: an ON block zeroes the signalling arm for the
            // listener, an OFF block leaves its mean intact.
            std::vector<Witness> witnesses{{0, 0.4, 0}};
            std::vector<bool> received;
            for (bool bit : msg.bits) {
                std::vector<ArmStats> block(static_cast<std::size_t>(k));
                for (auto& b : block) b.add(10, bit ? 0.0 : 8.0);
                received.push_back(bit_test(witnesses, block) == 1);
            }
            const Message got{received};
            ++subsets;
            if (is_malformed(got) || decode(got) != comp) ++bad;
        }
    }
    r.passed = bad == 0;
    r.detail = std::to_string(subsets - bad) + "/" + std::to_string(subsets) + " subsets recovered for arm counts 2.." +
               std::to_string(max_arms);
    r.seconds = since(t0);
    return r;
}

CheckResult check_unique_power(int cases, std::uint64_t seed) {
    const auto t0 = Clock::now();
    CheckResult r{"C2", "unique power in [x, base*x)", true, "", 0.0};
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> log_x(std::log(1e-3), std::log(1e9));
    std::uniform_int_distribution<int> base_dist(2, 20);
    int ok = 0;
    std::string first_bad;
    for (int i = 0; i < cases; ++i) {
        const double x = std::exp(log_x(rng));
        const int base = base_dist(rng);
        try {
            const int expected = oracle::power_oracle(x, base);
            if (unique_power_in_interval(x, base) == expected) {
                ++ok;
            } else if (first_bad.empty()) {
                first_bad = "x=" + fmt("%.17g", x) + " base=" + std::to_string(base);
            }
        } catch (const oracle::OracleFailure& e) {
            if (first_bad.empty()) first_bad = e.what();
        }
    }
    r.passed = ok == cases;
    r.detail = std::to_string(ok) + "/" + std::to_string(cases) + " cases with exactly one matching power" +
               (first_bad.empty() ? "" : "; first mismatch " + first_bad);
    r.seconds = since(t0);
    return r;
}

CheckResult check_components(int cases, int max_arms, std::uint64_t seed) {
    const auto t0 = Clock::now();
    CheckResult r{"C3", "connectivity matches union-find oracle", true, "", 0.0};
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> k_dist(1, max_arms);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int ok = 0;
    for (int i = 0; i < cases; ++i) {
        const int k = k_dist(rng);
        std::vector<std::vector<int>> got;
        std::vector<std::pair<double, double>> raw;
        if (i % 2 == 0) {
            // Free-form symmetric intervals.
            std::vector<double> centers;
            std::vector<Interval> intervals;
            for (int a = 0; a < k; ++a) {
                const double c = unit(rng);
                const double w = 0.15 * unit(rng);
                centers.push_back(c);
                intervals.push_back({c - w, c + w});
                raw.emplace_back(c - w, c + w);
            }
            got = interval_components(centers, intervals);
        } else {
            // Confidence intervals from equal-count empirical means.
            const int k2 = std::max(2, k);
            const ConfidenceParams params(1, k2, 0.01, true);
            const auto n = static_cast<std::uint64_t>(std::exp(std::log(1e3) + unit(rng) * std::log(1e4)));
            std::vector<ArmStats> stats(static_cast<std::size_t>(k2));
            for (auto& s : stats) s.add(n, std::floor(unit(rng) * static_cast<double>(n)));
            const auto graph = build_graph(stats, kDefaultBlowup, params);
            for (const auto& iv : graph.intervals) raw.emplace_back(iv.lo, iv.hi);
            got = graph.components;
        }
        if (got == oracle::components_oracle(raw)) ++ok;
    }
    r.passed = ok == cases;
    r.detail = std::to_string(ok) + "/" + std::to_string(cases) + " random interval sets identical (K <= " +
               std::to_string(max_arms) + ")";
    r.seconds = since(t0);
    return r;
}

CheckResult check_one_bit_recovery(int trials, std::uint64_t seed) {
    const auto t0 = Clock::now();
    CheckResult r{"C4", "one-bit recovery", true, "", 0.0};
    const BanditInstance inst({0.9, 0.6, 0.4, 0.2}, 0.0);
    const ConfidenceParams params(2, 4, 0.02, true);
    const int k = inst.num_arms();
    const double top = inst.mean(inst.order()[0]);

    // First cycle at or past the boundary guard with N/g(N) >= 128/mu_top^2.
    const auto thresholds = boundary_thresholds(params);
    std::uint64_t s0 = std::max<std::uint64_t>(1, thresholds.t_first_boundary / static_cast<std::uint64_t>(k));
    while (static_cast<double>(s0) / g(s0, params) < 128.0 / (top * top)) ++s0;
    const std::uint64_t len = comm_length_for_cycles(s0, params);

    int recovered = 0;
    for (int trial = 0; trial < trials; ++trial) {
        Environment env(inst, 2, make_replica_rng(seed, static_cast<std::uint64_t>(trial)));
        std::vector<ArmStats> speaker(static_cast<std::size_t>(k));
        std::vector<ArmStats> listener(static_cast<std::size_t>(k));
        for (int a = 0; a < k; ++a) {
            speaker[static_cast<std::size_t>(a)].add(s0, env.sample_sum(a, false, s0));
            listener[static_cast<std::size_t>(a)].add(s0, env.sample_sum(a, false, s0));
        }
        const int sig = signal_arm(speaker, params);
        const auto witnesses = make_witnesses(listener, max_arms(listener, CollisionMode::zero), CollisionMode::zero,
                                              std::nullopt, params, static_cast<std::uint64_t>(k) * s0);
        const int bit = trial % 2;
        std::vector<ArmStats> block(static_cast<std::size_t>(k));
        for (int a = 0; a < k; ++a) {
            const bool hit = bit == 1 && a == sig;
            block[static_cast<std::size_t>(a)].add(len, env.sample_sum(a, hit, len));
        }
        if (bit_test(witnesses, block) == bit) ++recovered;
    }
    const double rate = static_cast<double>(recovered) / trials;
    r.passed = rate >= 0.98;
    r.detail = "rate " + fmt("%.4f", rate) + " over " + std::to_string(trials) + " trials at t_start=" +
               std::to_string(static_cast<std::uint64_t>(k) * s0) + ", block " + std::to_string(len) +
               " pulls per arm (need >= 0.98)";
    r.seconds = since(t0);
    return r;
}

CheckResult check_message_recovery(const RunSet& set) {
    CheckResult r{"C5", "message recovery", true, "", set.seconds};
    int ok = 0;
    int decoded = 0;
    for (const auto& m : set.runs) {
        const CommEpisode* c = first_communication(m);
        if (c == nullptr) continue;
        decoded += c->message_recovered ? 1 : 0;
        ok += (c->message_recovered && c->aligned) ? 1 : 0;
    }
    const double rate = set.runs.empty() ? 0.0 : static_cast<double>(ok) / static_cast<double>(set.runs.size());
    r.passed = rate >= 0.97;
    r.detail = std::to_string(ok) + "/" + std::to_string(set.runs.size()) +
               " runs decoded exactly with t_listen = t_comm1 (" + std::to_string(decoded) +
               " decoded exactly; need >= 97%)";
    return r;
}

CheckResult check_sandwich(const RunSet& set) {
    const auto t0 = Clock::now();
    CheckResult r{"C6", "first-split sandwich", true, "", 0.0};
    std::vector<int> all(static_cast<std::size_t>(set.instance.num_arms()));
    for (int a = 0; a < set.instance.num_arms(); ++a) all[static_cast<std::size_t>(a)] = a;
    const double gap = set.instance.max_consecutive_gap(all);
    const double lo = 128.0 / (gap * gap);
    const double hi = 1152.0 / (gap * gap);
    int runs = 0;
    int bad = 0;
    double min_scaled = 1e300;
    double max_scaled = 0.0;
    for (const auto& m : set.runs) {
        const CommEpisode* c = first_communication(m);
        if (!m.good_event_held || c == nullptr) continue;
        ++runs;
        bool ok = true;
        std::vector<const EpisodeSummary*> eps{&c->communicator};
        for (const auto& l : c->listeners) eps.push_back(&l);
        if (eps.size() != c->members.size()) ok = false;
        for (const auto* e : eps) {
            const double v = e->ratio_at_first;
            min_scaled = std::min(min_scaled, v * gap * gap);
            max_scaled = std::max(max_scaled, v * gap * gap);
            if (!(v >= lo && v < hi)) ok = false;
        }
        bad += ok ? 0 : 1;
    }
    r.passed = runs > 0 && bad == 0;
    r.detail = std::to_string(runs - bad) + "/" + std::to_string(runs) +
               " good-event runs inside [128, 1152)/gap^2; observed N/g * gap^2 in [" + fmt("%.1f", min_scaled) +
               ", " + fmt("%.1f", max_scaled) + "]";
    r.seconds = since(t0);
    return r;
}

CheckResult check_comm1_ratio(const RunSet& set) {
    const auto t0 = Clock::now();
    CheckResult r{"C7", "s_comm1 <= 162 s_first", true, "", 0.0};
    const auto thresholds = boundary_thresholds(set.params);
    int checked = 0;
    int bad = 0;
    double worst = 0.0;
    for (const auto& m : set.runs) {
        const CommEpisode* c = first_communication(m);
        if (!m.good_event_held || c == nullptr) continue;
        const auto& e = c->communicator;
        if (e.s_first_effective < thresholds.s_boundary2 || e.t_comm1 == 0) continue;
        ++checked;
        const double s_comm1 = static_cast<double>(e.t_comm1 / c->arms.size());
        const double ratio = s_comm1 / static_cast<double>(e.s_first_effective);
        worst = std::max(worst, ratio);
        if (ratio > 162.0) ++bad;
    }
    r.passed = checked > 0 && bad == 0;
    r.detail = std::to_string(checked - bad) + "/" + std::to_string(checked) + " runs; largest s_comm1/s_first " +
               fmt("%.2f", worst);
    r.seconds = since(t0);
    return r;
}

CheckResult check_gap_ratio(const std::vector<const RunSet*>& sets) {
    const auto t0 = Clock::now();
    CheckResult r{"C8", "largest gap <= 3 x partition gap", true, "", 0.0};
    int checked = 0;
    int bad = 0;
    double worst = 0.0;
    for (const auto* set : sets) {
        for (const auto& m : set->runs) {
            if (!m.good_event_held) continue;
            for (const auto& c : m.communications) {
                if (!c.message_recovered) continue;
                ++checked;
                const double ratio = set->instance.max_consecutive_gap(c.arms) / c.partition_gap;
                if (!(c.partition_gap > 0.0) || ratio > 3.0) ++bad;
                worst = std::max(worst, c.partition_gap > 0.0 ? ratio : 1e300);
            }
        }
    }
    r.passed = checked > 0 && bad == 0;
    r.detail = std::to_string(checked - bad) + "/" + std::to_string(checked) +
               " successful splits; largest ratio " + fmt("%.3f", worst);
    r.seconds = since(t0);
    return r;
}

CheckResult check_witness_interval(const std::vector<const RunSet*>& sets) {
    const auto t0 = Clock::now();
    CheckResult r{"W", "signal-arm witnesses inside their interval", true, "", 0.0};
    int checked = 0;
    int bad = 0;
    for (const auto* set : sets) {
        const double coll = set->instance.collision_mean();
        for (const auto& m : set->runs) {
            if (!m.good_event_held) continue;
            for (const auto& c : m.communications) {
                if (!c.message_recovered || !c.aligned || c.listeners.empty()) continue;
                const int sig = c.communicator.signal_arm;
                const double mu = set->instance.mean(sig);
                const bool collision = set->config.mode == CollisionMode::collision;
                const double lo = collision ? 3.0 * (mu - coll) / 7.0 + coll : mu / 3.0;
                const double hi = collision ? 4.0 * (mu - coll) / 7.0 + coll : mu / 2.0;
                for (const auto& l : c.listeners) {
                    ++checked;
                    const auto it = std::find_if(l.witnesses.begin(), l.witnesses.end(),
                                                 [&](const Witness& w) { return w.arm == sig; });
                    if (it == l.witnesses.end() || it->value < lo || it->value > hi) ++bad;
                }
            }
        }
    }
    r.passed = checked > 0 && bad == 0;
    r.detail = std::to_string(checked - bad) + "/" + std::to_string(checked) + " listener witnesses";
    r.seconds = since(t0);
    return r;
}

CheckResult check_regret_plateau(const RunSet& set) {
    CheckResult r{"C9", "regret plateau", true, "", set.seconds};
    int plateau = 0;
    int exploit = 0;
    std::vector<double> regrets;
    for (const auto& m : set.runs) {
        exploit += m.all_exploit ? 1 : 0;
        if (m.all_exploit && m.cum_regret == m.regret_at_exploit_entry) ++plateau;
        regrets.push_back(m.cum_regret);
    }
    std::sort(regrets.begin(), regrets.end());
    double median = 0.0;
    if (!regrets.empty()) {
        const std::size_t n = regrets.size();
        median = n % 2 ? regrets[n / 2] : 0.5 * (regrets[n / 2 - 1] + regrets[n / 2]);
    }
    const double baseline =
        round_robin_baseline_regret(set.instance, set.params.num_players(), set.config.horizon);
    const double frac = set.runs.empty() ? 0.0 : static_cast<double>(plateau) / static_cast<double>(set.runs.size());
    r.passed = frac >= 0.9 && median * 10.0 <= baseline;
    r.detail = std::to_string(plateau) + "/" + std::to_string(set.runs.size()) + " seeds plateaued (" +
               std::to_string(exploit) + " reached Exploit) at T=" + fmt("%.3g", static_cast<double>(set.config.horizon)) +
               "; median regret " + fmt("%.4g", median) + " vs Round Robin " + fmt("%.4g", baseline);
    return r;
}

CheckResult check_bernstein_coverage(int streams, std::uint64_t n_max, double delta_prime, std::uint64_t seed) {
    const auto t0 = Clock::now();
    CheckResult r{"C10", "empirical Bernstein coverage", true, "", 0.0};
    const double lower = oracle::bernstein_coverage_oracle(0.5, n_max, delta_prime, streams, seed, oracle::BoundSide::lower);
    const double upper =
        oracle::bernstein_coverage_oracle(0.5, n_max, delta_prime, streams, seed + 1, oracle::BoundSide::upper);
    const double limit = delta_prime + 0.02;
    r.passed = lower <= limit && upper <= limit;
    r.detail = "violation fraction lower " + fmt("%.4f", lower) + ", upper " + fmt("%.4f", upper) + " over " +
               std::to_string(streams) + " streams, n <= " + std::to_string(n_max) + " (limit " + fmt("%.3f", limit) + ")";
    r.seconds = since(t0);
    return r;
}

CheckResult check_good_event_frequency(const RunSet& set) {
    CheckResult r{"C11", "good-event failure frequency", true, "", set.seconds};
    int failures = 0;
    for (const auto& m : set.runs) failures += m.good_event_held ? 0 : 1;
    const double n = static_cast<double>(set.runs.size());
    const double d = set.params.delta();
    const double limit = d + 3.0 * std::sqrt(d * (1.0 - d) / n);
    const double frac = static_cast<double>(failures) / n;
    r.passed = !set.runs.empty() && frac <= limit;
    r.detail = std::to_string(failures) + "/" + std::to_string(set.runs.size()) + " runs violated (fraction " +
               fmt("%.4f", frac) + ", limit " + fmt("%.4f", limit) + ", T=" +
               std::to_string(set.config.horizon) + ")";
    return r;
}

CheckResult check_rr_collisions_and_determinism(const std::vector<const RunSet*>& sets, int reruns) {
    const auto t0 = Clock::now();
    CheckResult r{"C12", "no Round Robin collisions, seed determinism", true, "", 0.0};
    std::uint64_t runs = 0;
    std::uint64_t dirty = 0;
    int replayed = 0;
    int mismatched = 0;
    for (const auto* set : sets) {
        for (const auto& m : set->runs) {
            ++runs;
            dirty += m.round_robin_collisions() > 0 ? 1 : 0;
        }
        const int n = std::min<int>(reruns, static_cast<int>(set->runs.size()));
        for (int i = 0; i < n; ++i) {
            const RunMetrics again = run(set->config, set->instance, set->params, set->seed, static_cast<std::uint64_t>(i));
            ++replayed;
            if (fingerprint(again) != fingerprint(set->runs[static_cast<std::size_t>(i)])) ++mismatched;
        }
    }
    r.passed = runs > 0 && dirty == 0 && mismatched == 0;
    r.detail = std::to_string(dirty) + " of " + std::to_string(runs) + " runs with Round Robin collisions; " +
               std::to_string(replayed - mismatched) + "/" + std::to_string(replayed) + " replays bit-identical";
    r.seconds = since(t0);
    return r;
}

std::string fingerprint(const RunMetrics& m) {
    std::ostringstream os;
    os << m.seed << '/' << m.replica << ' ' << m.rounds_played << ' ' << hex(m.cum_regret) << ' '
       << hex(m.collision_aware_regret) << ' ' << m.collisions << ' ' << m.good_event_held << ' '
       << m.good_event_violation_round << ' ' << m.all_exploit << ' ' << m.exploit_entry_round << ' '
       << hex(m.regret_at_exploit_entry) << '\n';
    for (int i = 0; i < 3; ++i) {
        os << hex(m.regret_by_phase[i]) << ' ' << m.collisions_by_phase[i] << ' ' << m.rounds_by_phase[i] << '\n';
    }
    for (const auto& g : m.grid) {
        os << g.round << ' ' << hex(g.cum_regret) << ' ' << g.cum_collisions << ' ' << static_cast<int>(g.phase) << ' '
           << g.event << '\n';
    }
    for (const auto& e : m.events) {
        os << e.round << ' ' << e.player << ' ' << static_cast<int>(e.type) << ' ' << e.value << '\n';
    }
    return os.str();
}

}  // namespace collidecomm::checks
