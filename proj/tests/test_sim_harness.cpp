#include <cmath>

#include <gtest/gtest.h>

#include "collidecomm/sim_harness.hpp"

using namespace collidecomm;

namespace {

SimConfig config(std::uint64_t horizon, CollisionMode mode = CollisionMode::zero,
                 Engine engine = Engine::batched) {
    SimConfig c;
    c.horizon = horizon;
    c.mode = mode;
    c.engine = engine;
    return c;
}

// Cumulative regret at the last grid row at or before `round`.
double regret_at(const RunMetrics& m, std::uint64_t round) {
    double r = 0.0;
    for (const auto& row : m.grid) {
        if (row.round > round) break;
        r = row.cum_regret;
    }
    return r;
}

}  // namespace

TEST(Run, AsManyPlayersAsArmsHasNoRegret) {
    const BanditInstance inst({0.9, 0.4, 0.1}, 0.0);
    const ConfidenceParams params(3, 3, 0.005);
    for (Engine e : {Engine::lockstep, Engine::batched}) {
        const auto m = run(config(100000, CollisionMode::zero, e), inst, params, 1);
        EXPECT_EQ(m.cum_regret, 0.0);
        EXPECT_EQ(m.collisions, 0u);
        EXPECT_TRUE(m.all_exploit);
    }
    EXPECT_EQ(round_robin_baseline_regret(inst, 3, 100000), 0.0);
}

TEST(Run, SameSeedIsBitIdentical) {
    const BanditInstance inst({0.9, 0.7, 0.5, 0.3, 0.1}, 0.05);
    const ConfidenceParams params(2, 5, 0.01, true);
    const SimConfig c = config(500000000, CollisionMode::collision);
    const auto a = run(c, inst, params, 77, 2);
    const auto b = run(c, inst, params, 77, 2);
    const auto other = run(c, inst, params, 77, 3);
    EXPECT_EQ(a.cum_regret, b.cum_regret);
    EXPECT_EQ(a.collisions, b.collisions);
    ASSERT_EQ(a.grid.size(), b.grid.size());
    for (std::size_t i = 0; i < a.grid.size(); ++i) {
        EXPECT_EQ(a.grid[i].round, b.grid[i].round);
        EXPECT_EQ(a.grid[i].cum_regret, b.grid[i].cum_regret);
        EXPECT_EQ(a.grid[i].event, b.grid[i].event);
    }
    EXPECT_NE(a.cum_regret, other.cum_regret);
}

TEST(Run, ParallelReplicasMatchSequentialOnes) {
    const BanditInstance inst({0.9, 0.6, 0.3}, 0.0);
    const ConfidenceParams params(2, 3, 0.005);
    const SimConfig c = config(20000000);
    const auto par = run_replicas(c, inst, params, 5, 4, 3);
    ASSERT_EQ(par.size(), 4u);
    for (int r = 0; r < 4; ++r) {
        const auto seq = run(c, inst, params, 5, static_cast<std::uint64_t>(r));
        EXPECT_EQ(par[static_cast<std::size_t>(r)].cum_regret, seq.cum_regret);
        EXPECT_EQ(par[static_cast<std::size_t>(r)].replica, static_cast<std::uint64_t>(r));
    }
}

TEST(Run, RejectsInconsistentConfigs) {
    const BanditInstance inst({0.9, 0.6, 0.3}, 0.1);
    const ConfidenceParams params(2, 3, 0.005);
    EXPECT_THROW(run(config(100), inst, params, 1), DomainError);  // zero mode, nonzero collision mean
    EXPECT_THROW(run(config(0, CollisionMode::collision), inst, params, 1), DomainError);
    EXPECT_THROW(run(config(100, CollisionMode::collision), inst, ConfidenceParams(2, 4, 0.005), 1), DomainError);
    SimConfig bad_grid = config(100, CollisionMode::collision);
    bad_grid.grid.ratio = 1.0;
    EXPECT_THROW(run(bad_grid, inst, params, 1), DomainError);
}

TEST(Run, RegretAndCollisionsAreMonotone) {
    const BanditInstance inst({0.9, 0.7, 0.5, 0.3, 0.1}, 0.05);
    const ConfidenceParams params(2, 5, 0.01, true);
    for (CollisionMode mode : {CollisionMode::collision, CollisionMode::zero}) {
        const BanditInstance& used = mode == CollisionMode::zero ? BanditInstance(inst.means(), 0.0) : inst;
        const auto m = run(config(1000000000, mode), used, params, 3);
        ASSERT_GT(m.grid.size(), 100u);
        for (std::size_t i = 1; i < m.grid.size(); ++i) {
            ASSERT_GT(m.grid[i].round, m.grid[i - 1].round);
            ASSERT_GE(m.grid[i].cum_regret, m.grid[i - 1].cum_regret);
            ASSERT_GE(m.grid[i].cum_collisions, m.grid[i - 1].cum_collisions);
        }
        EXPECT_EQ(m.grid.back().round, m.rounds_played);
        EXPECT_EQ(m.grid.back().cum_regret, m.cum_regret);
    }
}

TEST(Run, GridIsDenseThenGeometric) {
    const BanditInstance inst({0.5, 0.5, 0.5}, 0.0);
    const ConfidenceParams params(2, 3, 0.005);
    const auto m = run(config(100000), inst, params, 1);
    ASSERT_GE(m.grid.size(), 10000u);
    for (std::uint64_t t = 1; t <= 10000; ++t) ASSERT_EQ(m.grid[t - 1].round, t);
    for (std::size_t i = 10001; i + 1 < m.grid.size(); ++i) {
        const auto prev = static_cast<double>(m.grid[i - 1].round);
        EXPECT_EQ(m.grid[i].round, static_cast<std::uint64_t>(std::ceil(prev * 1.1)));
    }
}

TEST(RegretDecomposition, SumsToPseudoRegretOfTheRecords) {
    const BanditInstance inst({0.95, 0.05, 0.9}, 0.0);
    const ConfidenceParams params(2, 3, 0.005);
    std::vector<RoundRecord> records;
    SimConfig c = config(7600000, CollisionMode::zero, Engine::lockstep);
    c.record_sink = [&](const RoundRecord& r) {
        RoundRecord slim;
        slim.round = r.round;
        slim.choices = r.choices;
        slim.phase = r.phase;
        slim.instantaneous_regret = r.instantaneous_regret;
        records.push_back(std::move(slim));
    };
    const auto m = run(c, inst, params, 1);
    ASSERT_EQ(records.size(), 7600000u);
    const auto parts = regret_decomposition(records);
    const double total = pseudo_regret(records, inst);
    EXPECT_NEAR(parts.total(), total, 1e-6 * total);
    EXPECT_NEAR(m.cum_regret, total, 1e-6 * total);
    EXPECT_GT(parts.round_robin, 0.0);
    EXPECT_GT(parts.collision, 0.0);
    const auto from_metrics = regret_decomposition(m);
    EXPECT_NEAR(from_metrics.round_robin, parts.round_robin, 1e-6 * total);
    EXPECT_NEAR(from_metrics.collision, parts.collision, 1e-6 * total);
    EXPECT_NEAR(from_metrics.exploit, parts.exploit, 1e-6 * total);
}

TEST(RegretDecomposition, AllExploitTraceIsZero) {
    const BanditInstance inst({0.9, 0.5}, 0.0);
    std::vector<RoundRecord> records(10);
    for (auto& r : records) {
        r.choices = {0};
        r.phase = PhaseTag::exploit;
    }
    const auto parts = regret_decomposition(records);
    EXPECT_EQ(parts.round_robin, 0.0);
    EXPECT_EQ(parts.collision, 0.0);
    EXPECT_EQ(parts.exploit, 0.0);
}

TEST(RoundRobinBaseline, Definition) {
    const BanditInstance inst({0.9, 0.5, 0.1}, 0.0);
    // Top-2 sum 1.4, cycling average 0.5 per player.
    EXPECT_NEAR(round_robin_baseline_regret(inst, 2, 1000), 400.0, 1e-9);
}

TEST(Protocol, RegretStopsOnceEveryPlayerExploits) {
    const BanditInstance inst({0.9, 0.7, 0.5, 0.3, 0.1}, 0.05);
    const ConfidenceParams params(2, 5, 0.01, true);
    // At T = 2e6 the collision-estimation phase has not finished on any seed,
    // so only the long horizon exercises the plateau.
    for (std::uint64_t horizon : {2000000ULL, 800000000ULL}) {
        const auto runs = run_replicas(config(horizon, CollisionMode::collision), inst, params, 13, 4);
        int checked = 0;
        for (const auto& m : runs) {
            if (!m.all_exploit || m.exploit_entry_round > horizon / 2) continue;
            EXPECT_EQ(regret_at(m, horizon / 2), m.cum_regret);
            ++checked;
        }
        if (horizon > 2000000ULL) EXPECT_EQ(checked, 4);
    }
}

TEST(Protocol, CommunicationEpisodesOnGoodEventRuns) {
    const BanditInstance inst({0.9, 0.75, 0.6, 0.45, 0.3}, 0.0);
    const ConfidenceParams params(3, 5, 0.02, true);
    const auto runs = run_replicas(config(100000000000ULL), inst, params, 21, 30);
    int episodes = 0;
    for (const auto& m : runs) {
        ASSERT_TRUE(m.all_exploit);
        if (!m.good_event_held || m.any_failure) continue;
        std::uint64_t bound_rounds = 0;
        for (const auto& c : m.communications) {
            ++episodes;
            EXPECT_TRUE(c.message_recovered);
            EXPECT_TRUE(c.aligned);
            for (const auto& l : c.listeners) EXPECT_LE(l.probes, 3);
            const auto k = static_cast<std::uint64_t>(c.arms.size());
            bound_rounds += (k + 1) * k * c.communicator.block_len;
        }
        // Only the communicator's ON blocks signal in zero mode.
        const auto coll = static_cast<std::size_t>(PhaseTag::collision);
        EXPECT_LE(m.rounds_by_phase[coll], bound_rounds);
        EXPECT_LE(m.regret_by_phase[coll],
                  static_cast<double>(bound_rounds) * params.num_players() * inst.collision_gap());
        EXPECT_EQ(m.round_robin_collisions(), 0u);
    }
    EXPECT_GT(episodes, 30);
}
