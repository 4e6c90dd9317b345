#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "collidecomm/bandit_env.hpp"
#include "collidecomm/schedule_math.hpp"

using namespace collidecomm;

namespace {

Environment make_env(std::vector<double> means, double coll, int players, std::uint64_t seed = 7,
                     RewardFamily family = RewardFamily::bernoulli) {
    return Environment(BanditInstance(std::move(means), coll, family), players, make_replica_rng(seed, 0));
}

}  // namespace

TEST(BanditInstance, ValidatesMeans) {
    EXPECT_THROW(BanditInstance({0.5, 1.2}, 0.0), DomainError);
    EXPECT_THROW(BanditInstance({0.5, -0.1}, 0.0), DomainError);
    EXPECT_THROW(BanditInstance({0.5, 0.3}, 0.4), DomainError);
    EXPECT_THROW(BanditInstance({}, 0.0), DomainError);
    EXPECT_NO_THROW(BanditInstance({0.5, 0.3}, 0.3));
}

TEST(BanditInstance, OrderIsDescendingWithIndexTies) {
    const BanditInstance inst({0.5, 0.9, 0.5, 0.1}, 0.0);
    EXPECT_EQ(inst.order(), (std::vector<int>{1, 0, 2, 3}));
    EXPECT_DOUBLE_EQ(inst.top_sum(2), 1.4);
    EXPECT_DOUBLE_EQ(inst.collision_gap(), 0.9);
    EXPECT_NEAR(inst.max_consecutive_gap({0, 1, 2, 3}), 0.4, 1e-12);
}

TEST(ResolveRound, DistinctChoicesDoNotCollide) {
    auto env = make_env({0.9, 0.1}, 0.0, 2);
    double sum0 = 0.0;
    double sum1 = 0.0;
    const int n = 20000;
    for (int t = 1; t <= n; ++t) {
        const auto rec = env.resolve_round(static_cast<std::uint64_t>(t), {0, 1});
        EXPECT_EQ(rec.collided, (std::vector<char>{0, 0}));
        sum0 += rec.rewards[0];
        sum1 += rec.rewards[1];
    }
    EXPECT_NEAR(sum0 / n, 0.9, 0.01);
    EXPECT_NEAR(sum1 / n, 0.1, 0.01);
}

TEST(ResolveRound, ZeroCollisionRewardsAreExactlyZero) {
    auto env = make_env({0.9, 0.1}, 0.0, 2);
    for (int t = 1; t <= 100; ++t) {
        const auto rec = env.resolve_round(static_cast<std::uint64_t>(t), {0, 0});
        EXPECT_EQ(rec.collided, (std::vector<char>{1, 1}));
        EXPECT_EQ(rec.rewards, (std::vector<double>{0.0, 0.0}));
    }
}

TEST(ResolveRound, CollidedPlayersDrawIndependently) {
    auto env = make_env({0.9, 0.6}, 0.5, 2);
    int differ = 0;
    double sum = 0.0;
    const int n = 20000;
    for (int t = 1; t <= n; ++t) {
        const auto rec = env.resolve_round(static_cast<std::uint64_t>(t), {1, 1});
        differ += rec.rewards[0] != rec.rewards[1] ? 1 : 0;
        sum += rec.rewards[0];
    }
    EXPECT_NEAR(sum / n, 0.5, 0.015);
    EXPECT_NEAR(static_cast<double>(differ) / n, 0.5, 0.02);
}

TEST(ResolveRound, FullAllocationHasNoRegret) {
    auto env = make_env({0.9, 0.6, 0.3}, 0.0, 3);
    const auto rec = env.resolve_round(1, {2, 0, 1});
    EXPECT_NEAR(rec.instantaneous_regret, 0.0, 1e-12);
}

TEST(ResolveRound, RejectsOutOfRangeChoices) {
    auto env = make_env({0.9, 0.6, 0.3}, 0.0, 2);
    EXPECT_THROW(env.resolve_round(1, {0, 3}), ContractViolation);
    EXPECT_THROW(env.resolve_round(1, {-1, 0}), ContractViolation);
    EXPECT_THROW(env.resolve_round(1, {0}), ContractViolation);
}

TEST(CollisionFlags, SymmetricAndComplete) {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> arm(0, 4);
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<int> choices(4);
        for (auto& c : choices) c = arm(rng);
        const auto flags = collision_flags(choices);
        for (std::size_t p = 0; p < choices.size(); ++p) {
            bool shared = false;
            for (std::size_t q = 0; q < choices.size(); ++q) shared = shared || (q != p && choices[q] == choices[p]);
            ASSERT_EQ(flags[p] != 0, shared);
        }
    }
}

TEST(CollisionFlags, RoundRobinOffsetsNeverCollide) {
    for (int k = 2; k <= 9; ++k) {
        for (int m = 1; m <= k; ++m) {
            for (int base = 0; base < k; ++base) {
                std::vector<int> choices;
                for (int p = 0; p < m; ++p) choices.push_back((base + p) % k + 3);
                for (char f : collision_flags(choices)) ASSERT_EQ(f, 0);
            }
        }
    }
}

TEST(PseudoRegret, DefinitionChecks) {
    const BanditInstance inst({0.9, 0.5}, 0.0);
    EXPECT_DOUBLE_EQ(pseudo_regret({}, inst), 0.0);
    RoundRecord r;
    r.choices = {1};
    EXPECT_NEAR(pseudo_regret({r}, inst), 0.4, 1e-12);
    EXPECT_NEAR(instantaneous_regret(inst, {1}), 0.4, 1e-12);
}

TEST(PseudoRegret, UsesMeansNotRealizedRewards) {
    // Hand-computed three-round trace: top-2 sum is 1.5.
    const BanditInstance inst({0.9, 0.6, 0.2}, 0.0);
    std::vector<RoundRecord> trace(3);
    trace[0].choices = {0, 1};  // 0
    trace[1].choices = {0, 2};  // 0.4
    trace[2].choices = {2, 2};  // 1.1, collided pulls still charged 0.2 each
    for (auto& r : trace) r.rewards = {1.0, 1.0};
    EXPECT_NEAR(pseudo_regret(trace, inst), 1.5, 1e-12);
}

TEST(PseudoRegret, PerfectTopRoundRobinIsZero) {
    const BanditInstance inst({0.9, 0.2, 0.6}, 0.0);
    std::vector<RoundRecord> trace;
    for (int t = 0; t < 50; ++t) {
        RoundRecord r;
        r.choices = t % 2 ? std::vector<int>{0, 2} : std::vector<int>{2, 0};
        trace.push_back(r);
    }
    EXPECT_NEAR(pseudo_regret(trace, inst), 0.0, 1e-12);
}

TEST(Environment, SameSeedSameStream) {
    auto a = make_env({0.9, 0.6, 0.3}, 0.1, 2, 42);
    auto b = make_env({0.9, 0.6, 0.3}, 0.1, 2, 42);
    for (int t = 1; t <= 500; ++t) {
        const std::vector<int> ch{t % 3, (t + 1) % 3};
        const auto ra = a.resolve_round(static_cast<std::uint64_t>(t), ch);
        const auto rb = b.resolve_round(static_cast<std::uint64_t>(t), ch);
        ASSERT_EQ(ra.rewards, rb.rewards);
    }
}

TEST(Environment, ReplicaStreamsDiffer) {
    auto a = make_replica_rng(42, 0);
    auto b = make_replica_rng(42, 1);
    auto c = make_replica_rng(43, 0);
    const auto x = a();
    EXPECT_NE(x, b());
    EXPECT_NE(x, c());
}

TEST(Environment, SampleSumMatchesMeanAndBounds) {
    auto env = make_env({0.3, 0.7}, 0.0, 1);
    const double s = env.sample_sum(0, false, 1000000);
    EXPECT_NEAR(s / 1e6, 0.3, 0.003);
    EXPECT_EQ(env.sample_sum(1, true, 1000), 0.0);
    EXPECT_EQ(env.sample_sum(1, false, 0), 0.0);
}

TEST(Environment, ScaledBetaHasRequestedMeanAndContinuousSupport) {
    auto env = make_env({0.3, 0.8}, 0.1, 1, 5, RewardFamily::scaled_beta);
    double sum = 0.0;
    int fractional = 0;
    const int n = 50000;
    for (int i = 0; i < n; ++i) {
        const double x = env.sample(1, false);
        ASSERT_GE(x, 0.0);
        ASSERT_LE(x, 1.0);
        fractional += (x > 0.0 && x < 1.0) ? 1 : 0;
        sum += x;
    }
    EXPECT_NEAR(sum / n, 0.8, 0.01);
    EXPECT_EQ(fractional, n);
    EXPECT_NEAR(env.sample_sum(0, true, 20000) / 20000.0, 0.1, 0.01);
}

TEST(RewardFamily, ParsesNames) {
    EXPECT_EQ(parse_family("bernoulli"), RewardFamily::bernoulli);
    EXPECT_EQ(parse_family("scaled-beta"), RewardFamily::scaled_beta);
    EXPECT_THROW(parse_family("gaussian"), DomainError);
}
