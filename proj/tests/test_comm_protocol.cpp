#include <random>

#include <gtest/gtest.h>

#include "collidecomm/comm_protocol.hpp"

using namespace collidecomm;

namespace {

ArmStats stats_of(std::uint64_t n, double mean) {
    ArmStats s;
    s.add(n, mean * static_cast<double>(n));
    return s;
}

}  // namespace

TEST(Message, EncodeExamples) {
    EXPECT_EQ(encode({0, 2}, 3).bits, (std::vector<bool>{true, false, true}));
    EXPECT_EQ(encode({1}, 4).bits, (std::vector<bool>{false, true, false, false}));
    EXPECT_EQ(decode(encode({2, 0}, 3)), (std::vector<int>{0, 2}));
}

TEST(Message, RoundTripsEveryProperSubset) {
    for (int k = 2; k <= 10; ++k) {
        for (unsigned mask = 1; mask + 1 < (1u << k); ++mask) {
            std::vector<int> comp;
            for (int a = 0; a < k; ++a) {
                if (mask & (1u << a)) comp.push_back(a);
            }
            const auto msg = encode(comp, k);
            ASSERT_FALSE(is_malformed(msg));
            ASSERT_EQ(decode(msg), comp);
        }
    }
}

TEST(Message, RejectsDegenerateComponents) {
    EXPECT_THROW(encode({}, 3), ContractViolation);
    EXPECT_THROW(encode({0, 1, 2}, 3), ContractViolation);
    EXPECT_THROW(encode({3}, 3), ContractViolation);
    EXPECT_THROW(encode({-1}, 3), ContractViolation);
    EXPECT_TRUE(is_malformed(Message{{false, false, false}}));
    EXPECT_TRUE(is_malformed(Message{{true, true}}));
    EXPECT_FALSE(is_malformed(Message{{true, false}}));
}

TEST(MaxArms, ZeroModeUsesHalfOfTheMaximum) {
    const std::vector<ArmStats> s{stats_of(100, 0.8), stats_of(100, 0.4), stats_of(100, 0.39),
                                  stats_of(100, 0.6)};
    EXPECT_EQ(max_arms(s, CollisionMode::zero), (std::vector<int>{0, 1, 3}));
}

TEST(MaxArms, CollisionModeMeasuresAboveTheCollisionMean) {
    const std::vector<ArmStats> s{stats_of(100, 0.8), stats_of(100, 0.45), stats_of(100, 0.55)};
    EXPECT_EQ(max_arms(s, CollisionMode::collision, 0.2), (std::vector<int>{0, 2}));
    EXPECT_THROW(max_arms(s, CollisionMode::collision), ContractViolation);
    EXPECT_THROW(max_arms({}, CollisionMode::zero), ContractViolation);
}

TEST(Witnesses, ThresholdsPerMode) {
    const ConfidenceParams p(2, 3, 0.005);
    const std::vector<ArmStats> s{stats_of(400, 0.8), stats_of(900, 0.6), stats_of(400, 0.1)};
    const auto zero = make_witnesses(s, {0, 1}, CollisionMode::zero, std::nullopt, p, 17);
    ASSERT_EQ(zero.size(), 2u);
    EXPECT_EQ(zero[0].arm, 0);
    EXPECT_NEAR(zero[0].value, (0.8 - D(400, p)) / 2, 1e-12);
    EXPECT_NEAR(zero[1].value, (0.6 - D(900, p)) / 2, 1e-12);
    EXPECT_EQ(zero[1].snapshot_round, 17u);

    const auto coll = make_witnesses(s, {1}, CollisionMode::collision, 0.2, p, 5);
    ASSERT_EQ(coll.size(), 1u);
    EXPECT_NEAR(coll[0].value, 0.4, 1e-12);
    EXPECT_THROW(make_witnesses(s, {1}, CollisionMode::collision, std::nullopt, p, 5), ContractViolation);
}

TEST(BitTest, StrictComparisonAgainstWitness) {
    const std::vector<Witness> w{{0, 0.3, 1}, {2, 0.2, 1}};
    std::vector<ArmStats> block{stats_of(10, 0.3), ArmStats{}, stats_of(10, 0.2)};
    EXPECT_EQ(bit_test(w, block), 0);
    block[2] = stats_of(10, 0.1);
    EXPECT_EQ(bit_test(w, block), 1);
    block[2] = stats_of(10, 0.9);
    block[0] = stats_of(10, 0.0);
    EXPECT_EQ(bit_test(w, block), 1);
}

TEST(BitTest, MissingSamplesOnWitnessedArmIsAContractViolation) {
    const std::vector<Witness> w{{1, 0.3, 1}};
    const std::vector<ArmStats> block{stats_of(10, 0.9), ArmStats{}};
    EXPECT_THROW(bit_test(w, block), ContractViolation);
}

TEST(BitTest, NoiselessChannelTransmitsEveryBit) {
    // Bit 1: the communicator sits on a witnessed arm, so listeners only see
    // collisions (reward 0) there. Bit 0: plain Round Robin samples.
    const std::vector<double> mu{0.9, 0.7, 0.2};
    std::vector<ArmStats> snapshot;
    for (double m : mu) snapshot.push_back(stats_of(100000, m));
    const ConfidenceParams p(2, 3, 0.005);
    const auto arms = max_arms(snapshot, CollisionMode::zero);
    const auto w = make_witnesses(snapshot, arms, CollisionMode::zero, std::nullopt, p, 1);
    std::vector<ArmStats> quiet;
    for (double m : mu) quiet.push_back(stats_of(50, m));
    EXPECT_EQ(bit_test(w, quiet), 0);
    auto jammed = quiet;
    jammed[static_cast<std::size_t>(arms.front())] = stats_of(50, 0.0);
    EXPECT_EQ(bit_test(w, jammed), 1);
}

TEST(SignalArm, PicksLargestLowerBoundWithLowIndexTies) {
    const ConfidenceParams p(2, 3, 0.005);
    EXPECT_EQ(signal_arm({stats_of(100, 0.5), stats_of(100, 0.7), stats_of(100, 0.7)}, p), 1);
    // A slightly higher mean with far fewer samples loses.
    EXPECT_EQ(signal_arm({stats_of(1000000, 0.7), stats_of(10, 0.75)}, p), 0);
    EXPECT_THROW(signal_arm({}, p), ContractViolation);
}

TEST(BlockBounds, Examples) {
    const auto b1 = block_bounds(12, 1, 2, 3);
    EXPECT_EQ(b1.first, 13u);
    EXPECT_EQ(b1.last, 18u);
    const auto b3 = block_bounds(12, 3, 2, 3);
    EXPECT_EQ(b3.first, 25u);
    EXPECT_EQ(b3.last, 30u);
    EXPECT_THROW(block_bounds(13, 1, 2, 3), ContractViolation);
    EXPECT_THROW(block_bounds(12, 0, 2, 3), ContractViolation);
}

TEST(BlockBounds, BlocksTileTheTransmission) {
    for (int k = 2; k <= 6; ++k) {
        for (std::uint64_t len = 1; len <= 4; ++len) {
            const std::uint64_t start = 7 * static_cast<std::uint64_t>(k);
            std::uint64_t expect = start + 1;
            for (std::uint64_t j = 1; j <= 8; ++j) {
                const auto b = block_bounds(start, j, len, k);
                ASSERT_EQ(b.first, expect);
                ASSERT_EQ(b.last - b.first + 1, len * static_cast<std::uint64_t>(k));
                ASSERT_EQ(b.first % static_cast<std::uint64_t>(k), 1u % static_cast<std::uint64_t>(k));
                expect = b.last + 1;
            }
        }
    }
}
