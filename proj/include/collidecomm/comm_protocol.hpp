#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "collidecomm/connectivity.hpp"
#include "collidecomm/schedule_math.hpp"

namespace collidecomm {

enum class CollisionMode { zero, collision };

struct Witness {
    int arm = 0;
    double value = 0.0;
    std::uint64_t snapshot_round = 0;
};

// bits[j] is set iff local arm j belongs to the transmitted component.
struct Message {
    std::vector<bool> bits;

    bool operator==(const Message&) const = default;
};

// Arms are 0-based local labels. Throws ContractViolation on an empty or full
// component, or an arm outside [0, arm_count).
Message encode(const std::vector<int>& component, int arm_count);

// Inverse of encode; returns the set arms in increasing order.
std::vector<int> decode(const Message& message);

// An all-zero or all-one message cannot describe a partition.
bool is_malformed(const Message& message);

// Arms with a large empirical mean. Zero mode: mean >= max/2. Collision mode:
// mean - coll >= (max - coll)/2.
std::vector<int> max_arms(const std::vector<ArmStats>& stats, CollisionMode mode,
                          std::optional<double> collision_mean = std::nullopt);

// Thresholds for the arms in `arms`. Zero mode: (mean - D(N))/2. Collision
// mode: (mean - coll)/2 + coll.
std::vector<Witness> make_witnesses(const std::vector<ArmStats>& stats, const std::vector<int>& arms,
                                    CollisionMode mode, std::optional<double> collision_mean,
                                    const ConfidenceParams& params, std::uint64_t snapshot_round);

// 1 iff some witnessed arm's block mean is strictly below its witness.
// `block` is indexed by arm; every witnessed arm needs at least one sample.
int bit_test(const std::vector<Witness>& witnesses, const std::vector<ArmStats>& block);

// argmax of mean - D(N), ties to the lowest index.
int signal_arm(const std::vector<ArmStats>& stats, const ConfidenceParams& params);

struct RoundInterval {
    std::uint64_t first = 0;
    std::uint64_t last = 0;
};

// Rounds of block j (1-based) of a transmission starting after round
// t_start: [t_start + (j-1) K len + 1, t_start + j K len].
RoundInterval block_bounds(std::uint64_t t_start, std::uint64_t j, std::uint64_t block_len, int arm_count);

}  // namespace collidecomm
