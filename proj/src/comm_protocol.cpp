#include "collidecomm/comm_protocol.hpp"

#include <algorithm>
#include <string>

namespace collidecomm {

Message encode(const std::vector<int>& component, int arm_count) {
    if (arm_count < 1) throw ContractViolation("encode needs a positive arm count");
    Message msg;
    msg.bits.assign(static_cast<std::size_t>(arm_count), false);
    for (int a : component) {
        if (a < 0 || a >= arm_count) throw ContractViolation("encode: arm " + std::to_string(a) + " out of range");
        msg.bits[static_cast<std::size_t>(a)] = true;
    }
    if (is_malformed(msg)) throw ContractViolation("encode needs a non-empty proper subset");
    return msg;
}

std::vector<int> decode(const Message& message) {
    std::vector<int> out;
    for (std::size_t j = 0; j < message.bits.size(); ++j) {
        if (message.bits[j]) out.push_back(static_cast<int>(j));
    }
    return out;
}

bool is_malformed(const Message& message) {
    const auto ones = std::count(message.bits.begin(), message.bits.end(), true);
    return ones == 0 || ones == static_cast<long>(message.bits.size());
}

std::vector<int> max_arms(const std::vector<ArmStats>& stats, CollisionMode mode,
                          std::optional<double> collision_mean) {
    if (stats.empty()) throw ContractViolation("max_arms needs at least one arm");
    if (mode == CollisionMode::collision && !collision_mean) {
        throw ContractViolation("collision-mode max_arms needs a collision mean estimate");
    }
    const double base = mode == CollisionMode::collision ? *collision_mean : 0.0;
    double best = -1e300;
    for (const auto& s : stats) best = std::max(best, s.mean() - base);
    std::vector<int> out;
    for (std::size_t i = 0; i < stats.size(); ++i) {
        if (stats[i].mean() - base >= 0.5 * best) out.push_back(static_cast<int>(i));
    }
    return out;
}

std::vector<Witness> make_witnesses(const std::vector<ArmStats>& stats, const std::vector<int>& arms,
                                    CollisionMode mode, std::optional<double> collision_mean,
                                    const ConfidenceParams& params, std::uint64_t snapshot_round) {
    if (mode == CollisionMode::collision && !collision_mean) {
        throw ContractViolation("collision-mode witnesses need a collision mean estimate");
    }
    std::vector<Witness> out;
    out.reserve(arms.size());
    for (int a : arms) {
        const ArmStats& s = stats.at(static_cast<std::size_t>(a));
        const double m = s.mean();
        const double value = mode == CollisionMode::zero
                                 ? 0.5 * (m - D(s.count, params))
                                 : 0.5 * (m - *collision_mean) + *collision_mean;
        out.push_back({a, value, snapshot_round});
    }
    return out;
}

int bit_test(const std::vector<Witness>& witnesses, const std::vector<ArmStats>& block) {
    for (const auto& w : witnesses) {
        if (w.arm < 0 || w.arm >= static_cast<int>(block.size()) || block[w.arm].count == 0) {
            throw ContractViolation("bit_test: no block samples for witnessed arm " + std::to_string(w.arm));
        }
    }
    for (const auto& w : witnesses) {
        if (block[w.arm].mean() < w.value) return 1;
    }
    return 0;
}

int signal_arm(const std::vector<ArmStats>& stats, const ConfidenceParams& params) {
    int best = -1;
    double best_v = 0.0;
    for (std::size_t i = 0; i < stats.size(); ++i) {
        const double v = stats[i].mean() - D(stats[i].count, params);
        if (best < 0 || v > best_v) {
            best = static_cast<int>(i);
            best_v = v;
        }
    }
    if (best < 0) throw ContractViolation("signal_arm needs at least one arm");
    return best;
}

RoundInterval block_bounds(std::uint64_t t_start, std::uint64_t j, std::uint64_t block_len, int arm_count) {
    if (arm_count < 1 || j < 1 || block_len < 1) throw ContractViolation("block_bounds: bad arguments");
    const auto k = static_cast<std::uint64_t>(arm_count);
    if (t_start % k != 0) throw ContractViolation("block_bounds: start must be a multiple of the arm count");
    return {t_start + (j - 1) * k * block_len + 1, t_start + j * k * block_len};
}

}  // namespace collidecomm
