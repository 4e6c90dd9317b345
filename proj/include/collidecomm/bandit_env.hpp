#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "collidecomm/events.hpp"

namespace collidecomm {

enum class RewardFamily { bernoulli, scaled_beta };

RewardFamily parse_family(const std::string& name);
std::string_view to_string(RewardFamily family);

// Ground truth. Only the environment, the harness diagnostics and the oracle
// tests ever see one of these.
class BanditInstance {
public:
    BanditInstance(std::vector<double> means, double collision_mean,
                   RewardFamily family = RewardFamily::bernoulli);

    int num_arms() const { return static_cast<int>(means_.size()); }
    const std::vector<double>& means() const { return means_; }
    double mean(int arm) const { return means_.at(static_cast<std::size_t>(arm)); }
    double collision_mean() const { return collision_mean_; }
    RewardFamily family() const { return family_; }

    // Arms sorted by descending mean, ties by lower index.
    const std::vector<int>& order() const { return order_; }
    double top_sum(int num_players) const;
    // Means of `arms` summed from largest to smallest, the order top_sum
    // uses, so an optimal allocation gives exactly zero regret.
    double sum_of_means(const std::vector<int>& arms) const;
    double collision_gap() const { return means_[order_[0]] - collision_mean_; }
    // Largest gap between consecutive means among `arms`, ordered by true mean.
    double max_consecutive_gap(const std::vector<int>& arms) const;

private:
    std::vector<double> means_;
    double collision_mean_;
    RewardFamily family_;
    std::vector<int> order_;
};

struct RoundRecord {
    std::uint64_t round = 0;
    std::vector<int> choices;
    std::vector<char> collided;
    std::vector<double> rewards;
    double instantaneous_regret = 0.0;
    double collision_aware_regret = 0.0;
    PhaseTag phase = PhaseTag::round_robin;
    std::vector<ProtocolEvent> events;
};

// collided[p] is true iff another player chose the same arm.
std::vector<char> collision_flags(const std::vector<int>& choices);

// Sum of top-M means minus the means of the chosen arms; collided pulls are
// charged the chosen arm's mean.
double instantaneous_regret(const BanditInstance& instance, const std::vector<int>& choices);

double pseudo_regret(const std::vector<RoundRecord>& records, const BanditInstance& instance);

// Replica streams: (seed, replica) -> std::seed_seq over their 32-bit halves.
std::mt19937_64 make_replica_rng(std::uint64_t seed, std::uint64_t replica);

class Environment {
public:
    Environment(BanditInstance instance, int num_players, std::mt19937_64 rng);

    const BanditInstance& instance() const { return instance_; }
    int num_players() const { return num_players_; }

    // One lock-step round: collisions resolved, each player's reward drawn
    // independently, regret filled in. Events and phase are left to the caller.
    RoundRecord resolve_round(std::uint64_t round, const std::vector<int>& choices);

    // One reward from an arm (or from the collision distribution).
    double sample(int arm, bool collided);
    // Sum of n independent rewards from the same source.
    double sample_sum(int arm, bool collided, std::uint64_t n);

private:
    double draw(double mean);

    BanditInstance instance_;
    int num_players_;
    double top_sum_;
    std::mt19937_64 rng_;
};

}  // namespace collidecomm
