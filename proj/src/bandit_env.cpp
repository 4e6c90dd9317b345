#include "collidecomm/bandit_env.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "collidecomm/schedule_math.hpp"

namespace collidecomm {

std::string_view to_string(EventType type) {
    switch (type) {
        case EventType::TFIRST: return "TFIRST";
        case EventType::TCOMM: return "TCOMM";
        case EventType::TCOMM1: return "TCOMM1";
        case EventType::TLISTEN: return "TLISTEN";
        case EventType::PROBE: return "PROBE";
        case EventType::BIT_SENT: return "BIT_SENT";
        case EventType::BIT_DECODED: return "BIT_DECODED";
        case EventType::RECURSE: return "RECURSE";
        case EventType::EXPLOIT: return "EXPLOIT";
        case EventType::FAILURE: return "FAILURE";
    }
    return "?";
}

std::string_view to_string(PhaseTag tag) {
    switch (tag) {
        case PhaseTag::round_robin: return "round_robin";
        case PhaseTag::collision: return "collision";
        case PhaseTag::exploit: return "exploit";
    }
    return "?";
}

RewardFamily parse_family(const std::string& name) {
    if (name == "bernoulli") return RewardFamily::bernoulli;
    if (name == "scaled-beta" || name == "scaled_beta") return RewardFamily::scaled_beta;
    throw DomainError("unknown reward family '" + name + "'");
}

std::string_view to_string(RewardFamily family) {
    return family == RewardFamily::bernoulli ? "bernoulli" : "scaled-beta";
}

BanditInstance::BanditInstance(std::vector<double> means, double collision_mean, RewardFamily family)
    : means_(std::move(means)), collision_mean_(collision_mean), family_(family) {
    if (means_.empty()) throw DomainError("instance needs at least one arm");
    for (double m : means_) {
        if (!(m >= 0.0 && m <= 1.0)) throw DomainError("arm means must lie in [0, 1]");
    }
    if (!(collision_mean_ >= 0.0 && collision_mean_ <= 1.0)) {
        throw DomainError("collision mean must lie in [0, 1]");
    }
    if (collision_mean_ > *std::min_element(means_.begin(), means_.end())) {
        throw DomainError("collision mean must not exceed the smallest arm mean");
    }
    order_.resize(means_.size());
    std::iota(order_.begin(), order_.end(), 0);
    std::stable_sort(order_.begin(), order_.end(), [&](int a, int b) { return means_[a] > means_[b]; });
}

double BanditInstance::top_sum(int num_players) const {
    double s = 0.0;
    for (int i = 0; i < num_players && i < num_arms(); ++i) s += means_[order_[i]];
    return s;
}

double BanditInstance::sum_of_means(const std::vector<int>& arms) const {
    std::vector<double> mu;
    mu.reserve(arms.size());
    for (int a : arms) mu.push_back(mean(a));
    std::sort(mu.begin(), mu.end(), std::greater<>());
    double s = 0.0;
    for (double m : mu) s += m;
    return s;
}

double BanditInstance::max_consecutive_gap(const std::vector<int>& arms) const {
    std::vector<double> v;
    v.reserve(arms.size());
    for (int a : arms) v.push_back(mean(a));
    std::sort(v.begin(), v.end(), std::greater<>());
    double best = 0.0;
    for (std::size_t i = 0; i + 1 < v.size(); ++i) best = std::max(best, v[i] - v[i + 1]);
    return best;
}

std::vector<char> collision_flags(const std::vector<int>& choices) {
    std::vector<char> out(choices.size(), 0);
    for (std::size_t p = 0; p < choices.size(); ++p) {
        for (std::size_t q = 0; q < choices.size(); ++q) {
            if (p != q && choices[p] == choices[q]) {
                out[p] = 1;
                break;
            }
        }
    }
    return out;
}

double instantaneous_regret(const BanditInstance& instance, const std::vector<int>& choices) {
    return instance.top_sum(static_cast<int>(choices.size())) - instance.sum_of_means(choices);
}

double pseudo_regret(const std::vector<RoundRecord>& records, const BanditInstance& instance) {
    double total = 0.0;
    for (const auto& r : records) total += instantaneous_regret(instance, r.choices);
    return total;
}

std::mt19937_64 make_replica_rng(std::uint64_t seed, std::uint64_t replica) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(replica), static_cast<std::uint32_t>(replica >> 32)};
    return std::mt19937_64(seq);
}

Environment::Environment(BanditInstance instance, int num_players, std::mt19937_64 rng)
    : instance_(std::move(instance)), num_players_(num_players), rng_(rng) {
    if (num_players_ < 1 || num_players_ > instance_.num_arms()) {
        throw DomainError("environment needs 1 <= M <= K");
    }
    top_sum_ = instance_.top_sum(num_players_);
}

double Environment::draw(double mean) {
    if (mean <= 0.0) return 0.0;
    if (mean >= 1.0) return 1.0;
    if (instance_.family() == RewardFamily::bernoulli) {
        return std::bernoulli_distribution(mean)(rng_) ? 1.0 : 0.0;
    }
    // Beta(alpha, 2) with alpha chosen so the mean is `mean`.
    const double alpha = 2.0 * mean / (1.0 - mean);
    const double x = std::gamma_distribution<double>(alpha, 1.0)(rng_);
    const double y = std::gamma_distribution<double>(2.0, 1.0)(rng_);
    return x / (x + y);
}

double Environment::sample(int arm, bool collided) {
    return draw(collided ? instance_.collision_mean() : instance_.mean(arm));
}

double Environment::sample_sum(int arm, bool collided, std::uint64_t n) {
    if (n == 0) return 0.0;
    const double mean = collided ? instance_.collision_mean() : instance_.mean(arm);
    if (mean <= 0.0) return 0.0;
    if (mean >= 1.0) return static_cast<double>(n);
    if (instance_.family() == RewardFamily::bernoulli) {
        return static_cast<double>(std::binomial_distribution<std::uint64_t>(n, mean)(rng_));
    }
    double s = 0.0;
    for (std::uint64_t i = 0; i < n; ++i) s += draw(mean);
    return s;
}

RoundRecord Environment::resolve_round(std::uint64_t round, const std::vector<int>& choices) {
    if (static_cast<int>(choices.size()) != num_players_) {
        throw ContractViolation("resolve_round expects one choice per player");
    }
    RoundRecord rec;
    rec.round = round;
    rec.choices = choices;
    for (int a : choices) {
        if (a < 0 || a >= instance_.num_arms()) throw ContractViolation("arm choice out of range");
    }
    rec.collided = collision_flags(choices);
    rec.rewards.resize(choices.size());
    double pulled_aware = 0.0;
    for (std::size_t p = 0; p < choices.size(); ++p) {
        const bool c = rec.collided[p] != 0;
        rec.rewards[p] = sample(choices[p], c);
        pulled_aware += c ? instance_.collision_mean() : instance_.mean(choices[p]);
    }
    rec.instantaneous_regret = top_sum_ - instance_.sum_of_means(choices);
    rec.collision_aware_regret = top_sum_ - pulled_aware;
    return rec;
}

}  // namespace collidecomm
