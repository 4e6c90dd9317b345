#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace collidecomm {

// Thrown when a function is called outside its documented domain.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Thrown when a caller breaks a documented precondition (wrong round, bad index, ...).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

inline constexpr double kAnalyzedDeltaMax = 1.0 / 162.0;

// Shared constants every player knows: number of players, number of arms and
// the confidence level. Validated at construction.
class ConfidenceParams {
public:
    // Throws DomainError unless 1 <= M <= K, K >= 2 and 0 < delta <= 1/162.
    // `allow_outside_analyzed_regime` relaxes the delta ceiling to delta < 1.
    ConfidenceParams(int num_players, int num_arms, double delta,
                     bool allow_outside_analyzed_regime = false);

    int num_players() const { return m_; }
    int num_arms() const { return k_; }
    double delta() const { return delta_; }
    bool outside_analyzed_regime() const { return delta_ > kAnalyzedDeltaMax; }

    // Confidence for the per-block Bernstein bounds: delta / (4 K^2 M).
    double block_delta() const;

private:
    int m_;
    int k_;
    double delta_;
};

// ln(4 n^2 M K / delta).
double g(std::uint64_t n, const ConfidenceParams& params);

// sqrt(2 g(n) / n).
double D(std::uint64_t n, const ConfidenceParams& params);

// Unvalidated forms taking raw constants; only n >= 1 is checked.
double g(std::uint64_t n, double num_players, double num_arms, double delta);
double D(std::uint64_t n, double num_players, double num_arms, double delta);

// 2 ln ln(2n) + ln(5.2 / delta_prime); delta_prime > 0.
double bernstein_B(std::uint64_t n, double delta_prime);

// Block length (pulls per arm) for a communication starting after `cycles`
// complete Round Robin cycles: the smallest m >= 1 with
// m / B(m, delta/(4K^2M)) >= 24 sqrt(cycles / (2 g(cycles))).
std::uint64_t comm_length_for_cycles(std::uint64_t cycles, const ConfidenceParams& params);

// Same quantity indexed by round; t must be a positive multiple of K.
std::uint64_t comm_length_f(std::uint64_t t, const ConfidenceParams& params);

// Target ratio 24 sqrt(s / (2 g(s))) that comm_length_for_cycles must reach.
double comm_length_target(std::uint64_t cycles, const ConfidenceParams& params);

// Unique integer exponent a with base^a in [x, base*x). Negative when x < 1/base.
int unique_power_in_interval(double x, int base);

// floor(s / g(s)) with the 1e-9 integer snap applied before flooring.
std::uint64_t snapped_floor_ratio(std::uint64_t s, const ConfidenceParams& params);

struct PowerTrigger {
    bool fired = false;
    int exponent = -1;
};

// Fires on the first cycle whose snapped floor(s/g(s)) equals 9^w.
PowerTrigger is_power_trigger_cycle(std::uint64_t s, const ConfidenceParams& params);

struct BoundaryThresholds {
    std::uint64_t t_boundary1 = 0;
    std::uint64_t s_boundary2 = 0;
    std::uint64_t t_boundary3 = 0;
    std::uint64_t t_first_boundary = 0;
    std::uint64_t window = 0;
};

struct ScanLimits {
    std::uint64_t window = 10'000;
    std::uint64_t cap = 100'000'000;
};

// Locates the boundary thresholds by forward scan; throws std::runtime_error
// naming the cap if a scan runs past it.
BoundaryThresholds boundary_thresholds(const ConfidenceParams& params, ScanLimits limits = {});

// Trigger cycles in increasing order, generated lazily by bisection on the
// increasing ratio s/g(s). Every listed cycle satisfies is_power_trigger_cycle.
class TriggerSchedule {
public:
    explicit TriggerSchedule(const ConfidenceParams& params);

    // Smallest trigger cycle >= s.
    std::uint64_t next_at_or_after(std::uint64_t s);
    // Exponent of the trigger at cycle s (which must be a trigger cycle).
    int exponent_of(std::uint64_t s);

private:
    void extend();

    ConfidenceParams params_;
    std::vector<std::uint64_t> cycles_;
    int next_exponent_ = 0;
};

// Exact 9^w in 64-bit arithmetic; w <= 20.
std::uint64_t power_of_nine(int w);

}  // namespace collidecomm
