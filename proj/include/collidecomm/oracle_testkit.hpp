#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

// Deliberately naive reference implementations. Nothing in here includes or
// calls the modules it is used to check.

namespace collidecomm::oracle {

// An oracle found a counterexample to the property it enumerates.
class OracleFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Enumeration caps, fixed so that every run checks the same ranges.
inline constexpr int kPowerExponentMin = -64;
inline constexpr int kPowerExponentMax = 64;
inline constexpr std::uint64_t kLogInversionGrid = 200000;
inline constexpr std::uint64_t kBoundaryWindow = 10000;

// Pairwise closed-overlap test plus union-find. Components are sorted
// internally and ordered by the mean of their members' midpoints, highest
// first.
std::vector<std::vector<int>> components_oracle(const std::vector<std::pair<double, double>>& intervals);

// The exponent a with base^a in [x, base*x), found by trying every exponent
// in the caps above. Throws OracleFailure unless exactly one matches.
int power_oracle(double x, int base);

double naive_g(std::uint64_t n, int players, int arms, double delta);
double naive_D(std::uint64_t n, int players, int arms, double delta);
double naive_B(std::uint64_t n, double delta_prime);

enum class BoundSide { lower, upper };

// Fraction of `trials` Bernoulli(mean) streams in which the anytime bound
// mean -/+ (2 sqrt(min(mean, 1-mean) B(n)/n) + B(n)/n) is crossed by the
// running empirical mean at some n <= n_max.
double bernstein_coverage_oracle(double mean, std::uint64_t n_max, double delta_prime, int trials,
                                 std::uint64_t seed, BoundSide side = BoundSide::lower);

struct LogInversionResult {
    bool holds = true;
    double bound = 0.0;     // 4 b ln(c b)
    double scan_max = 0.0;  // 10 b ln(c b)
    std::uint64_t points = 0;
    double counterexample = 0.0;
};

// Scans x on a grid over (1/c, 10 b ln(cb)] and checks that x/ln(cx) <= b
// implies x <= 4 b ln(cb). Requires c > 0 and b >= e/c.
LogInversionResult log_inversion_oracle(double b, double c, std::uint64_t grid = kLogInversionGrid);

// Smallest m >= 1 with m / B(m, delta/(4 K^2 M)) >= 24 sqrt(s / (2 g(s))),
// by scanning m upwards from 1.
std::uint64_t comm_length_oracle(std::uint64_t cycles, int players, int arms, double delta);

struct TriggerHit {
    std::uint64_t cycle = 0;
    int exponent = 0;
    bool operator==(const TriggerHit&) const = default;
};

// Every cycle s <= s_max where floor(s/g(s)) is a power of nine and the
// previous cycle's value is not that power.
std::vector<TriggerHit> trigger_scan_oracle(std::uint64_t s_max, int players, int arms, double delta);

struct BoundaryValues {
    std::uint64_t t_boundary1 = 0;
    std::uint64_t s_boundary2 = 0;
    std::uint64_t t_boundary3 = 0;
    std::uint64_t t_first_boundary = 0;
};

// Forward scans with a stability window; uses comm_length_oracle for f.
BoundaryValues boundary_oracle(int players, int arms, double delta, std::uint64_t window = kBoundaryWindow,
                               std::uint64_t cap = 10000000);

}  // namespace collidecomm::oracle
