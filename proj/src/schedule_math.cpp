#include "collidecomm/schedule_math.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace collidecomm {

namespace {

constexpr std::uint64_t kCommLengthCap = 1'000'000'000ULL;
constexpr double kSnapTolerance = 1e-9;

bool ratio_reaches(std::uint64_t m, double delta_prime, double target) {
    return static_cast<double>(m) / bernstein_B(m, delta_prime) >= target;
}

// Runs of `window` consecutive passing indices; returns the first index of
// the first such run, scanning from `start`.
template <typename Pred>
std::uint64_t first_stable_index(Pred pred, std::uint64_t start, const ScanLimits& limits,
                                 const char* what) {
    std::uint64_t run_start = start;
    std::uint64_t run = 0;
    for (std::uint64_t s = start; s <= limits.cap; ++s) {
        if (pred(s)) {
            if (run == 0) run_start = s;
            if (++run >= limits.window) return run_start;
        } else {
            run = 0;
        }
    }
    throw std::runtime_error(std::string("boundary scan for ") + what + " exceeded cap of " +
                             std::to_string(limits.cap) + " cycles");
}

}  // namespace

ConfidenceParams::ConfidenceParams(int num_players, int num_arms, double delta,
                                   bool allow_outside_analyzed_regime)
    : m_(num_players), k_(num_arms), delta_(delta) {
    if (k_ < 2) throw DomainError("number of arms must be at least 2");
    if (m_ < 1) throw DomainError("number of players must be at least 1");
    if (m_ > k_) throw DomainError("number of players must not exceed number of arms");
    if (!(delta_ > 0.0) || !(delta_ < 1.0)) throw DomainError("delta must lie in (0, 1)");
    if (delta_ > kAnalyzedDeltaMax && !allow_outside_analyzed_regime) {
        throw DomainError("delta must be at most 1/162 unless the analyzed-regime override is set");
    }
}

double ConfidenceParams::block_delta() const {
    return delta_ / (4.0 * k_ * k_ * m_);
}

double g(std::uint64_t n, double num_players, double num_arms, double delta) {
    if (n == 0) throw DomainError("g is defined for n >= 1");
    const double nd = static_cast<double>(n);
    return std::log(4.0 * nd * nd * num_players * num_arms / delta);
}

double D(std::uint64_t n, double num_players, double num_arms, double delta) {
    if (n == 0) throw DomainError("D is defined for n >= 1");
    return std::sqrt(2.0 * g(n, num_players, num_arms, delta) / static_cast<double>(n));
}

double g(std::uint64_t n, const ConfidenceParams& params) {
    return g(n, params.num_players(), params.num_arms(), params.delta());
}

double D(std::uint64_t n, const ConfidenceParams& params) {
    return D(n, params.num_players(), params.num_arms(), params.delta());
}

double bernstein_B(std::uint64_t n, double delta_prime) {
    if (n == 0) throw DomainError("B is defined for n >= 1");
    // delta' >= 1 is outside any confidence use but the formula is still
    // well defined, so only positivity is enforced.
    if (!(delta_prime > 0.0)) throw DomainError("B requires delta' > 0");
    return 2.0 * std::log(std::log(2.0 * static_cast<double>(n))) + std::log(5.2 / delta_prime);
}

double comm_length_target(std::uint64_t cycles, const ConfidenceParams& params) {
    const double s = static_cast<double>(cycles);
    return 24.0 * std::sqrt(s / (2.0 * g(cycles, params)));
}

std::uint64_t comm_length_for_cycles(std::uint64_t cycles, const ConfidenceParams& params) {
    if (cycles == 0) throw ContractViolation("communication length needs at least one cycle");
    const double dp = params.block_delta();
    const double target = comm_length_target(cycles, params);

    // m / B(m) is increasing on m >= 1 once ln(5.2/delta') exceeds ~3.62,
    // which every valid parameter set satisfies; bisection then returns the
    // same integer as a forward scan. Fall back to the scan otherwise.
    if (std::log(5.2 / dp) <= 3.7) {
        for (std::uint64_t m = 1; m <= kCommLengthCap; ++m) {
            if (ratio_reaches(m, dp, target)) return m;
        }
        throw std::runtime_error("communication length scan exceeded cap of 1e9");
    }
    if (ratio_reaches(1, dp, target)) return 1;
    std::uint64_t lo = 1;  // fails
    std::uint64_t hi = 2;
    while (!ratio_reaches(hi, dp, target)) {
        lo = hi;
        hi *= 2;
        if (lo > kCommLengthCap) throw std::runtime_error("communication length scan exceeded cap of 1e9");
    }
    while (hi - lo > 1) {
        const std::uint64_t mid = lo + (hi - lo) / 2;
        if (ratio_reaches(mid, dp, target)) hi = mid; else lo = mid;
    }
    if (hi > kCommLengthCap) throw std::runtime_error("communication length scan exceeded cap of 1e9");
    return hi;
}

std::uint64_t comm_length_f(std::uint64_t t, const ConfidenceParams& params) {
    const auto k = static_cast<std::uint64_t>(params.num_arms());
    if (t == 0 || t % k != 0) {
        throw ContractViolation("comm_length_f needs a positive multiple of K, got " + std::to_string(t));
    }
    return comm_length_for_cycles(t / k, params);
}

int unique_power_in_interval(double x, int base) {
    if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("x must be positive and finite");
    if (base < 2) throw DomainError("base must be at least 2");
    const long double lx = x;
    const long double lb = base;
    int a = static_cast<int>(std::ceil(std::log(lx) / std::log(lb)));
    while (std::pow(lb, a) < lx) ++a;
    while (std::pow(lb, a - 1) >= lx) --a;
    if (!(std::pow(lb, a) < lb * lx) || std::pow(lb, a + 1) < lb * lx) {
        throw std::logic_error("no unique power in [x, base*x)");
    }
    return a;
}

std::uint64_t power_of_nine(int w) {
    if (w < 0 || w > 20) throw DomainError("power_of_nine exponent must be in [0, 20]");
    std::uint64_t p = 1;
    for (int i = 0; i < w; ++i) p *= 9;
    return p;
}

std::uint64_t snapped_floor_ratio(std::uint64_t s, const ConfidenceParams& params) {
    double v = static_cast<double>(s) / g(s, params);
    const double r = std::nearbyint(v);
    if (std::fabs(v - r) <= kSnapTolerance) v = r;
    return static_cast<std::uint64_t>(std::floor(v));
}

namespace {

int nine_exponent(std::uint64_t v) {
    if (v == 0) return -1;
    int w = 0;
    while (v % 9 == 0) {
        v /= 9;
        ++w;
    }
    return v == 1 ? w : -1;
}

}  // namespace

PowerTrigger is_power_trigger_cycle(std::uint64_t s, const ConfidenceParams& params) {
    if (s == 0) throw DomainError("cycle index must be at least 1");
    const std::uint64_t cur = snapped_floor_ratio(s, params);
    const int w = nine_exponent(cur);
    if (w < 0) return {};
    if (s > 1 && snapped_floor_ratio(s - 1, params) == cur) return {};
    return {true, w};
}

BoundaryThresholds boundary_thresholds(const ConfidenceParams& params, ScanLimits limits) {
    const auto k = static_cast<std::uint64_t>(params.num_arms());
    const double dp = params.block_delta();
    BoundaryThresholds out;
    out.window = limits.window;

    const std::uint64_t s1 = first_stable_index(
        [&](std::uint64_t s) {
            const std::uint64_t f = comm_length_for_cycles(s, params);
            if (f < 2) return false;
            return static_cast<double>(f - 1) / bernstein_B(f - 1, dp) >= 1.0;
        },
        1, limits, "t_boundary1");
    out.s_boundary2 = first_stable_index(
        [&](std::uint64_t s) { return D(s + 1, params) <= D(s, params); }, 1, limits, "s_boundary2");
    const std::uint64_t s3 = first_stable_index(
        [&](std::uint64_t s) { return comm_length_for_cycles(s, params) <= s; }, 1, limits,
        "t_boundary3");

    out.t_boundary1 = k * s1;
    out.t_boundary3 = k * s3;
    std::uint64_t m = std::max({out.t_boundary1, k * out.s_boundary2, out.t_boundary3});
    if (m % k != 0) m += k - m % k;
    out.t_first_boundary = m;
    return out;
}

TriggerSchedule::TriggerSchedule(const ConfidenceParams& params) : params_(params) {}

void TriggerSchedule::extend() {
    // snapped floor(s/g(s)) is non-decreasing because s/g(s) increases for
    // every valid parameter set (g > 2 from n = 1 on).
    while (true) {
        const int w = next_exponent_++;
        const std::uint64_t target = power_of_nine(w);
        auto reaches = [&](std::uint64_t s) { return snapped_floor_ratio(s, params_) >= target; };
        std::uint64_t lo = cycles_.empty() ? 0 : cycles_.back();
        std::uint64_t hi = std::max<std::uint64_t>(1, lo * 2);
        while (!reaches(hi)) {
            lo = hi;
            hi *= 2;
        }
        while (hi - lo > 1) {
            const std::uint64_t mid = lo + (hi - lo) / 2;
            if (reaches(mid)) hi = mid; else lo = mid;
        }
        const PowerTrigger trig = is_power_trigger_cycle(hi, params_);
        if (trig.fired && trig.exponent == w) {
            cycles_.push_back(hi);
            return;
        }
    }
}

std::uint64_t TriggerSchedule::next_at_or_after(std::uint64_t s) {
    while (cycles_.empty() || cycles_.back() < s) extend();
    for (std::uint64_t c : cycles_) {
        if (c >= s) return c;
    }
    throw std::logic_error("trigger schedule exhausted");
}

int TriggerSchedule::exponent_of(std::uint64_t s) {
    const PowerTrigger trig = is_power_trigger_cycle(s, params_);
    if (!trig.fired) throw ContractViolation("cycle " + std::to_string(s) + " is not a trigger cycle");
    return trig.exponent;
}

}  // namespace collidecomm
