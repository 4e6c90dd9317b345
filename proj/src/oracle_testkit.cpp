#include "collidecomm/oracle_testkit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace collidecomm::oracle {

namespace {

int find_root(std::vector<int>& parent, int a) {
    while (parent[a] != a) a = parent[a];
    return a;
}

double snap_floor(double v) {
    const double r = std::round(v);
    if (std::abs(v - r) < 1e-9) return r;
    return std::floor(v);
}

// Exponent w with value == 9^w, or -1.
int nine_power(std::uint64_t value) {
    if (value == 0) return -1;
    int w = 0;
    while (value % 9 == 0) {
        value /= 9;
        ++w;
    }
    return value == 1 ? w : -1;
}

std::uint64_t floor_ratio(std::uint64_t s, int players, int arms, double delta) {
    return static_cast<std::uint64_t>(snap_floor(static_cast<double>(s) / naive_g(s, players, arms, delta)));
}

// Start of the first run of `window` consecutive indices satisfying pred.
template <typename Pred>
std::uint64_t stable_from(Pred pred, std::uint64_t window, std::uint64_t cap) {
    std::uint64_t run = 0;
    for (std::uint64_t s = 1; s <= cap; ++s) {
        run = pred(s) ? run + 1 : 0;
        if (run == window) return s - window + 1;
    }
    throw OracleFailure("boundary oracle scan hit its cap");
}

}  // namespace

std::vector<std::vector<int>> components_oracle(const std::vector<std::pair<double, double>>& intervals) {
    const int k = static_cast<int>(intervals.size());
    std::vector<int> parent(k);
    std::iota(parent.begin(), parent.end(), 0);
    for (int i = 0; i < k; ++i) {
        for (int j = i + 1; j < k; ++j) {
            const bool overlap = intervals[i].first <= intervals[j].second && intervals[j].first <= intervals[i].second;
            if (overlap) parent[find_root(parent, i)] = find_root(parent, j);
        }
    }
    std::vector<std::vector<int>> comps;
    std::vector<int> slot(k, -1);
    for (int i = 0; i < k; ++i) {
        const int r = find_root(parent, i);
        if (slot[r] < 0) {
            slot[r] = static_cast<int>(comps.size());
            comps.emplace_back();
        }
        comps[slot[r]].push_back(i);
    }
    auto avg_mid = [&](const std::vector<int>& c) {
        double s = 0.0;
        for (int a : c) s += 0.5 * (intervals[a].first + intervals[a].second);
        return s / static_cast<double>(c.size());
    };
    std::stable_sort(comps.begin(), comps.end(),
                     [&](const auto& a, const auto& b) { return avg_mid(a) > avg_mid(b); });
    return comps;
}

int power_oracle(double x, int base) {
    if (!(x > 0.0) || base < 2) throw OracleFailure("power_oracle needs x > 0 and base >= 2");
    const long double lx = x;
    const long double upper = lx * base;
    int hits = 0;
    int found = 0;
    for (int e = kPowerExponentMin; e <= kPowerExponentMax; ++e) {
        long double p = 1.0L;
        for (int i = 0; i < std::abs(e); ++i) p = e > 0 ? p * base : p / base;
        if (p >= lx && p < upper) {
            ++hits;
            found = e;
        }
    }
    if (hits != 1) {
        throw OracleFailure("power_oracle: " + std::to_string(hits) + " powers of " + std::to_string(base) +
                            " in [x, base*x) for x=" + std::to_string(x));
    }
    return found;
}

double naive_g(std::uint64_t n, int players, int arms, double delta) {
    const double nn = static_cast<double>(n);
    return std::log(4.0 * nn * nn * players * arms / delta);
}

double naive_D(std::uint64_t n, int players, int arms, double delta) {
    return std::sqrt(2.0 * naive_g(n, players, arms, delta) / static_cast<double>(n));
}

double naive_B(std::uint64_t n, double delta_prime) {
    return 2.0 * std::log(std::log(2.0 * static_cast<double>(n))) + std::log(5.2 / delta_prime);
}

double bernstein_coverage_oracle(double mean, std::uint64_t n_max, double delta_prime, int trials,
                                 std::uint64_t seed, BoundSide side) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(mean);
    const double spread = std::min(mean, 1.0 - mean);
    int violations = 0;
    for (int tr = 0; tr < trials; ++tr) {
        std::uint64_t ones = 0;
        bool violated = false;
        for (std::uint64_t n = 1; n <= n_max; ++n) {
            ones += coin(rng) ? 1 : 0;
            if (violated) continue;  // keep the stream length fixed
            const double nn = static_cast<double>(n);
            const double b = naive_B(n, delta_prime);
            const double width = 2.0 * std::sqrt(spread * b / nn) + b / nn;
            const double emp = static_cast<double>(ones) / nn;
            violated = side == BoundSide::lower ? emp < mean - width : emp > mean + width;
        }
        violations += violated ? 1 : 0;
    }
    return static_cast<double>(violations) / static_cast<double>(trials);
}

LogInversionResult log_inversion_oracle(double b, double c, std::uint64_t grid) {
    if (!(c > 0.0) || !(b * c >= std::exp(1.0) * (1 - 1e-12))) {
        throw OracleFailure("log_inversion_oracle needs c > 0 and b >= e/c");
    }
    LogInversionResult out;
    out.bound = 4.0 * b * std::log(c * b);
    out.scan_max = 10.0 * b * std::log(c * b);
    const double lo = 1.0 / c;
    // Points at lo * (scan_max/lo)^(i/grid), plus a uniform grid.
    const double span = std::log(out.scan_max / lo);
    for (std::uint64_t i = 1; i <= grid; ++i) {
        const double frac = static_cast<double>(i) / static_cast<double>(grid);
        for (double x : {lo * std::exp(span * frac), lo + (out.scan_max - lo) * frac}) {
            ++out.points;
            const double h = x / std::log(c * x);
            if (h <= b && x > out.bound) {
                out.holds = false;
                out.counterexample = x;
                return out;
            }
        }
    }
    return out;
}

std::uint64_t comm_length_oracle(std::uint64_t cycles, int players, int arms, double delta) {
    const double dp = delta / (4.0 * arms * arms * players);
    const double s = static_cast<double>(cycles);
    const double target = 24.0 * std::sqrt(s / (2.0 * naive_g(cycles, players, arms, delta)));
    for (std::uint64_t m = 1; m <= 1000000000ULL; ++m) {
        if (static_cast<double>(m) / naive_B(m, dp) >= target) return m;
    }
    throw OracleFailure("comm_length_oracle scan hit 1e9");
}

std::vector<TriggerHit> trigger_scan_oracle(std::uint64_t s_max, int players, int arms, double delta) {
    std::vector<TriggerHit> out;
    std::uint64_t prev = 0;
    for (std::uint64_t s = 1; s <= s_max; ++s) {
        const std::uint64_t v = floor_ratio(s, players, arms, delta);
        const int w = nine_power(v);
        if (w >= 0 && (s == 1 || prev != v)) out.push_back({s, w});
        prev = v;
    }
    return out;
}

BoundaryValues boundary_oracle(int players, int arms, double delta, std::uint64_t window, std::uint64_t cap) {
    const double dp = delta / (4.0 * arms * arms * players);
    const auto k = static_cast<std::uint64_t>(arms);
    BoundaryValues out;
    const std::uint64_t s1 = stable_from(
        [&](std::uint64_t s) {
            const std::uint64_t f = comm_length_oracle(s, players, arms, delta);
            return f >= 2 && static_cast<double>(f - 1) / naive_B(f - 1, dp) >= 1.0;
        },
        window, cap);
    out.s_boundary2 = stable_from(
        [&](std::uint64_t s) {
            return naive_D(s + 1, players, arms, delta) <= naive_D(s, players, arms, delta);
        },
        window, cap);
    const std::uint64_t s3 = stable_from(
        [&](std::uint64_t s) { return comm_length_oracle(s, players, arms, delta) <= s; }, window, cap);
    out.t_boundary1 = k * s1;
    out.t_boundary3 = k * s3;
    out.t_first_boundary = std::max({out.t_boundary1, k * out.s_boundary2, out.t_boundary3});
    return out;
}

}  // namespace collidecomm::oracle
