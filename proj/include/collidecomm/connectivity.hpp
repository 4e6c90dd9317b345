#pragma once

#include <cstdint>
#include <vector>

#include "collidecomm/schedule_math.hpp"

namespace collidecomm {

// Pull count and reward sum for one arm as seen by one player.
struct ArmStats {
    std::uint64_t count = 0;
    double sum = 0.0;

    void add(double reward) {
        ++count;
        sum += reward;
    }
    void add(std::uint64_t n, double total) {
        count += n;
        sum += total;
    }
    // Throws ContractViolation when count == 0.
    double mean() const;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

inline constexpr double kDefaultBlowup = 10.0;

struct ConnectivityGraph {
    double blowup = kDefaultBlowup;
    std::vector<double> means;
    std::vector<Interval> intervals;
    // Each component lists its arms in increasing index order. components[0]
    // is the top component.
    std::vector<std::vector<int>> components;
};

// Intervals [mean - C*D(N), mean + C*D(N)], closed; components of the overlap
// graph ordered by descending mean, ties to the lower smallest arm index.
ConnectivityGraph build_graph(const std::vector<ArmStats>& stats, double blowup,
                              const ConfidenceParams& params);

// Same construction from explicit centers and intervals.
std::vector<std::vector<int>> interval_components(const std::vector<double>& centers,
                                                  const std::vector<Interval>& intervals);

int conn_count(const ConnectivityGraph& graph);

}  // namespace collidecomm
