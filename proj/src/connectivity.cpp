#include "collidecomm/connectivity.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace collidecomm {

double ArmStats::mean() const {
    if (count == 0) throw ContractViolation("empirical mean of an arm with no samples");
    return sum / static_cast<double>(count);
}

std::vector<std::vector<int>> interval_components(const std::vector<double>& centers,
                                                  const std::vector<Interval>& intervals) {
    const int k = static_cast<int>(intervals.size());
    if (centers.size() != intervals.size()) throw ContractViolation("centers and intervals differ in size");

    std::vector<int> by_lo(k);
    std::iota(by_lo.begin(), by_lo.end(), 0);
    std::sort(by_lo.begin(), by_lo.end(), [&](int a, int b) {
        if (intervals[a].lo != intervals[b].lo) return intervals[a].lo < intervals[b].lo;
        return a < b;
    });

    // Sweep by left endpoint; closed intervals, so touching endpoints merge.
    std::vector<std::vector<int>> comps;
    double reach = 0.0;
    for (int a : by_lo) {
        if (comps.empty() || intervals[a].lo > reach) {
            comps.push_back({a});
            reach = intervals[a].hi;
        } else {
            comps.back().push_back(a);
            reach = std::max(reach, intervals[a].hi);
        }
    }

    struct Keyed {
        double top;
        int smallest;
        std::vector<int> arms;
    };
    std::vector<Keyed> keyed;
    keyed.reserve(comps.size());
    for (auto& c : comps) {
        std::sort(c.begin(), c.end());
        double top = centers[c.front()];
        for (int a : c) top = std::max(top, centers[a]);
        keyed.push_back({top, c.front(), std::move(c)});
    }
    std::sort(keyed.begin(), keyed.end(), [](const Keyed& x, const Keyed& y) {
        if (x.top != y.top) return x.top > y.top;
        return x.smallest < y.smallest;
    });

    std::vector<std::vector<int>> out;
    out.reserve(keyed.size());
    for (auto& kc : keyed) out.push_back(std::move(kc.arms));

    // Order convexity: walking arms by descending center never re-enters a
    // component that was already left.
    std::vector<int> comp_of(k, -1);
    for (int c = 0; c < static_cast<int>(out.size()); ++c) {
        for (int a : out[c]) comp_of[a] = c;
    }
    std::vector<int> by_center(k);
    std::iota(by_center.begin(), by_center.end(), 0);
    std::stable_sort(by_center.begin(), by_center.end(),
                     [&](int a, int b) { return centers[a] > centers[b]; });
    std::vector<char> closed(out.size(), 0);
    int current = -1;
    for (int a : by_center) {
        const int c = comp_of[a];
        if (c == current) continue;
        if (closed[c]) {
            // Equal centers in different components are allowed to interleave.
            bool tie = false;
            for (int b : out[c]) tie = tie || centers[b] == centers[a];
            if (!tie) throw std::logic_error("interval components are not contiguous in mean order");
        }
        if (current >= 0) closed[current] = 1;
        current = c;
    }
    return out;
}

ConnectivityGraph build_graph(const std::vector<ArmStats>& stats, double blowup,
                              const ConfidenceParams& params) {
    ConnectivityGraph graph;
    graph.blowup = blowup;
    graph.means.reserve(stats.size());
    graph.intervals.reserve(stats.size());
    for (const auto& s : stats) {
        if (s.count == 0) throw ContractViolation("build_graph needs every arm pulled at least once");
        const double m = s.mean();
        const double w = blowup * D(s.count, params);
        graph.means.push_back(m);
        graph.intervals.push_back({m - w, m + w});
    }
    graph.components = interval_components(graph.means, graph.intervals);
    return graph;
}

int conn_count(const ConnectivityGraph& graph) {
    return static_cast<int>(graph.components.size());
}

}  // namespace collidecomm
