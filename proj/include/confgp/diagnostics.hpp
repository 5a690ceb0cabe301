#ifndef CONFGP_DIAGNOSTICS_HPP
#define CONFGP_DIAGNOSTICS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "confgp/errors.hpp"

namespace confgp {

struct ScaleReduction {
    double value = std::numeric_limits<double>::infinity();
    bool degenerate = false;  // zero within-chain variance
};

/// Potential scale reduction factor sqrt(((L-1)/L W + B/L) / W) over
/// equal-length chains of one scalar parameter.
inline ScaleReduction gelman_rubin(const std::vector<std::vector<double>>& chains) {
    require(chains.size() >= 2, "gelman_rubin: at least two chains are required");
    const std::size_t len = chains.front().size();
    require(len >= 10, "gelman_rubin: chains need at least 10 retained draws");
    for (const auto& c : chains) require(c.size() == len, "gelman_rubin: chains differ in length");

    const double L = static_cast<double>(len);
    const double m = static_cast<double>(chains.size());
    std::vector<double> means;
    double within = 0.0;
    for (const auto& c : chains) {
        double mean = 0.0;
        for (double v : c) mean += v;
        mean /= L;
        double ss = 0.0;
        for (double v : c) ss += (v - mean) * (v - mean);
        within += ss / (L - 1.0);
        means.push_back(mean);
    }
    within /= m;
    double grand = 0.0;
    for (double v : means) grand += v;
    grand /= m;
    double between = 0.0;
    for (double v : means) between += (v - grand) * (v - grand);
    between *= L / (m - 1.0);

    ScaleReduction out;
    if (!(within > 0.0)) {
        out.degenerate = true;
        return out;
    }
    out.value = std::sqrt(((L - 1.0) / L * within + between / L) / within);
    return out;
}

/// Shortest interval containing `mass` of the samples.
inline std::pair<double, double> hpd_interval(std::vector<double> samples, double mass = 0.95) {
    require(!samples.empty(), "hpd_interval: no samples");
    require(mass > 0.0 && mass <= 1.0, "hpd_interval: mass must lie in (0,1]");
    std::sort(samples.begin(), samples.end());
    const std::size_t n = samples.size();
    const auto k = std::min(n, static_cast<std::size_t>(std::ceil(mass * static_cast<double>(n))));
    if (k <= 1) return {samples.front(), samples.front()};
    std::size_t best = 0;
    double width = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + k - 1 < n; ++i) {
        const double w = samples[i + k - 1] - samples[i];
        if (w < width) {
            width = w;
            best = i;
        }
    }
    return {samples[best], samples[best + k - 1]};
}

}  // namespace confgp

#endif
