#ifndef CONFGP_DESIGN_HPP
#define CONFGP_DESIGN_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "confgp/errors.hpp"
#include "confgp/random.hpp"

namespace confgp {

enum class ColumnRole { input, fidelity };
enum class DesignProvenance { maximin_lhd, maxpro, crossed, paired, imported };

inline std::string to_string(DesignProvenance p) {
    switch (p) {
        case DesignProvenance::maximin_lhd: return "maximin-lhd";
        case DesignProvenance::maxpro: return "maxpro";
        case DesignProvenance::crossed: return "crossed";
        case DesignProvenance::paired: return "paired";
        case DesignProvenance::imported: return "imported";
    }
    return "?";
}

struct Range {
    double lo = 0.0;
    double hi = 1.0;
};

/// n x d design with a role and target range per column.
struct Design {
    Eigen::MatrixXd points;
    std::vector<ColumnRole> roles;
    std::vector<Range> ranges;
    DesignProvenance provenance = DesignProvenance::imported;
    double criterion = std::numeric_limits<double>::quiet_NaN();

    int n() const { return static_cast<int>(points.rows()); }
    int d() const { return static_cast<int>(points.cols()); }

    int count(ColumnRole role) const {
        return static_cast<int>(std::count(roles.begin(), roles.end(), role));
    }

    /// Columns with the given role, in order.
    Eigen::MatrixXd columns(ColumnRole role) const {
        Eigen::MatrixXd out(points.rows(), count(role));
        int c = 0;
        for (int j = 0; j < d(); ++j)
            if (roles[static_cast<std::size_t>(j)] == role) out.col(c++) = points.col(j);
        return out;
    }

    /// Tag the first `inputs` columns as inputs and the rest as fidelities.
    Design& with_roles(int inputs) {
        require(inputs >= 0 && inputs <= d(), "Design::with_roles: bad input column count");
        for (int j = 0; j < d(); ++j)
            roles[static_cast<std::size_t>(j)] = j < inputs ? ColumnRole::input : ColumnRole::fidelity;
        return *this;
    }
};

inline Design make_design(Eigen::MatrixXd points, DesignProvenance provenance) {
    Design out;
    out.roles.assign(static_cast<std::size_t>(points.cols()), ColumnRole::input);
    out.ranges.assign(static_cast<std::size_t>(points.cols()), Range{});
    out.points = std::move(points);
    out.provenance = provenance;
    return out;
}

namespace detail {

inline Eigen::MatrixXd random_midpoint_lhd(int n, int d, Rng& rng) {
    Eigen::MatrixXd pts(n, d);
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int j = 0; j < d; ++j) {
        std::iota(perm.begin(), perm.end(), 0);
        for (int i = n - 1; i > 0; --i) {
            const int k = std::uniform_int_distribution<int>(0, i)(rng);
            std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(k)]);
        }
        for (int i = 0; i < n; ++i) pts(i, j) = (perm[static_cast<std::size_t>(i)] + 0.5) / n;
    }
    return pts;
}

inline double min_pairwise_distance(const Eigen::MatrixXd& pts) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < pts.rows(); ++i)
        for (Eigen::Index j = i + 1; j < pts.rows(); ++j)
            best = std::min(best, (pts.row(i) - pts.row(j)).squaredNorm());
    return std::sqrt(best);
}

// log of prod_l (x_il - x_jl)^{-2}
inline double log_pair_product(const Eigen::MatrixXd& pts, Eigen::Index i, Eigen::Index j) {
    double acc = 0.0;
    for (Eigen::Index l = 0; l < pts.cols(); ++l) acc -= 2.0 * std::log(std::abs(pts(i, l) - pts(j, l)));
    return acc;
}

}  // namespace detail

/// Minimum Euclidean distance between any two rows.
inline double min_distance(const Design& d) { return detail::min_pairwise_distance(d.points); }

/// MaxPro criterion [ C(n,2)^{-1} sum_{i<j} prod_l (x_il - x_jl)^{-2} ]^{1/d}.
inline double maxpro_criterion(const Eigen::MatrixXd& pts) {
    const auto n = pts.rows();
    require(n >= 2, "maxpro_criterion: need at least two points");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) acc += std::exp(detail::log_pair_product(pts, i, j));
    const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
    return std::pow(acc / pairs, 1.0 / static_cast<double>(pts.cols()));
}

/// Maximin Latin hypercube with stratum-midpoint levels. Random within-column
/// swaps are kept whenever the minimum distance does not decrease.
inline Design maximin_lhd(int n, int d, std::uint64_t seed, int iterations = 5000) {
    require(n >= 2 && d >= 1, "maximin_lhd: need n >= 2 and d >= 1");
    Rng rng(seed);
    Eigen::MatrixXd pts = detail::random_midpoint_lhd(n, d, rng);
    double current = detail::min_pairwise_distance(pts);
    std::uniform_int_distribution<int> row(0, n - 1), col(0, d - 1);
    for (int it = 0; it < iterations; ++it) {
        const int c = col(rng);
        const int a = row(rng);
        int b = row(rng);
        if (a == b) continue;
        std::swap(pts(a, c), pts(b, c));
        const double cand = detail::min_pairwise_distance(pts);
        if (cand >= current)
            current = cand;
        else
            std::swap(pts(a, c), pts(b, c));
    }
    Design out = make_design(std::move(pts), DesignProvenance::maximin_lhd);
    out.criterion = current;
    return out;
}

struct AnnealSchedule {
    int proposals = 10000;
    double cooling = 0.999;
    double initial_acceptance = 0.5;  // target acceptance of early uphill moves
};

/// MaxPro Latin hypercube by simulated annealing over within-column swaps.
/// The annealing runs on log psi; the best design visited is returned.
inline Design maxpro(int n, int d, std::uint64_t seed, const AnnealSchedule& schedule = {}) {
    require(n >= 2 && d >= 1, "maxpro: need n >= 2 and d >= 1");
    Rng rng(seed);
    Eigen::MatrixXd pts = detail::random_midpoint_lhd(n, d, rng);

    // pairwise log products, kept in sync with pts
    Eigen::MatrixXd lp = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) lp(i, j) = lp(j, i) = detail::log_pair_product(pts, i, j);
    auto total = [&] {
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) acc += std::exp(lp(i, j));
        return acc;
    };
    double sum = total();
    const double pairs = 0.5 * n * (n - 1.0);
    auto log_psi = [&](double s) { return std::log(s / pairs) / d; };

    std::uniform_int_distribution<int> row(0, n - 1), col(0, d - 1);
    Eigen::VectorXd new_a(n), new_b(n);
    auto propose = [&](int a, int b, int c) {
        std::swap(pts(a, c), pts(b, c));
        double delta = 0.0;
        for (int k = 0; k < n; ++k) {
            if (k == a || k == b) continue;
            new_a(k) = detail::log_pair_product(pts, a, k);
            new_b(k) = detail::log_pair_product(pts, b, k);
            delta += std::exp(new_a(k)) - std::exp(lp(a, k)) + std::exp(new_b(k)) - std::exp(lp(b, k));
        }
        return delta;  // pair (a,b) itself is unchanged by a swap
    };
    auto commit = [&](int a, int b) {
        for (int k = 0; k < n; ++k) {
            if (k == a || k == b) continue;
            lp(a, k) = lp(k, a) = new_a(k);
            lp(b, k) = lp(k, b) = new_b(k);
        }
    };

    const double initial = log_psi(sum);
    // temperature: mean uphill change in log psi over a probe sample
    double uphill = 0.0;
    int uphill_count = 0;
    for (int k = 0; k < 200 && n > 1; ++k) {
        const int c = col(rng), a = row(rng), b = row(rng);
        if (a == b) continue;
        const double delta = propose(a, b, c);
        std::swap(pts(a, c), pts(b, c));  // undo
        const double change = log_psi(sum + delta) - log_psi(sum);
        if (change > 0.0 && std::isfinite(change)) {
            uphill += change;
            ++uphill_count;
        }
    }
    double temperature = uphill_count > 0 ? -(uphill / uphill_count) / std::log(schedule.initial_acceptance) : 1e-3;

    Eigen::MatrixXd best = pts;
    double best_value = initial;
    double current = initial;
    for (int it = 0; it < schedule.proposals; ++it, temperature *= schedule.cooling) {
        const int c = col(rng), a = row(rng), b = row(rng);
        if (a == b) continue;
        const double delta = propose(a, b, c);
        const double cand = log_psi(sum + delta);
        const double change = cand - current;
        if (change <= 0.0 || draw_uniform(rng) < std::exp(-change / temperature)) {
            commit(a, b);
            sum += delta;
            current = cand;
            if (current < best_value) {
                best_value = current;
                best = pts;
            }
        } else {
            std::swap(pts(a, c), pts(b, c));
        }
        if (it % 1000 == 999) {  // drift control for the running sum
            sum = total();
            current = log_psi(sum);
        }
    }
    Design out = make_design(std::move(best), DesignProvenance::maxpro);
    out.criterion = maxpro_criterion(out.points);
    return out;
}

/// Affine map of each column from [0,1] to its target range.
inline Design map_ranges(const Design& design, const std::vector<Range>& ranges) {
    require(static_cast<int>(ranges.size()) == design.d(), "map_ranges: one range per column required");
    Design out = design;
    for (int j = 0; j < design.d(); ++j) {
        const Range r = ranges[static_cast<std::size_t>(j)];
        require(r.lo < r.hi, "map_ranges: inverted range for column " + std::to_string(j));
        out.points.col(j) = (r.lo + (r.hi - r.lo) * design.points.col(j).array()).matrix();
        out.ranges[static_cast<std::size_t>(j)] = r;
    }
    return out;
}

namespace detail {
inline void require_single_role(const Design& d, ColumnRole role, const char* who) {
    require(d.count(role) == d.d(), std::string(who) + ": design columns must all carry one role");
}
}  // namespace detail

/// Cartesian product: every input point paired with every fidelity point.
inline Design crossed_array(const Design& inputs, const Design& fidelities) {
    detail::require_single_role(inputs, ColumnRole::input, "crossed_array");
    detail::require_single_role(fidelities, ColumnRole::fidelity, "crossed_array");
    const int n1 = inputs.n(), n2 = fidelities.n();
    Design out;
    out.points.resize(static_cast<Eigen::Index>(n1) * n2, inputs.d() + fidelities.d());
    for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n2; ++j) {
            const auto r = static_cast<Eigen::Index>(i) * n2 + j;
            out.points.row(r) << inputs.points.row(i), fidelities.points.row(j);
        }
    out.roles = inputs.roles;
    out.roles.insert(out.roles.end(), fidelities.roles.begin(), fidelities.roles.end());
    out.ranges = inputs.ranges;
    out.ranges.insert(out.ranges.end(), fidelities.ranges.begin(), fidelities.ranges.end());
    out.provenance = DesignProvenance::crossed;
    return out;
}

/// Degenerate cross: each input point gets one randomly drawn fidelity row.
inline Design paired_array(const Design& inputs, const Design& fidelities, std::uint64_t seed) {
    detail::require_single_role(inputs, ColumnRole::input, "paired_array");
    detail::require_single_role(fidelities, ColumnRole::fidelity, "paired_array");
    require(fidelities.n() >= 1, "paired_array: empty fidelity design");
    Rng rng(seed);
    std::uniform_int_distribution<int> pick(0, fidelities.n() - 1);
    Design out;
    out.points.resize(inputs.n(), inputs.d() + fidelities.d());
    for (int i = 0; i < inputs.n(); ++i) out.points.row(i) << inputs.points.row(i), fidelities.points.row(pick(rng));
    out.roles = inputs.roles;
    out.roles.insert(out.roles.end(), fidelities.roles.begin(), fidelities.roles.end());
    out.ranges = inputs.ranges;
    out.ranges.insert(out.ranges.end(), fidelities.ranges.begin(), fidelities.ranges.end());
    out.provenance = DesignProvenance::paired;
    return out;
}

}  // namespace confgp

#endif
