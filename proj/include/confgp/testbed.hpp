#ifndef CONFGP_TESTBED_HPP
#define CONFGP_TESTBED_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "confgp/errors.hpp"

namespace confgp {

enum class TestFunctionName { currin, park };

inline std::string to_string(TestFunctionName f) { return f == TestFunctionName::currin ? "currin" : "park"; }

inline TestFunctionName test_function_from_string(const std::string& s) {
    if (s == "currin") return TestFunctionName::currin;
    if (s == "park") return TestFunctionName::park;
    throw StructuralError("unknown test function '" + s + "'");
}

inline int input_dimension(TestFunctionName f) { return f == TestFunctionName::currin ? 2 : 4; }

namespace detail {
template <class X>
void check_unit_cube(const Eigen::MatrixBase<X>& x, int p, const char* who) {
    require(x.size() == p, std::string(who) + ": expected " + std::to_string(p) + " inputs");
    for (Eigen::Index s = 0; s < x.size(); ++s)
        require(x(s) >= 0.0 && x(s) <= 1.0, std::string(who) + ": input outside [0,1]");
}
}  // namespace detail

/// Currin exponential function on [0,1]^2; the x2 -> 0 limit of the leading
/// factor (1) is used at x2 = 0.
template <class X>
double currin(const Eigen::MatrixBase<X>& x) {
    detail::check_unit_cube(x, 2, "currin");
    const double x1 = x(0), x2 = x(1);
    const double lead = x2 > 0.0 ? 1.0 - std::exp(-1.0 / (2.0 * x2)) : 1.0;
    const double num = ((2300.0 * x1 + 1900.0) * x1 + 2092.0) * x1 + 60.0;
    const double den = ((100.0 * x1 + 500.0) * x1 + 4.0) * x1 + 20.0;
    return lead * num / den;
}

/// Park function on [0,1]^4 with x1 clamped to 1e-10 inside the square-root
/// term, so x1 = 0 evaluates to (nearly) the analytic limit.
template <class X>
double park(const Eigen::MatrixBase<X>& x) {
    detail::check_unit_cube(x, 4, "park");
    const double x1 = std::max(x(0), 1e-10), x2 = x(1), x3 = x(2), x4 = x(3);
    const double first = 0.5 * x1 * (std::sqrt(1.0 + (x2 + x3 * x3) * x4 / (x1 * x1)) - 1.0);
    return first + (x(0) + 3.0 * x4) * std::exp(1.0 + std::sin(x3));
}

inline double evaluate(TestFunctionName f, const Eigen::VectorXd& x) {
    return f == TestFunctionName::currin ? currin(x) : park(x);
}

/// Node coordinates {0, h, 2h, ...} clipped to [0,1], with 1 appended.
inline std::vector<double> grid_nodes(double h) {
    require(h > 0.0 && h <= 1.0, "grid_nodes: cell size must lie in (0,1]");
    std::vector<double> nodes;
    for (long k = 0;; ++k) {
        const double v = static_cast<double>(k) * h;
        if (v >= 1.0 - 1e-12) break;
        nodes.push_back(v);
    }
    nodes.push_back(1.0);
    return nodes;
}

/// Multilinear interpolant of `phi` on the grid with cell sizes `cell`.
/// This is the multi-fidelity simulator eta(x, t) with t = cell.
inline double grid_interpolate(const std::function<double(const Eigen::VectorXd&)>& phi, const Eigen::VectorXd& cell,
                               const Eigen::VectorXd& x) {
    const auto p = x.size();
    require(cell.size() == p, "grid_interpolate: one cell size per input dimension required");
    std::vector<double> lo(p), hi(p), w(p);
    for (Eigen::Index s = 0; s < p; ++s) {
        require(x(s) >= 0.0 && x(s) <= 1.0, "grid_interpolate: input outside [0,1]");
        const auto nodes = grid_nodes(cell(s));
        auto it = std::upper_bound(nodes.begin(), nodes.end(), x(s));
        std::size_t upper = static_cast<std::size_t>(it - nodes.begin());
        upper = std::clamp<std::size_t>(upper, 1, nodes.size() - 1);
        lo[s] = nodes[upper - 1];
        hi[s] = nodes[upper];
        w[s] = (x(s) - lo[s]) / (hi[s] - lo[s]);
    }
    double acc = 0.0;
    Eigen::VectorXd corner(p);
    for (unsigned mask = 0; mask < (1u << p); ++mask) {
        double weight = 1.0;
        for (Eigen::Index s = 0; s < p; ++s) {
            const bool up = (mask >> s) & 1u;
            corner(s) = up ? hi[s] : lo[s];
            weight *= up ? w[s] : 1.0 - w[s];
        }
        if (weight != 0.0) acc += weight * phi(corner);
    }
    return acc;
}

inline double grid_interpolate(TestFunctionName f, const Eigen::VectorXd& cell, const Eigen::VectorXd& x) {
    require(x.size() == input_dimension(f), "grid_interpolate: wrong input dimension for " + to_string(f));
    return grid_interpolate([f](const Eigen::VectorXd& c) { return evaluate(f, c); }, cell, x);
}

}  // namespace confgp

#endif
