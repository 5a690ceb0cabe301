#ifndef CONFGP_OPTIMIZER_HPP
#define CONFGP_OPTIMIZER_HPP

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "confgp/errors.hpp"

namespace confgp {

struct Bounds {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    Eigen::VectorXd clamp(const Eigen::VectorXd& x) const { return x.cwiseMax(lower).cwiseMin(upper); }
};

struct OptimizerOptions {
    int max_iterations = 200;
    int memory = 8;
    // Stop when the relative decrease of f over one iteration drops below this.
    double relative_tolerance = 1e-9;
    // ... or when the projected gradient's infinity norm drops below this.
    double gradient_tolerance = 1e-6;
    double difference_step = 1e-5;
};

struct OptimizerResult {
    Eigen::VectorXd x;
    double value = std::numeric_limits<double>::infinity();
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    std::string message;
};

/// Central-difference gradient. Near a bound, the step is mirrored to the
/// feasible side and a one-sided difference is used instead.
template <class F>
Eigen::VectorXd central_difference_gradient(F&& f, const Eigen::VectorXd& x, double step, const Bounds* bounds = nullptr,
                                            int* evaluations = nullptr, double fx = std::numeric_limits<double>::quiet_NaN()) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = step * std::max(1.0, std::abs(x(i)));
        const bool up_ok = !bounds || x(i) + h <= bounds->upper(i);
        const bool down_ok = !bounds || x(i) - h >= bounds->lower(i);
        double fp = 0.0, fm = 0.0;
        if (up_ok && down_ok) {
            probe(i) = x(i) + h;
            fp = f(probe);
            probe(i) = x(i) - h;
            fm = f(probe);
            if (evaluations) *evaluations += 2;
            if (std::isfinite(fp) && std::isfinite(fm)) {
                g(i) = (fp - fm) / (2.0 * h);
                probe(i) = x(i);
                continue;
            }
        }
        // one-sided fallback
        const double f0 = std::isfinite(fx) ? fx : f(x);
        if (up_ok) {
            probe(i) = x(i) + h;
            fp = f(probe);
            g(i) = (fp - f0) / h;
        } else {
            probe(i) = x(i) - h;
            fm = f(probe);
            g(i) = (f0 - fm) / h;
        }
        if (evaluations) *evaluations += std::isfinite(fx) ? 1 : 2;
        if (!std::isfinite(g(i))) g(i) = 0.0;
        probe(i) = x(i);
    }
    return g;
}

/// Bound-constrained limited-memory BFGS with numerical gradients.
///
/// Directions come from the two-loop recursion restricted to the variables
/// that are not held at a bound; steps are projected back into the box and
/// accepted by backtracking on the Armijo condition along the projected path.
/// Objective values of +inf (e.g. a failed factorization) are treated as
/// infeasible and trigger further backtracking.
template <class F>
OptimizerResult minimize_bounded(F&& f, const Eigen::VectorXd& start, const Bounds& bounds,
                                 const OptimizerOptions& opt = {}) {
    const auto n = start.size();
    require(bounds.lower.size() == n && bounds.upper.size() == n, "minimize_bounded: bounds size mismatch");
    require((bounds.lower.array() <= bounds.upper.array()).all(), "minimize_bounded: inverted bounds");

    OptimizerResult res;
    Eigen::VectorXd x = bounds.clamp(start);
    double fx = f(x);
    res.evaluations = 1;
    if (!std::isfinite(fx)) {
        res.x = x;
        res.value = fx;
        res.message = "objective not finite at the starting point";
        return res;
    }
    auto grad = [&](const Eigen::VectorXd& at, double f_at) {
        return central_difference_gradient(f, at, opt.difference_step, &bounds, &res.evaluations, f_at);
    };
    Eigen::VectorXd g = grad(x, fx);

    std::deque<Eigen::VectorXd> s_hist, y_hist;
    auto projected_gradient_norm = [&](const Eigen::VectorXd& at, const Eigen::VectorXd& gr) {
        return (bounds.clamp(at - gr) - at).cwiseAbs().maxCoeff();
    };

    for (int iter = 1; iter <= opt.max_iterations; ++iter) {
        res.iterations = iter;
        if (projected_gradient_norm(x, g) < opt.gradient_tolerance) {
            res.converged = true;
            res.message = "projected gradient below tolerance";
            break;
        }
        // free variables: not pinned at a bound by the gradient
        Eigen::ArrayXd free = Eigen::ArrayXd::Ones(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double span = 1e-12 * std::max(1.0, std::abs(x(i)));
            if ((x(i) <= bounds.lower(i) + span && g(i) > 0.0) || (x(i) >= bounds.upper(i) - span && g(i) < 0.0))
                free(i) = 0.0;
        }
        const Eigen::VectorXd gf = (g.array() * free).matrix();

        // two-loop recursion
        Eigen::VectorXd d = -gf;
        if (!s_hist.empty()) {
            const auto m = s_hist.size();
            std::vector<double> a(m), rho(m);
            Eigen::VectorXd qv = gf;
            for (std::size_t k = m; k-- > 0;) {
                rho[k] = 1.0 / y_hist[k].dot(s_hist[k]);
                a[k] = rho[k] * s_hist[k].dot(qv);
                qv -= a[k] * y_hist[k];
            }
            const double gamma0 = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
            Eigen::VectorXd r = gamma0 * qv;
            for (std::size_t k = 0; k < m; ++k) {
                const double b = rho[k] * y_hist[k].dot(r);
                r += (a[k] - b) * s_hist[k];
            }
            d = -(r.array() * free).matrix();
            if (d.dot(gf) >= 0.0) {
                s_hist.clear();
                y_hist.clear();
                d = -gf;
            }
        }
        if (s_hist.empty()) {
            const double norm = d.norm();
            if (norm > 1.0) d /= norm;  // first step at most unit length
        }

        double step = 1.0;
        Eigen::VectorXd x_new;
        double f_new = std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            x_new = bounds.clamp(x + step * d);
            f_new = f(x_new);
            ++res.evaluations;
            if (std::isfinite(f_new) && f_new <= fx + 1e-4 * g.dot(x_new - x)) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (!s_hist.empty()) {
                s_hist.clear();
                y_hist.clear();
                continue;  // retry with steepest descent
            }
            res.converged = true;
            res.message = "line search cannot decrease the objective";
            break;
        }
        const Eigen::VectorXd g_new = grad(x_new, f_new);
        const Eigen::VectorXd s = x_new - x;
        const Eigen::VectorXd yv = g_new - g;
        if (s.dot(yv) > 1e-10 * yv.squaredNorm()) {
            s_hist.push_back(s);
            y_hist.push_back(yv);
            if (static_cast<int>(s_hist.size()) > opt.memory) {
                s_hist.pop_front();
                y_hist.pop_front();
            }
        }
        const double decrease = fx - f_new;
        x = x_new;
        fx = f_new;
        g = g_new;
        if (decrease <= opt.relative_tolerance * std::max({std::abs(fx), std::abs(fx + decrease), 1.0})) {
            res.converged = true;
            res.message = "relative reduction below tolerance";
            break;
        }
    }
    if (!res.converged) res.message = "iteration limit reached";
    res.x = x;
    res.value = fx;
    return res;
}

}  // namespace confgp

#endif
