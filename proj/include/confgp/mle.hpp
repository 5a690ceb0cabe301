#ifndef CONFGP_MLE_HPP
#define CONFGP_MLE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "confgp/covariance_cache.hpp"
#include "confgp/dataset.hpp"
#include "confgp/errors.hpp"
#include "confgp/gp_core.hpp"
#include "confgp/kernels.hpp"
#include "confgp/optimizer.hpp"
#include "confgp/random.hpp"

namespace confgp {

/// Maps the free covariance parameters of one emulator kind to and from an
/// unconstrained log-space vector.
///
/// Layout: log gamma (p), log theta (q, standard-gp and config-*), log alpha
/// (p, twy-* and config-*), log sigma1^2, log sigma2^2 (twy-* and config-*).
class LogParameterMap {
public:
    LogParameterMap(EmulatorKind kind, int p, int q) : kind_(kind), p_(p), q_(q) {}

    bool has_theta() const {
        return kind_ == EmulatorKind::standard_gp || kind_ == EmulatorKind::config_k1 ||
               kind_ == EmulatorKind::config_k2;
    }
    bool has_alpha() const { return has_discrepancy(kind_); }

    int size() const { return p_ + (has_theta() ? q_ : 0) + (has_alpha() ? p_ : 0) + 1 + (has_alpha() ? 1 : 0); }

    VectorXd pack(const KernelParams& k) const {
        VectorXd v(size());
        int o = 0;
        v.segment(o, p_) = k.gamma.array().log().matrix();
        o += p_;
        if (has_theta()) {
            v.segment(o, q_) = k.theta.array().log().matrix();
            o += q_;
        }
        if (has_alpha()) {
            v.segment(o, p_) = k.alpha.array().log().matrix();
            o += p_;
        }
        v(o++) = std::log(k.sigma1_sq);
        if (has_alpha()) v(o++) = std::log(k.sigma2_sq);
        return v;
    }

    // Overwrites the free fields of `k` from the log-space vector.
    void unpack(const VectorXd& v, KernelParams& k) const {
        int o = 0;
        k.gamma = v.segment(o, p_).array().exp().matrix();
        o += p_;
        if (has_theta()) {
            k.theta = v.segment(o, q_).array().exp().matrix();
            o += q_;
        }
        if (has_alpha()) {
            k.alpha = v.segment(o, p_).array().exp().matrix();
            o += p_;
        }
        k.sigma1_sq = std::exp(v(o++));
        if (has_alpha()) k.sigma2_sq = std::exp(v(o++));
    }

    /// Box in log space. Variances are bounded relative to the output variance.
    Bounds bounds(double output_variance) const {
        const double vy = std::max(output_variance, 1e-12);
        Bounds b{VectorXd(size()), VectorXd(size())};
        int o = 0;
        auto fill = [&](int count, double lo, double hi) {
            b.lower.segment(o, count).setConstant(std::log(lo));
            b.upper.segment(o, count).setConstant(std::log(hi));
            o += count;
        };
        fill(p_, 1e-3, 1e3);
        if (has_theta()) fill(q_, 1e-3, 1e3);
        if (has_alpha()) fill(p_, 1e-3, 1e3);
        fill(1, 1e-6 * vy, 1e4 * vy);
        if (has_alpha()) fill(1, 1e-8 * vy, 1e8 * vy);
        return b;
    }

private:
    EmulatorKind kind_;
    int p_;
    int q_;
};

/// Free parameters once the overall scale is profiled out: the log weights of
/// LogParameterMap, then log(sigma2^2 / sigma1^2) for kinds with a discrepancy.
/// unpack() leaves sigma1^2 = 1, so the assembled matrix is a correlation-scale R.
class ProfiledParameterMap {
public:
    static constexpr double ratio_min = 1e-8, ratio_max = 1e8;
    // bounds on the profiled scale, relative to var(y)
    static constexpr double scale_min = 1e-6, scale_max = 1e4;

    ProfiledParameterMap(EmulatorKind kind, int p, int q) : full_(kind, p, q) {}

    int size() const { return full_.size() - 1; }
    bool has_ratio() const { return full_.has_alpha(); }

    VectorXd pack(const KernelParams& k) const {
        const VectorXd v = full_.pack(k);
        VectorXd out(size());
        const int o = weights();
        out.head(o) = v.head(o);
        if (has_ratio()) out(o) = v(o + 1) - v(o);
        return out;
    }

    void unpack(const VectorXd& v, KernelParams& k) const {
        VectorXd full(full_.size());
        const int o = weights();
        full.head(o) = v.head(o);
        full(o) = 0.0;
        if (has_ratio()) full(o + 1) = v(o);
        full_.unpack(full, k);
    }

    Bounds bounds() const {
        const Bounds b = full_.bounds(1.0);
        const int o = weights();
        Bounds out{VectorXd(size()), VectorXd(size())};
        out.lower.head(o) = b.lower.head(o);
        out.upper.head(o) = b.upper.head(o);
        if (has_ratio()) {
            out.lower(o) = std::log(ratio_min);
            out.upper(o) = std::log(ratio_max);
        }
        return out;
    }

private:
    int weights() const { return full_.size() - (has_ratio() ? 2 : 1); }
    LogParameterMap full_;
};

struct ScaleProfile {
    double log_likelihood = -std::numeric_limits<double>::infinity();
    double scale = 1.0;
    double jitter = 0.0;
};

/// Log-likelihood of y under N(F beta, s R), maximized over beta (GLS) and
/// over s in [lo, hi]. The unconstrained optimum is s = r' R^{-1} r / n and the
/// likelihood is unimodal in s, so clamping gives the constrained optimum.
inline ScaleProfile profile_scale(const MatrixXd& R, const MatrixXd& F, const VectorXd& y, double lo, double hi,
                                  const JitterPolicy& policy = {}) {
    const CovFactor f = cholesky_factor(R, policy);
    const GlsFit g = gls_fit(f, F, y);
    const double n = static_cast<double>(y.size());
    const double q = f.quad_form(y - F * g.beta);
    ScaleProfile out;
    out.scale = std::clamp(q / n, lo, hi);
    out.jitter = f.jitter;
    out.log_likelihood =
        -0.5 * n * std::log(2.0 * std::numbers::pi) - 0.5 * (f.log_det + n * std::log(out.scale)) - 0.5 * q / out.scale;
    return out;
}

inline double sample_variance(const VectorXd& y) {
    if (y.size() < 2) return 0.0;
    const double mean = y.mean();
    return (y.array() - mean).square().sum() / static_cast<double>(y.size() - 1);
}

struct AlphaInit {
    VectorXd weights;
    bool degenerate = false;  // y had zero variance; unit weights returned
};

/// Input weights of a plain SE-kernel GP fitted to (x -> y), ignoring the
/// fidelity columns. Used to initialize both gamma and alpha.
inline AlphaInit init_alpha(const Dataset& data, BasisKind basis = BasisKind::linear_x) {
    require(data.n() >= 3, "init_alpha: need at least 3 training records");
    AlphaInit out;
    const double vy = sample_variance(data.outputs());
    if (!(vy > 0.0)) {
        out.weights = VectorXd::Ones(data.p());
        out.degenerate = true;
        return out;
    }
    const Dataset plain(data.inputs(), MatrixXd(data.n(), 0), data.outputs());
    const EmulatorKind kind = EmulatorKind::high_fidelity_gp;
    KernelParams k = default_params(kind, data.p(), 0, basis == BasisKind::linear_x_t ? BasisKind::linear_x : basis);
    const ProfiledParameterMap map(kind, data.p(), 0);
    const PairwiseTerms terms(kind, plain, k);
    const MatrixXd F = basis_matrix(k.basis, plain.inputs(), plain.fidelities());
    auto objective = [&](const VectorXd& v) {
        KernelParams trial = k;
        map.unpack(v, trial);
        try {
            return -profile_scale(terms.covariance(trial), F, plain.outputs(), ProfiledParameterMap::scale_min * vy,
                                  ProfiledParameterMap::scale_max * vy)
                        .log_likelihood;
        } catch (const std::exception&) {
            return std::numeric_limits<double>::infinity();
        }
    };
    OptimizerOptions opt;
    opt.max_iterations = 100;
    const auto r = minimize_bounded(objective, map.pack(k), map.bounds(), opt);
    if (!std::isfinite(r.value)) {
        out.weights = VectorXd::Ones(data.p());
        out.degenerate = true;
        return out;
    }
    map.unpack(r.x, k);
    out.weights = k.gamma;
    return out;
}

struct MleOptions {
    int restarts = 5;
    int max_iterations = 200;
    double tolerance = 1e-9;
    double perturbation_sd = 0.5;
    std::uint64_t seed = 0;
    BasisKind basis = BasisKind::linear_x_t;
    double power = 2.0;
    std::optional<VectorXd> stage_powers;  // default: 2 for every fidelity
    double twy_power = 4.0;
    JitterPolicy jitter;
};

struct RestartReport {
    VectorXd log_parameters;  // optimizer end point, ProfiledParameterMap layout
    double log_likelihood = -std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
    std::string message;
};

struct MleResult {
    EmulatorKind kind = EmulatorKind::config_k2;
    KernelParams params;
    double log_likelihood = -std::numeric_limits<double>::infinity();
    double initial_log_likelihood = -std::numeric_limits<double>::infinity();
    double jitter = 0.0;
    int restarts = 0;
    int best_restart = -1;
    std::vector<RestartReport> restart_reports;
    bool init_degenerate = false;
};

/// Starting point for kind on data: alpha/gamma from init_alpha, theta = 1,
/// sigma1^2 = var(y), sigma2^2 = 0.1 var(y).
inline KernelParams initial_params(const Dataset& data, EmulatorKind kind, const MleOptions& opt,
                                   const AlphaInit& init) {
    KernelParams k = default_params(kind, data.p(), data.q(), opt.basis);
    k.power = opt.power;
    k.twy_power = opt.twy_power;
    k.stage_powers = opt.stage_powers ? *opt.stage_powers : VectorXd::Constant(data.q(), 2.0);
    const double vy = std::max(sample_variance(data.outputs()), 1e-12);
    k.gamma = init.weights;
    if (has_discrepancy(kind)) k.alpha = init.weights;
    if (k.theta.size() > 0) k.theta.setOnes();
    k.sigma1_sq = vy;
    k.sigma2_sq = 0.1 * vy;
    return k;
}

/// Multi-start maximum likelihood. beta (by GLS) and the overall variance
/// scale are profiled out at every evaluation; the correlation weights and the
/// variance ratio are optimized in log space.
inline MleResult fit_mle(const Dataset& data, EmulatorKind kind, const MleOptions& opt = {},
                         std::optional<AlphaInit> init = std::nullopt) {
    require(opt.restarts >= 1, "fit_mle: need at least one restart");
    const int m = basis_size(opt.basis == BasisKind::linear_x_t && !uses_fidelity(kind) ? BasisKind::linear_x
                                                                                          : opt.basis,
                             data.p(), effective_q(kind, data.q()));
    require(data.n() >= m, "fit_mle: fewer training records than basis functions");
    if (!init) init = init_alpha(data);

    MleResult result;
    result.kind = kind;
    result.restarts = opt.restarts;
    result.init_degenerate = init->degenerate;

    const KernelParams base = initial_params(data, kind, opt, *init);
    validate(base, kind, data.p(), data.q());
    const ProfiledParameterMap map(kind, data.p(), data.q());
    const PairwiseTerms terms(kind, data, base);
    const MatrixXd F = model_basis(kind, base, data.inputs(), data.fidelities());
    const double vy = std::max(sample_variance(data.outputs()), 1e-12);
    const double scale_lo = ProfiledParameterMap::scale_min * vy, scale_hi = ProfiledParameterMap::scale_max * vy;
    const Bounds bounds = map.bounds();

    auto correlation = [&](const VectorXd& v) {
        KernelParams trial = base;
        map.unpack(v, trial);
        return trial;
    };
    auto objective = [&](const VectorXd& v) {
        try {
            const double ll =
                profile_scale(terms.covariance(correlation(v)), F, data.outputs(), scale_lo, scale_hi, opt.jitter)
                    .log_likelihood;
            return std::isfinite(ll) ? -ll : std::numeric_limits<double>::infinity();
        } catch (const SingularCovarianceError&) {
            return std::numeric_limits<double>::infinity();
        } catch (const EstimationError&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    const VectorXd start = bounds.clamp(map.pack(base));
    result.initial_log_likelihood = profile_log_likelihood(data, base, kind, nullptr, nullptr, opt.jitter);

    Rng rng(opt.seed);
    OptimizerOptions oo;
    oo.max_iterations = opt.max_iterations;
    oo.relative_tolerance = opt.tolerance;
    VectorXd best_x;
    for (int r = 0; r < opt.restarts; ++r) {
        VectorXd x0 = start;
        if (r > 0)
            for (Eigen::Index i = 0; i < x0.size(); ++i) x0(i) += opt.perturbation_sd * draw_normal(rng);
        const OptimizerResult o = minimize_bounded(objective, bounds.clamp(x0), bounds, oo);
        RestartReport rep;
        rep.log_parameters = o.x;
        rep.log_likelihood = -o.value;
        rep.iterations = o.iterations;
        rep.converged = o.converged && std::isfinite(o.value);
        rep.message = o.message;
        result.restart_reports.push_back(rep);
        if (rep.converged && rep.log_likelihood > result.log_likelihood) {
            result.log_likelihood = rep.log_likelihood;
            result.best_restart = r;
            best_x = o.x;
        }
    }
    if (result.best_restart < 0) {
        std::string diag = "fit_mle(" + to_string(kind) + "): no restart converged;";
        for (std::size_t r = 0; r < result.restart_reports.size(); ++r)
            diag += " [" + std::to_string(r) + "] ll=" + std::to_string(result.restart_reports[r].log_likelihood) +
                    " " + result.restart_reports[r].message + ";";
        throw EstimationError(diag);
    }
    KernelParams best = correlation(best_x);
    const double scale =
        profile_scale(terms.covariance(best), F, data.outputs(), scale_lo, scale_hi, opt.jitter).scale;
    best.sigma1_sq *= scale;
    best.sigma2_sq *= scale;
    // refactor through the same path the predictors use
    result.log_likelihood = profile_log_likelihood(data, best, kind, &best.beta, &result.jitter, opt.jitter);
    result.params = best;
    return result;
}

}  // namespace confgp

#endif
