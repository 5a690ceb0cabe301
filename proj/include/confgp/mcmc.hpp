#ifndef CONFGP_MCMC_HPP
#define CONFGP_MCMC_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <tuple>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "confgp/covariance_cache.hpp"
#include "confgp/dataset.hpp"
#include "confgp/diagnostics.hpp"
#include "confgp/errors.hpp"
#include "confgp/gp_core.hpp"
#include "confgp/kernels.hpp"
#include "confgp/mle.hpp"
#include "confgp/random.hpp"

namespace confgp {

/// Hyperparameters of the hierarchical prior. Gamma distributions use the
/// (shape, rate) convention; beta has a flat prior.
struct PriorSpec {
    double a_lambda = 1.0, b_lambda = 1.0;
    double a_sigma = 0.001, b_sigma = 0.001;
    double a_gamma = 0.001, b_gamma = 0.001;
    double a_alpha = 0.001, b_alpha = 0.001;
    double a_theta = 0.001, b_theta = 0.001;

    void check() const {
        for (double v : {a_lambda, b_lambda, a_sigma, b_sigma, a_gamma, b_gamma, a_alpha, b_alpha, a_theta, b_theta})
            require(v > 0.0 && std::isfinite(v), "PriorSpec: all hyperparameters must be positive");
    }
};

struct McmcSchedule {
    int iterations = 10000;
    int burn_in = 5000;
    int thinning = 50;
    int chains = 5;
    std::uint64_t seed = 0;
    int adapt_window = 100;

    void check() const {
        require(iterations > 0, "McmcSchedule: iterations must be positive");
        require(burn_in >= 0 && burn_in < iterations, "McmcSchedule: burn-in must be smaller than iterations");
        require(thinning >= 1, "McmcSchedule: thinning must be at least 1");
        require(chains >= 1, "McmcSchedule: need at least one chain");
        require(adapt_window >= 1, "McmcSchedule: adapt window must be positive");
    }
    int retained() const { return (iterations - burn_in) / thinning; }
};

/// One draw of (beta, gamma, alpha, theta, sigma^2, lambda).
struct PosteriorDraw {
    VectorXd beta;
    VectorXd gamma;
    VectorXd alpha;
    VectorXd theta;
    double sigma_sq = 1.0;
    double lambda = 0.5;
};

enum class MetropolisBlock { gamma = 0, alpha = 1, theta = 2, lambda = 3 };
inline constexpr std::array<const char*, 4> metropolis_block_names{"gamma", "alpha", "theta", "lambda"};

struct PosteriorChain {
    int chain_id = 0;
    int burn_in = 0;
    int thinning = 1;
    std::vector<PosteriorDraw> draws;
    std::array<double, 4> acceptance{};  // post burn-in, per Metropolis block
    std::array<double, 4> final_scale{};
    int rejected_factorizations = 0;
};

/// Kernel settings and bounds shared by the sampler and its predictor.
struct McmcOptions {
    McmcSchedule schedule;
    BasisKind basis = BasisKind::linear_x_t;
    double power = 2.0;
    std::optional<VectorXd> stage_powers;
    // Log-space box for the SE weights, logit box for theta and lambda.
    double log_weight_min = std::log(1e-3);
    double log_weight_max = std::log(1e3);
    double logit_limit = 15.0;
    double initial_scale = 0.5;
    JitterPolicy jitter;
};

/// Names of the scalar parameters, in the order used by parameter_value.
inline std::vector<std::string> parameter_names(int m, int p, int q) {
    std::vector<std::string> out;
    for (int i = 0; i < m; ++i) out.push_back("beta" + std::to_string(i));
    for (int i = 0; i < p; ++i) out.push_back("gamma" + std::to_string(i + 1));
    for (int i = 0; i < p; ++i) out.push_back("alpha" + std::to_string(i + 1));
    for (int i = 0; i < q; ++i) out.push_back("theta" + std::to_string(i + 1));
    out.push_back("sigma2");
    out.push_back("lambda");
    return out;
}

inline double parameter_value(const PosteriorDraw& d, int index) {
    const int m = static_cast<int>(d.beta.size()), p = static_cast<int>(d.gamma.size()),
              q = static_cast<int>(d.theta.size());
    if (index < m) return d.beta(index);
    index -= m;
    if (index < p) return d.gamma(index);
    index -= p;
    if (index < p) return d.alpha(index);
    index -= p;
    if (index < q) return d.theta(index);
    index -= q;
    if (index == 0) return d.sigma_sq;
    if (index == 1) return d.lambda;
    throw StructuralError("parameter_value: index out of range");
}

inline ScaleReduction gelman_rubin(const std::vector<PosteriorChain>& chains, int parameter) {
    require(chains.size() >= 2, "gelman_rubin: at least two chains are required");
    std::vector<std::vector<double>> series;
    for (const auto& c : chains) {
        std::vector<double> s;
        s.reserve(c.draws.size());
        for (const auto& d : c.draws) s.push_back(parameter_value(d, parameter));
        series.push_back(std::move(s));
    }
    return gelman_rubin(series);
}

inline double logit(double v) { return std::log(v) - std::log1p(-v); }
inline double inv_logit(double u) { return 1.0 / (1.0 + std::exp(-u)); }

inline KernelParams draw_to_params(const PosteriorDraw& d, const McmcOptions& opt, int q) {
    KernelParams k;
    k.basis = opt.basis;
    k.beta = d.beta;
    k.gamma = d.gamma;
    k.alpha = d.alpha;
    k.theta = d.theta;
    k.set_bayes_scale(d.sigma_sq, d.lambda);
    k.power = opt.power;
    k.stage_powers = opt.stage_powers ? *opt.stage_powers : VectorXd::Constant(q, 2.0);
    return k;
}

/// One random-walk Metropolis step on u with isotropic N(0, scale^2)
/// increments. Proposals leaving [lo, hi] in any coordinate, or with a
/// non-finite target, are rejected.
template <class LogTarget>
bool random_walk_metropolis(VectorXd& u, double log_target_current, double scale, double lo, double hi,
                            LogTarget&& log_target, Rng& rng) {
    VectorXd prop = u;
    bool inside = true;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        prop(i) += scale * draw_normal(rng);
        inside = inside && prop(i) >= lo && prop(i) <= hi;
    }
    if (!inside) return false;
    const double lt = log_target(prop);
    if (!std::isfinite(lt)) return false;
    if (std::log(draw_uniform(rng)) < lt - log_target_current) {
        u = prop;
        return true;
    }
    return false;
}

namespace detail {

/// State of one Metropolis-within-Gibbs chain for the Kernel-2 model.
/// Sigma-tilde = K_phi(gamma) + lambda * K_delta(alpha) .* K_t(theta).
class MwgChain {
public:
    MwgChain(const Dataset& data, const PairwiseTerms& terms, const MatrixXd& F, const PriorSpec& prior,
             const McmcOptions& opt, Rng& rng)
        : data_(data), terms_(terms), F_(F), prior_(prior), opt_(opt), rng_(rng) {}

    bool initialize(const PosteriorDraw& start) {
        cur_ = start;
        k_phi_ = terms_.input_correlation(cur_.gamma);
        k_dx_ = terms_.input_correlation(cur_.alpha);
        k_t_ = terms_.fidelity_factor(params_of(cur_));
        return refactor(k_phi_, k_dx_, k_t_, cur_.lambda, factor_);
    }

    void gibbs_beta_sigma() {
        const GlsFit g = gls_fit(factor_, F_, data_.outputs());
        VectorXd z(g.beta.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = draw_normal(rng_);
        // cov = sigma^2 (F' S^{-1} F)^{-1} = sigma^2 (L L')^{-1}
        cur_.beta = g.beta + std::sqrt(cur_.sigma_sq) * g.information.matrixU().solve(z);
        const VectorXd r = data_.outputs() - F_ * cur_.beta;
        quad_ = factor_.quad_form(r);
        const double shape = prior_.a_sigma + 0.5 * data_.n();
        const double rate = (1.0 + cur_.lambda) * prior_.b_sigma + 0.5 * quad_;
        cur_.sigma_sq = 1.0 / draw_gamma(rng_, shape, rate);
    }

    // Returns true when the proposal was accepted.
    bool metropolis(MetropolisBlock block, double scale) {
        struct Pending {
            PosteriorDraw draw;
            MatrixXd phi, dx, kt;
            CovFactor factor;
        } pending;
        const VectorXd r = data_.outputs() - F_ * cur_.beta;
        auto log_lik = [&](const CovFactor& f) { return -0.5 * f.log_det - 0.5 * f.quad_form(r) / cur_.sigma_sq; };
        auto log_prior = [&](const PosteriorDraw& d) {
            switch (block) {
                case MetropolisBlock::gamma: return log_gamma_log(d.gamma, prior_.a_gamma, prior_.b_gamma);
                case MetropolisBlock::alpha: return log_gamma_log(d.alpha, prior_.a_alpha, prior_.b_alpha);
                case MetropolisBlock::theta: {
                    double acc = 0.0;
                    for (Eigen::Index i = 0; i < d.theta.size(); ++i)
                        acc += log_beta_logit(d.theta(i), prior_.a_theta, prior_.b_theta);
                    return acc;
                }
                case MetropolisBlock::lambda:
                    // lambda prior times [1/sigma^2 | lambda] ~ Gamma(a_sigma, (1 + lambda) b_sigma)
                    return log_beta_logit(d.lambda, prior_.a_lambda, prior_.b_lambda) +
                           prior_.a_sigma * std::log1p(d.lambda) - (1.0 + d.lambda) * prior_.b_sigma / d.sigma_sq;
            }
            return 0.0;
        };
        auto target = [&](const VectorXd& u) {
            PosteriorDraw d = cur_;
            MatrixXd phi = k_phi_, dx = k_dx_, kt = k_t_;
            switch (block) {
                case MetropolisBlock::gamma:
                    d.gamma = u.array().exp().matrix();
                    phi = terms_.input_correlation(d.gamma);
                    break;
                case MetropolisBlock::alpha:
                    d.alpha = u.array().exp().matrix();
                    dx = terms_.input_correlation(d.alpha);
                    break;
                case MetropolisBlock::theta:
                    d.theta = u.unaryExpr([](double v) { return inv_logit(v); });
                    kt = terms_.fidelity_factor(params_of(d));
                    break;
                case MetropolisBlock::lambda: d.lambda = inv_logit(u(0)); break;
            }
            CovFactor f;
            if (!refactor(phi, dx, kt, d.lambda, f)) {
                ++rejected_factorizations_;
                return -std::numeric_limits<double>::infinity();
            }
            const double value = log_prior(d) + log_lik(f);
            pending = Pending{std::move(d), std::move(phi), std::move(dx), std::move(kt), std::move(f)};
            return value;
        };

        VectorXd u;
        double lo = opt_.log_weight_min, hi = opt_.log_weight_max;
        switch (block) {
            case MetropolisBlock::gamma: u = cur_.gamma.array().log().matrix(); break;
            case MetropolisBlock::alpha: u = cur_.alpha.array().log().matrix(); break;
            case MetropolisBlock::theta: u = cur_.theta.unaryExpr([](double v) { return logit(v); }); break;
            case MetropolisBlock::lambda: u = VectorXd::Constant(1, logit(cur_.lambda)); break;
        }
        if (block == MetropolisBlock::theta || block == MetropolisBlock::lambda) {
            lo = -opt_.logit_limit;
            hi = opt_.logit_limit;
        }
        const double current = log_prior(cur_) + log_lik(factor_);
        if (!random_walk_metropolis(u, current, scale, lo, hi, target, rng_)) return false;
        cur_ = std::move(pending.draw);
        k_phi_ = std::move(pending.phi);
        k_dx_ = std::move(pending.dx);
        k_t_ = std::move(pending.kt);
        factor_ = std::move(pending.factor);
        return true;
    }

    const PosteriorDraw& current() const { return cur_; }
    int rejected_factorizations() const { return rejected_factorizations_; }

private:
    // log densities on transformed coordinates, Jacobian included
    static double log_beta_logit(double v, double a, double b) { return a * std::log(v) + b * std::log1p(-v); }
    static double log_gamma_log(const VectorXd& w, double a, double b) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < w.size(); ++i) acc += a * std::log(w(i)) - b * w(i);
        return acc;
    }

    KernelParams params_of(const PosteriorDraw& d) const {
        return draw_to_params(d, opt_, data_.q());
    }

    bool refactor(const MatrixXd& phi, const MatrixXd& dx, const MatrixXd& kt, double lambda, CovFactor& out) const {
        const MatrixXd s = phi + lambda * (dx.array() * kt.array()).matrix();
        try {
            out = cholesky_factor(s, opt_.jitter);
            return true;
        } catch (const SingularCovarianceError&) {
            return false;
        }
    }

    const Dataset& data_;
    const PairwiseTerms& terms_;
    const MatrixXd& F_;
    const PriorSpec& prior_;
    const McmcOptions& opt_;
    Rng& rng_;

    PosteriorDraw cur_;
    MatrixXd k_phi_, k_dx_, k_t_;
    CovFactor factor_;
    double quad_ = 0.0;
    int rejected_factorizations_ = 0;
};

}  // namespace detail

/// Dispersed starting point: weights from init_alpha scaled by log-normal
/// noise, theta uniform on (0.05, 0.95), lambda from its prior, sigma^2 around
/// var(y).
inline PosteriorDraw dispersed_start(const Dataset& data, const AlphaInit& init, const PriorSpec& prior,
                                     const McmcOptions& opt, Rng& rng) {
    PosteriorDraw d;
    const double lo = opt.log_weight_min, hi = opt.log_weight_max;
    auto jitter_weights = [&](const VectorXd& w) {
        VectorXd out(w.size());
        for (Eigen::Index i = 0; i < w.size(); ++i)
            out(i) = std::exp(std::clamp(std::log(w(i)) + draw_normal(rng), lo, hi));
        return out;
    };
    d.gamma = jitter_weights(init.weights);
    d.alpha = jitter_weights(init.weights);
    d.theta = VectorXd(data.q());
    for (Eigen::Index i = 0; i < d.theta.size(); ++i) d.theta(i) = 0.05 + 0.9 * draw_uniform(rng);
    const double lim = inv_logit(opt.logit_limit);
    d.lambda = std::clamp(draw_beta(rng, prior.a_lambda, prior.b_lambda), 1.0 - lim, lim);
    d.sigma_sq = std::max(sample_variance(data.outputs()), 1e-12) * std::exp(draw_normal(rng));
    d.beta = VectorXd::Zero(basis_size(opt.basis, data.p(), data.q()));
    return d;
}

/// Metropolis-within-Gibbs sampler for the Kernel-2 model.
///
/// Each iteration draws beta and 1/sigma^2 from their full conditionals, then
/// updates gamma, alpha, theta and lambda in turn by random-walk Metropolis
/// on log / logit coordinates. Block proposal scales adapt during burn-in
/// (x1.1 above 50% acceptance, x0.9 below 20% per window) and stay fixed
/// afterwards. Proposals whose covariance cannot be factored are rejected.
inline std::vector<PosteriorChain> run_mwg(const Dataset& data, EmulatorKind kind, const PriorSpec& prior,
                                           const McmcOptions& opt,
                                           std::optional<AlphaInit> init = std::nullopt) {
    require(kind == EmulatorKind::config_k2,
            "run_mwg: fully Bayesian sampling is only supported for config-k2 (Kernel 1 mixes poorly)");
    require(data.n() > 0, "run_mwg: no training data");
    require(data.q() >= 1, "run_mwg: config-k2 needs fidelity parameters");
    prior.check();
    opt.schedule.check();
    if (!init) init = init_alpha(data);

    KernelParams exponents = default_params(kind, data.p(), data.q(), opt.basis);
    exponents.power = opt.power;
    exponents.stage_powers = opt.stage_powers ? *opt.stage_powers : VectorXd::Constant(data.q(), 2.0);
    const PairwiseTerms terms(kind, data, exponents);
    const MatrixXd F = basis_matrix(opt.basis, data.inputs(), data.fidelities());
    require(data.n() >= F.cols(), "run_mwg: fewer training records than basis functions");

    const auto& sch = opt.schedule;
    std::vector<PosteriorChain> chains;
    for (int c = 0; c < sch.chains; ++c) {
        Rng rng(derive_seed(sch.seed, 0x6d6377ULL, static_cast<std::uint64_t>(c)));
        detail::MwgChain chain(data, terms, F, prior, opt, rng);
        bool started = false;
        for (int attempt = 0; attempt < 100 && !started; ++attempt)
            started = chain.initialize(dispersed_start(data, *init, prior, opt, rng));
        if (!started) throw EstimationError("run_mwg: no factorizable starting point found");

        PosteriorChain out;
        out.chain_id = c;
        out.burn_in = sch.burn_in;
        out.thinning = sch.thinning;
        std::array<double, 4> scale{};
        const std::array<int, 4> dims{data.p(), data.p(), data.q(), 1};
        for (int b = 0; b < 4; ++b) scale[b] = opt.initial_scale / std::sqrt(static_cast<double>(dims[b]));
        std::array<int, 4> window_accept{}, post_accept{};
        for (int it = 1; it <= sch.iterations; ++it) {
            chain.gibbs_beta_sigma();
            for (int b = 0; b < 4; ++b) {
                const bool acc = chain.metropolis(static_cast<MetropolisBlock>(b), scale[b]);
                if (it <= sch.burn_in)
                    window_accept[b] += acc;
                else
                    post_accept[b] += acc;
            }
            if (it <= sch.burn_in && it % sch.adapt_window == 0) {
                for (int b = 0; b < 4; ++b) {
                    const double rate = static_cast<double>(window_accept[b]) / sch.adapt_window;
                    if (rate > 0.5) scale[b] *= 1.1;
                    if (rate < 0.2) scale[b] *= 0.9;
                    window_accept[b] = 0;
                }
            }
            if (it > sch.burn_in && (it - sch.burn_in) % sch.thinning == 0) out.draws.push_back(chain.current());
        }
        const int post = sch.iterations - sch.burn_in;
        for (int b = 0; b < 4; ++b) {
            out.acceptance[b] = static_cast<double>(post_accept[b]) / post;
            out.final_scale[b] = scale[b];
        }
        out.rejected_factorizations = chain.rejected_factorizations();
        chains.push_back(std::move(out));
    }
    return chains;
}

struct PosteriorPredictive {
    std::vector<double> samples;
    double mean = 0.0;              // pooled sample mean
    double conditional_mean = 0.0;  // average of per-draw conditional means
    double variance = 0.0;          // pooled sample variance
    double mean_conditional_variance = 0.0;
    double lower95 = 0.0;           // highest-density interval
    double upper95 = 0.0;
};

/// Conditional GP predictors at t = 0 for every retained posterior draw.
class PosteriorPredictor {
public:
    PosteriorPredictor(const Dataset& data, const std::vector<PosteriorChain>& chains, const McmcOptions& opt)
        : inputs_(data.inputs()), fidelities_(data.fidelities()), opt_(opt), q_(data.q()) {
        std::size_t total = 0;
        for (const auto& c : chains) total += c.draws.size();
        require(total > 0, "PosteriorPredictor: chains contain no draws");
        const MatrixXd F = basis_matrix(opt.basis, data.inputs(), data.fidelities());
        for (const auto& c : chains)
            for (const auto& d : c.draws) {
                Member m;
                m.params = draw_to_params(d, opt, q_);
                // correlation-scale matrix: sigma^2 factored out
                KernelParams unit = m.params;
                unit.set_bayes_scale(1.0, d.lambda);
                m.unit = unit;
                m.factor = cholesky_factor(assemble_covariance(EmulatorKind::config_k2, unit, inputs_, fidelities_),
                                           opt.jitter);
                m.weights = m.factor.solve(data.outputs() - F * d.beta);
                m.sigma_sq = d.sigma_sq;
                members_.push_back(std::move(m));
            }
    }

    std::size_t size() const { return members_.size(); }

    /// Per-draw conditional mean and variance of eta(x, 0).
    std::pair<double, double> conditional(std::size_t i, const VectorXd& x) const {
        const Member& m = members_[i];
        const VectorXd t0 = VectorXd::Zero(q_);
        const VectorXd k = cross_covariance(EmulatorKind::config_k2, m.unit, inputs_, fidelities_, x, t0);
        const double mean = basis_row(opt_.basis, x, t0).dot(m.params.beta) + k.dot(m.weights);
        const VectorXd w = m.factor.forward(k);
        const double kss = composite_kernel(EmulatorKind::config_k2, m.unit, x, t0, x, t0);
        return {mean, std::max(0.0, m.sigma_sq * (kss - w.squaredNorm()))};
    }

    PosteriorPredictive predict(const VectorXd& x, int draws_per_sample, Rng& rng) const {
        require(draws_per_sample >= 1, "posterior_predict: draws per sample must be positive");
        PosteriorPredictive out;
        out.samples.reserve(members_.size() * static_cast<std::size_t>(draws_per_sample));
        for (std::size_t i = 0; i < members_.size(); ++i) {
            const auto [mu, var] = conditional(i, x);
            out.conditional_mean += mu;
            out.mean_conditional_variance += var;
            const double sd = std::sqrt(var);
            for (int k = 0; k < draws_per_sample; ++k) out.samples.push_back(mu + sd * draw_normal(rng));
        }
        const double M = static_cast<double>(members_.size());
        out.conditional_mean /= M;
        out.mean_conditional_variance /= M;
        double sum = 0.0;
        for (double s : out.samples) sum += s;
        out.mean = sum / static_cast<double>(out.samples.size());
        double ss = 0.0;
        for (double s : out.samples) ss += (s - out.mean) * (s - out.mean);
        out.variance = out.samples.size() > 1 ? ss / static_cast<double>(out.samples.size() - 1) : 0.0;
        std::tie(out.lower95, out.upper95) = hpd_interval(out.samples, 0.95);
        return out;
    }

private:
    struct Member {
        KernelParams params;
        KernelParams unit;
        CovFactor factor;
        VectorXd weights;
        double sigma_sq = 1.0;
    };
    MatrixXd inputs_;
    MatrixXd fidelities_;
    McmcOptions opt_;
    int q_;
    std::vector<Member> members_;
};

inline PosteriorPredictive posterior_predict(const Dataset& data, const std::vector<PosteriorChain>& chains,
                                             const McmcOptions& opt, const VectorXd& x, int draws_per_sample,
                                             Rng& rng) {
    return PosteriorPredictor(data, chains, opt).predict(x, draws_per_sample, rng);
}

}  // namespace confgp

#endif
