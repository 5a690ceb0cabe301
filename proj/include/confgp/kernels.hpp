#ifndef CONFGP_KERNELS_HPP
#define CONFGP_KERNELS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "confgp/dataset.hpp"
#include "confgp/errors.hpp"

namespace confgp {

/// Emulator variants compared in the benchmarks.
///
/// `standard_gp` is one stationary SE kernel over the concatenated (x, t);
/// `high_fidelity_gp` ignores fidelity columns entirely; `twy_*` collapse the
/// fidelity vector to a scalar (arithmetic / geometric mean) and use the
/// Brownian-like min(t1, t2)^l discrepancy; `config_k1` / `config_k2` use the
/// multi-fidelity discrepancy kernels below.
enum class EmulatorKind { standard_gp, high_fidelity_gp, twy_arith, twy_geom, config_k1, config_k2 };

inline constexpr std::array<EmulatorKind, 6> all_emulator_kinds{
    EmulatorKind::standard_gp, EmulatorKind::high_fidelity_gp, EmulatorKind::twy_arith,
    EmulatorKind::twy_geom,    EmulatorKind::config_k1,        EmulatorKind::config_k2};

inline std::string to_string(EmulatorKind kind) {
    switch (kind) {
        case EmulatorKind::standard_gp: return "standard-gp";
        case EmulatorKind::high_fidelity_gp: return "high-fidelity-gp";
        case EmulatorKind::twy_arith: return "twy-arith";
        case EmulatorKind::twy_geom: return "twy-geom";
        case EmulatorKind::config_k1: return "config-k1";
        case EmulatorKind::config_k2: return "config-k2";
    }
    return "?";
}

inline EmulatorKind emulator_from_string(const std::string& s) {
    for (auto k : all_emulator_kinds)
        if (to_string(k) == s) return k;
    throw StructuralError("unknown emulator model '" + s + "'");
}

inline bool uses_fidelity(EmulatorKind kind) { return kind != EmulatorKind::high_fidelity_gp; }

inline bool has_discrepancy(EmulatorKind kind) {
    return kind == EmulatorKind::twy_arith || kind == EmulatorKind::twy_geom || kind == EmulatorKind::config_k1 ||
           kind == EmulatorKind::config_k2;
}

/// Covariance hyperparameters and mean coefficients.
///
/// Which fields are read depends on the emulator kind: `gamma` always (input
/// weights of the phi part), `theta` for standard-gp and config-*, `alpha` and
/// `sigma2_sq` for twy-* and config-*. `power` / `stage_powers` are the
/// Kernel-2 exponents l and l_r; `twy_power` is the exponent of min(t1,t2).
struct KernelParams {
    BasisKind basis = BasisKind::linear_x_t;
    VectorXd beta;
    VectorXd gamma;
    VectorXd alpha;
    VectorXd theta;
    double sigma1_sq = 1.0;
    double sigma2_sq = 1.0;
    double power = 2.0;
    VectorXd stage_powers;
    double twy_power = 4.0;

    // sigma^2 and lambda of the (sigma^2, lambda) reparametrization.
    double sigma_sq() const { return sigma1_sq; }
    double lambda() const { return sigma2_sq / sigma1_sq; }
    void set_bayes_scale(double sigma_sq, double lambda) {
        sigma1_sq = sigma_sq;
        sigma2_sq = lambda * sigma_sq;
    }
};

inline int effective_q(EmulatorKind kind, int q) { return uses_fidelity(kind) ? q : 0; }

/// Sensible starting values sized for (kind, p, q).
inline KernelParams default_params(EmulatorKind kind, int p, int q, BasisKind basis = BasisKind::linear_x_t) {
    KernelParams k;
    k.basis = basis;
    if (kind == EmulatorKind::high_fidelity_gp && basis == BasisKind::linear_x_t) k.basis = BasisKind::linear_x;
    k.beta = VectorXd::Zero(basis_size(k.basis, p, effective_q(kind, q)));
    k.gamma = VectorXd::Ones(p);
    if (has_discrepancy(kind)) k.alpha = VectorXd::Ones(p);
    if (kind == EmulatorKind::standard_gp || kind == EmulatorKind::config_k1 || kind == EmulatorKind::config_k2)
        k.theta = VectorXd::Ones(q);
    k.stage_powers = VectorXd::Constant(q, 2.0);
    return k;
}

inline void validate(const KernelParams& k, EmulatorKind kind, int p, int q) {
    auto positive = [](const VectorXd& v) { return (v.array() > 0.0).all() && v.allFinite(); };
    require(!uses_fidelity(kind) || kind == EmulatorKind::standard_gp || q >= 1,
            to_string(kind) + " requires at least one fidelity parameter");
    require(k.beta.size() == basis_size(k.basis, p, effective_q(kind, q)),
            "beta has length " + std::to_string(k.beta.size()) + ", basis needs " +
                std::to_string(basis_size(k.basis, p, effective_q(kind, q))));
    require(k.gamma.size() == p && positive(k.gamma), "gamma must be a positive vector of length p");
    require(k.sigma1_sq > 0.0 && std::isfinite(k.sigma1_sq), "sigma1^2 must be positive");
    if (has_discrepancy(kind)) {
        require(k.alpha.size() == p && positive(k.alpha), "alpha must be a positive vector of length p");
        require(k.sigma2_sq >= 0.0 && std::isfinite(k.sigma2_sq), "sigma2^2 must be nonnegative");
    }
    if (kind == EmulatorKind::standard_gp || kind == EmulatorKind::config_k1 || kind == EmulatorKind::config_k2)
        require(k.theta.size() == q && positive(k.theta), "theta must be a positive vector of length q");
    if (kind == EmulatorKind::config_k2) {
        require(k.power > 0.0, "Kernel-2 exponent l must be positive");
        require(k.stage_powers.size() == q && positive(k.stage_powers), "Kernel-2 exponents l_r must be positive");
    }
    if (kind == EmulatorKind::twy_arith || kind == EmulatorKind::twy_geom)
        require(k.twy_power > 0.0, "TWY exponent must be positive");
}

/// exp(-sum_s w_s (u_s - v_s)^2)
template <class U, class V, class W>
double se_kernel(const Eigen::MatrixBase<U>& u, const Eigen::MatrixBase<V>& v, const Eigen::MatrixBase<W>& w) {
    require(u.size() == v.size() && u.size() == w.size(), "se_kernel: length mismatch");
    double acc = 0.0;
    for (Eigen::Index s = 0; s < u.size(); ++s) {
        const double d = u(s) - v(s);
        acc += w(s) * d * d;
    }
    return std::exp(-acc);
}

namespace detail {
template <class U, class W>
double weighted_square(const Eigen::MatrixBase<U>& u, const Eigen::MatrixBase<W>& w) {
    double acc = 0.0;
    for (Eigen::Index r = 0; r < u.size(); ++r) acc += w(r) * u(r) * u(r);
    return acc;
}
}  // namespace detail

/// Kernel 1: covariance of kappa(t1) - kappa(0) and kappa(t2) - kappa(0) for a
/// unit-variance SE process kappa with weights theta.
template <class T1, class T2, class W>
double kernel1_t(const Eigen::MatrixBase<T1>& t1, const Eigen::MatrixBase<T2>& t2, const Eigen::MatrixBase<W>& theta) {
    require(t1.size() == t2.size() && t1.size() == theta.size(), "kernel1_t: length mismatch");
    return se_kernel(t1, t2, theta) - std::exp(-detail::weighted_square(t1, theta)) -
           std::exp(-detail::weighted_square(t2, theta)) + 1.0;
}

/// Kernel 2: [sum_r theta_r min(t1_r, t2_r)^{l_r}]^l
template <class T1, class T2, class W, class L>
double kernel2_t(const Eigen::MatrixBase<T1>& t1, const Eigen::MatrixBase<T2>& t2, const Eigen::MatrixBase<W>& theta,
                 const Eigen::MatrixBase<L>& stage_powers, double power) {
    require(t1.size() == t2.size() && t1.size() == theta.size() && t1.size() == stage_powers.size(),
            "kernel2_t: length mismatch");
    double acc = 0.0;
    for (Eigen::Index r = 0; r < t1.size(); ++r) {
        const double m = std::min(t1(r), t2(r));
        if (m > 0.0) acc += theta(r) * std::pow(m, stage_powers(r));
    }
    return acc > 0.0 ? std::pow(acc, power) : 0.0;
}

inline double twy_t(double t1, double t2, double power) {
    const double m = std::min(t1, t2);
    return m > 0.0 ? std::pow(m, power) : 0.0;
}

enum class FidelityAggregate { arith, geom };

/// Collapse a fidelity vector to one scalar. A zero component in geometric
/// mode yields the limit value 0.
template <class T>
double aggregate_fidelity(const Eigen::MatrixBase<T>& t, FidelityAggregate mode) {
    require(t.size() > 0, "aggregate_fidelity: empty fidelity vector");
    if (mode == FidelityAggregate::arith) return t.sum() / static_cast<double>(t.size());
    double log_sum = 0.0;
    for (Eigen::Index r = 0; r < t.size(); ++r) {
        if (t(r) <= 0.0) return 0.0;
        log_sum += std::log(t(r));
    }
    return std::exp(log_sum / static_cast<double>(t.size()));
}

/// Fidelity factor K_t of the discrepancy for the kinds that have one.
template <class T1, class T2>
double fidelity_kernel(EmulatorKind kind, const KernelParams& k, const Eigen::MatrixBase<T1>& t1,
                       const Eigen::MatrixBase<T2>& t2) {
    switch (kind) {
        case EmulatorKind::config_k1: return kernel1_t(t1, t2, k.theta);
        case EmulatorKind::config_k2: return kernel2_t(t1, t2, k.theta, k.stage_powers, k.power);
        case EmulatorKind::twy_arith:
            return twy_t(aggregate_fidelity(t1, FidelityAggregate::arith),
                         aggregate_fidelity(t2, FidelityAggregate::arith), k.twy_power);
        case EmulatorKind::twy_geom:
            return twy_t(aggregate_fidelity(t1, FidelityAggregate::geom),
                         aggregate_fidelity(t2, FidelityAggregate::geom), k.twy_power);
        default: throw StructuralError("fidelity_kernel: " + to_string(kind) + " has no discrepancy term");
    }
}

/// Covariance between eta(x1, t1) and eta(x2, t2) under the chosen emulator.
template <class X1, class T1, class X2, class T2>
double composite_kernel(EmulatorKind kind, const KernelParams& k, const Eigen::MatrixBase<X1>& x1,
                        const Eigen::MatrixBase<T1>& t1, const Eigen::MatrixBase<X2>& x2,
                        const Eigen::MatrixBase<T2>& t2) {
    switch (kind) {
        case EmulatorKind::standard_gp:
            return k.sigma1_sq * se_kernel(x1, x2, k.gamma) * se_kernel(t1, t2, k.theta);
        case EmulatorKind::high_fidelity_gp: return k.sigma1_sq * se_kernel(x1, x2, k.gamma);
        default: break;
    }
    const double phi = k.sigma1_sq * se_kernel(x1, x2, k.gamma);
    if (k.sigma2_sq == 0.0) return phi;
    const double kt = fidelity_kernel(kind, k, t1, t2);
    if (kt == 0.0) return phi;
    return phi + k.sigma2_sq * se_kernel(x1, x2, k.alpha) * kt;
}

}  // namespace confgp

#endif
