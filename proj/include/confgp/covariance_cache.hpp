#ifndef CONFGP_COVARIANCE_CACHE_HPP
#define CONFGP_COVARIANCE_CACHE_HPP

#include <vector>

#include <Eigen/Dense>

#include "confgp/dataset.hpp"
#include "confgp/kernels.hpp"

namespace confgp {

/// Parameter-free pieces of the training covariance, precomputed once so the
/// likelihood can be re-evaluated with elementwise array operations.
///
/// Produces the same values as calling composite_kernel pairwise; the
/// exponents l, l_r and the TWY power are frozen at construction.
class PairwiseTerms {
public:
    PairwiseTerms(EmulatorKind kind, const Dataset& data, const KernelParams& exponents)
        : kind_(kind), n_(data.n()) {
        const MatrixXd& X = data.inputs();
        const MatrixXd& T = data.fidelities();
        for (int s = 0; s < data.p(); ++s) input_sq_.push_back(squared_differences(X.col(s)));
        switch (kind) {
            case EmulatorKind::standard_gp:
                for (int r = 0; r < data.q(); ++r) fidelity_sq_.push_back(squared_differences(T.col(r)));
                break;
            case EmulatorKind::config_k1:
                for (int r = 0; r < data.q(); ++r) fidelity_sq_.push_back(squared_differences(T.col(r)));
                fidelity_self_sq_ = T.array().square().matrix();
                break;
            case EmulatorKind::config_k2:
                power_ = exponents.power;
                for (int r = 0; r < data.q(); ++r) {
                    MatrixXd m(n_, n_);
                    for (int i = 0; i < n_; ++i)
                        for (int j = 0; j < n_; ++j) {
                            const double v = std::min(T(i, r), T(j, r));
                            m(i, j) = v > 0.0 ? std::pow(v, exponents.stage_powers(r)) : 0.0;
                        }
                    stage_min_pow_.push_back(std::move(m));
                }
                break;
            case EmulatorKind::twy_arith:
            case EmulatorKind::twy_geom: {
                const auto mode = kind == EmulatorKind::twy_arith ? FidelityAggregate::arith : FidelityAggregate::geom;
                VectorXd agg(n_);
                for (int i = 0; i < n_; ++i) agg(i) = aggregate_fidelity(T.row(i), mode);
                twy_ = MatrixXd(n_, n_);
                for (int i = 0; i < n_; ++i)
                    for (int j = 0; j < n_; ++j) twy_(i, j) = twy_t(agg(i), agg(j), exponents.twy_power);
                break;
            }
            case EmulatorKind::high_fidelity_gp: break;
        }
    }

    EmulatorKind kind() const { return kind_; }
    int n() const { return n_; }

    /// exp(-sum_s w_s (x_is - x_js)^2)
    MatrixXd input_correlation(const VectorXd& w) const { return weighted_exp(input_sq_, w); }

    /// K_t over all training pairs (config-* and twy-* only).
    MatrixXd fidelity_factor(const KernelParams& k) const {
        switch (kind_) {
            case EmulatorKind::config_k1: {
                MatrixXd out = weighted_exp(fidelity_sq_, k.theta);
                VectorXd self(n_);
                for (int i = 0; i < n_; ++i) {
                    double acc = 0.0;
                    for (Eigen::Index r = 0; r < fidelity_self_sq_.cols(); ++r) acc += k.theta(r) * fidelity_self_sq_(i, r);
                    self(i) = std::exp(-acc);
                }
                for (int j = 0; j < n_; ++j)
                    for (int i = 0; i < n_; ++i) out(i, j) = out(i, j) - self(i) - self(j) + 1.0;
                return out;
            }
            case EmulatorKind::config_k2: {
                MatrixXd acc = MatrixXd::Zero(n_, n_);
                for (std::size_t r = 0; r < stage_min_pow_.size(); ++r) acc += k.theta(static_cast<Eigen::Index>(r)) * stage_min_pow_[r];
                return acc.unaryExpr([p = power_](double a) { return a > 0.0 ? std::pow(a, p) : 0.0; });
            }
            case EmulatorKind::twy_arith:
            case EmulatorKind::twy_geom: return twy_;
            default: throw StructuralError("fidelity_factor: " + to_string(kind_) + " has no discrepancy term");
        }
    }

    MatrixXd covariance(const KernelParams& k) const {
        switch (kind_) {
            case EmulatorKind::standard_gp:
                return k.sigma1_sq *
                       (input_correlation(k.gamma).array() * weighted_exp(fidelity_sq_, k.theta).array()).matrix();
            case EmulatorKind::high_fidelity_gp: return k.sigma1_sq * input_correlation(k.gamma);
            default: break;
        }
        MatrixXd out = k.sigma1_sq * input_correlation(k.gamma);
        if (k.sigma2_sq != 0.0)
            out.array() += k.sigma2_sq * input_correlation(k.alpha).array() * fidelity_factor(k).array();
        return out;
    }

private:
    static MatrixXd squared_differences(const VectorXd& c) {
        const auto n = c.size();
        MatrixXd d(n, n);
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index i = 0; i < n; ++i) {
                const double v = c(i) - c(j);
                d(i, j) = v * v;
            }
        return d;
    }

    MatrixXd weighted_exp(const std::vector<MatrixXd>& sq, const VectorXd& w) const {
        require(static_cast<std::size_t>(w.size()) == sq.size(), "PairwiseTerms: weight length mismatch");
        MatrixXd acc = MatrixXd::Zero(n_, n_);
        for (std::size_t s = 0; s < sq.size(); ++s) acc += w(static_cast<Eigen::Index>(s)) * sq[s];
        return (-acc.array()).exp().matrix();
    }

    EmulatorKind kind_;
    int n_;
    double power_ = 2.0;
    std::vector<MatrixXd> input_sq_;
    std::vector<MatrixXd> fidelity_sq_;
    MatrixXd fidelity_self_sq_;
    std::vector<MatrixXd> stage_min_pow_;
    MatrixXd twy_;
};

}  // namespace confgp

#endif
