#ifndef CONFGP_GP_CORE_HPP
#define CONFGP_GP_CORE_HPP

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "confgp/dataset.hpp"
#include "confgp/errors.hpp"
#include "confgp/kernels.hpp"

namespace confgp {

// Fidelity columns the given kind actually sees (none for the high-fidelity GP).
inline MatrixXd model_fidelities(EmulatorKind kind, const MatrixXd& fidelities) {
    if (uses_fidelity(kind)) return fidelities;
    return MatrixXd(fidelities.rows(), 0);
}

inline MatrixXd model_basis(EmulatorKind kind, const KernelParams& k, const MatrixXd& inputs,
                            const MatrixXd& fidelities) {
    return basis_matrix(k.basis, inputs, model_fidelities(kind, fidelities));
}

/// Covariance matrix of eta over the rows of (inputs, fidelities).
inline MatrixXd assemble_covariance(EmulatorKind kind, const KernelParams& k, const MatrixXd& inputs,
                                    const MatrixXd& fidelities) {
    require(inputs.rows() == fidelities.rows(), "assemble_covariance: row count mismatch");
    validate(k, kind, static_cast<int>(inputs.cols()), static_cast<int>(fidelities.cols()));
    const MatrixXd X = inputs.transpose();
    const MatrixXd T = fidelities.transpose();
    const auto n = inputs.rows();
    MatrixXd K(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = j; i < n; ++i) {
            const double v = composite_kernel(kind, k, X.col(i), T.col(i), X.col(j), T.col(j));
            K(i, j) = v;
            K(j, i) = v;
        }
    }
    return K;
}

inline MatrixXd assemble_covariance(const Dataset& data, const KernelParams& k, EmulatorKind kind) {
    return assemble_covariance(kind, k, data.inputs(), data.fidelities());
}

/// Covariances between every training row and the point (x, t).
inline VectorXd cross_covariance(EmulatorKind kind, const KernelParams& k, const MatrixXd& inputs,
                                 const MatrixXd& fidelities, const VectorXd& x, const VectorXd& t) {
    require(x.size() == inputs.cols(), "cross_covariance: input dimension mismatch");
    require(t.size() == fidelities.cols(), "cross_covariance: fidelity dimension mismatch");
    VectorXd out(inputs.rows());
    for (Eigen::Index i = 0; i < inputs.rows(); ++i)
        out(i) = composite_kernel(kind, k, inputs.row(i).transpose(), fidelities.row(i).transpose(), x, t);
    return out;
}

struct JitterPolicy {
    double first_relative = 1e-10;
    double max_relative = 1e-4;
    double growth = 10.0;
};

/// Lower Cholesky factor L of Sigma + jitter * I.
struct CovFactor {
    MatrixXd lower;
    double jitter = 0.0;
    double log_det = 0.0;

    Eigen::Index size() const { return lower.rows(); }

    template <class B>
    using Result = Eigen::Matrix<double, Eigen::Dynamic, B::ColsAtCompileTime>;

    // L^{-1} b
    template <class B>
    Result<B> forward(const Eigen::MatrixBase<B>& b) const {
        Result<B> out = b;
        lower.triangularView<Eigen::Lower>().solveInPlace(out);
        return out;
    }

    // L'^{-1} b
    template <class B>
    Result<B> backward(const Eigen::MatrixBase<B>& b) const {
        Result<B> out = b;
        lower.triangularView<Eigen::Lower>().transpose().solveInPlace(out);
        return out;
    }

    // Sigma^{-1} b via two triangular solves.
    template <class B>
    MatrixXd solve(const Eigen::MatrixBase<B>& b) const {
        return backward(forward(b));
    }

    // b' Sigma^{-1} b
    double quad_form(const VectorXd& b) const {
        const VectorXd z = forward(b);
        return z.squaredNorm();
    }
};

namespace detail {
inline std::optional<CovFactor> try_llt(const MatrixXd& sigma, double jitter) {
    MatrixXd a = sigma;
    if (jitter > 0.0) a.diagonal().array() += jitter;
    Eigen::LLT<MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) return std::nullopt;
    CovFactor f;
    f.lower = llt.matrixL();
    const auto diag = f.lower.diagonal();
    if (!((diag.array() > 0.0).all() && diag.allFinite())) return std::nullopt;
    // pivots at rounding level mean the factorization is numerically meaningless
    const double n = static_cast<double>(a.rows());
    const double floor = 16.0 * n * std::numeric_limits<double>::epsilon() * a.diagonal().mean();
    if (diag.array().square().minCoeff() < floor) return std::nullopt;
    f.jitter = jitter;
    f.log_det = 2.0 * diag.array().log().sum();
    return f;
}
}  // namespace detail

/// Cholesky with jitter escalation: 0, then first_relative * mean(diag),
/// growing by `growth` up to max_relative * mean(diag).
inline CovFactor cholesky_factor(const MatrixXd& sigma, const JitterPolicy& policy = {}) {
    require(sigma.rows() == sigma.cols(), "cholesky_factor: matrix is not square");
    require(sigma.rows() > 0, "cholesky_factor: empty matrix");
    if (!sigma.allFinite()) throw SingularCovarianceError("cholesky_factor: non-finite covariance entries");
    if (auto f = detail::try_llt(sigma, 0.0)) return *f;
    const double scale = sigma.diagonal().mean();
    if (scale > 0.0) {
        for (double rel = policy.first_relative; rel <= policy.max_relative * (1.0 + 1e-9); rel *= policy.growth)
            if (auto f = detail::try_llt(sigma, rel * scale)) return *f;
    }
    const auto n = sigma.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double tol = 1e-12 * std::max(std::abs(sigma(i, i)), 1e-300);
            if (std::abs(sigma(i, j) - sigma(i, i)) <= tol && std::abs(sigma(j, j) - sigma(i, i)) <= tol &&
                (sigma.row(i) - sigma.row(j)).cwiseAbs().maxCoeff() <= tol)
                throw SingularCovarianceError("covariance singular at maximum jitter: rows " + std::to_string(i) +
                                                  " and " + std::to_string(j) + " are identical",
                                              static_cast<int>(i), static_cast<int>(j));
        }
    }
    throw SingularCovarianceError("covariance matrix is not positive definite at maximum jitter");
}

/// log N(residual; 0, Sigma) from a factor of Sigma.
inline double gaussian_log_density(const CovFactor& f, const VectorXd& residual) {
    const double n = static_cast<double>(residual.size());
    return -0.5 * n * std::log(2.0 * std::numbers::pi) - 0.5 * f.log_det - 0.5 * f.quad_form(residual);
}

/// Log-likelihood of y under N(F beta, Sigma), 2*pi constant included.
inline double log_likelihood(const Dataset& data, const KernelParams& k, EmulatorKind kind,
                             const JitterPolicy& policy = {}) {
    const MatrixXd sigma = assemble_covariance(data, k, kind);
    const CovFactor f = cholesky_factor(sigma, policy);
    const MatrixXd F = model_basis(kind, k, data.inputs(), data.fidelities());
    return gaussian_log_density(f, data.outputs() - F * k.beta);
}

/// Generalized least squares pieces shared by the profile likelihood and the
/// basis-adjusted predictor.
struct GlsFit {
    VectorXd beta;
    MatrixXd whitened_basis;             // L^{-1} F
    Eigen::LLT<MatrixXd> information;    // F' Sigma^{-1} F
};

inline GlsFit gls_fit(const CovFactor& f, const MatrixXd& F, const VectorXd& y) {
    GlsFit g;
    g.whitened_basis = f.forward(F);
    const VectorXd wy = f.forward(y);
    const MatrixXd info = g.whitened_basis.transpose() * g.whitened_basis;
    g.information.compute(info);
    const VectorXd d = g.information.matrixL().toDenseMatrix().diagonal();
    if (g.information.info() != Eigen::Success || !(d.array() > 1e-10 * std::sqrt(info.diagonal().maxCoeff())).all())
        throw EstimationError("F' Sigma^{-1} F is singular: the mean basis is not identifiable from these "
                              "training points; use a smaller basis (e.g. constant)");
    g.beta = g.information.solve(g.whitened_basis.transpose() * wy);
    return g;
}

/// Log-likelihood with beta replaced by its GLS estimate. Writes the estimate
/// to `beta_out` when given.
inline double profile_log_likelihood(const Dataset& data, const KernelParams& k, EmulatorKind kind,
                                     VectorXd* beta_out = nullptr, double* jitter_out = nullptr,
                                     const JitterPolicy& policy = {}) {
    const MatrixXd sigma = assemble_covariance(data, k, kind);
    const CovFactor f = cholesky_factor(sigma, policy);
    const MatrixXd F = model_basis(kind, k, data.inputs(), data.fidelities());
    const GlsFit g = gls_fit(f, F, data.outputs());
    if (beta_out) *beta_out = g.beta;
    if (jitter_out) *jitter_out = f.jitter;
    return gaussian_log_density(f, data.outputs() - F * g.beta);
}

struct PredictiveDistribution {
    double mean = 0.0;
    double variance = 0.0;
    double lower95 = 0.0;
    double upper95 = 0.0;

    static PredictiveDistribution from(double mean, double variance) {
        const double v = std::max(variance, 0.0);
        const double half = 1.96 * std::sqrt(v);
        return {mean, v, mean - half, mean + half};
    }
    double sd() const { return std::sqrt(variance); }
};

enum class UqMode { plug_in, basis_adjusted };

inline std::string to_string(UqMode m) { return m == UqMode::plug_in ? "plug-in" : "basis-adjusted"; }
inline UqMode uq_from_string(const std::string& s) {
    if (s == "plug-in") return UqMode::plug_in;
    if (s == "basis-adjusted") return UqMode::basis_adjusted;
    throw StructuralError("unknown uq mode '" + s + "'");
}

/// A GP conditioned on training data under fixed hyperparameters.
///
/// Plug-in mode predicts with the supplied beta. Basis-adjusted mode replaces
/// beta by its GLS estimate and adds the variance inflation
/// (f - F' Sigma^{-1} k)' (F' Sigma^{-1} F)^{-1} (f - F' Sigma^{-1} k).
class GpPredictor {
public:
    GpPredictor(const Dataset& data, KernelParams params, EmulatorKind kind, UqMode mode = UqMode::basis_adjusted,
                const JitterPolicy& policy = {})
        : kind_(kind), mode_(mode), params_(std::move(params)), inputs_(data.inputs()),
          fidelities_(model_fidelities(kind, data.fidelities())) {
        validate(params_, kind_, data.p(), data.q());
        factor_ = cholesky_factor(assemble_covariance(data, params_, kind_), policy);
        const MatrixXd F = basis_matrix(params_.basis, inputs_, fidelities_);
        if (mode_ == UqMode::basis_adjusted) {
            gls_ = gls_fit(factor_, F, data.outputs());
            params_.beta = gls_->beta;
        }
        weights_ = factor_.solve(data.outputs() - F * params_.beta);
    }

    PredictiveDistribution predict(const VectorXd& x, const VectorXd& t) const {
        require(x.size() == inputs_.cols(), "predict: input dimension mismatch");
        const VectorXd tm = uses_fidelity(kind_) ? t : VectorXd(0);
        require(tm.size() == fidelities_.cols(), "predict: fidelity dimension mismatch");
        const VectorXd kstar = cross_covariance(kind_, params_, inputs_, fidelities_, x, tm);
        const VectorXd f = basis_row(params_.basis, x, tm);
        const double mean = f.dot(params_.beta) + kstar.dot(weights_);
        const VectorXd w = factor_.forward(kstar);
        double var = composite_kernel(kind_, params_, x, tm, x, tm) - w.squaredNorm();
        if (mode_ == UqMode::basis_adjusted) {
            const VectorXd u = f - gls_->whitened_basis.transpose() * w;
            const VectorXd z = gls_->information.matrixL().solve(u);
            var += z.squaredNorm();
        }
        return PredictiveDistribution::from(mean, var);
    }

    // Prediction at the limiting fidelity t = 0.
    PredictiveDistribution predict(const VectorXd& x) const {
        return predict(x, VectorXd::Zero(fidelities_.cols()));
    }

    const KernelParams& params() const { return params_; }
    const CovFactor& factor() const { return factor_; }
    EmulatorKind kind() const { return kind_; }
    UqMode mode() const { return mode_; }

private:
    EmulatorKind kind_;
    UqMode mode_;
    KernelParams params_;
    MatrixXd inputs_;
    MatrixXd fidelities_;
    CovFactor factor_;
    std::optional<GlsFit> gls_;
    VectorXd weights_;
};

inline PredictiveDistribution predict(const Dataset& data, const KernelParams& params, EmulatorKind kind,
                                      const VectorXd& x, UqMode mode = UqMode::basis_adjusted) {
    return GpPredictor(data, params, kind, mode).predict(x);
}

}  // namespace confgp

#endif
