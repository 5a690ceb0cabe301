#ifndef CONFGP_DATASET_HPP
#define CONFGP_DATASET_HPP

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "confgp/errors.hpp"

namespace confgp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Training records (x_i, t_i, y_i). Inputs live in [0,1]^p, fidelities in (0,1]^q.
class Dataset {
public:
    Dataset() = default;

    Dataset(MatrixXd inputs, MatrixXd fidelities, VectorXd outputs)
        : inputs_(std::move(inputs)), fidelities_(std::move(fidelities)), outputs_(std::move(outputs)) {
        const auto n = inputs_.rows();
        require(n > 0, "Dataset: no records");
        require(inputs_.cols() > 0, "Dataset: input dimension p must be positive");
        require(fidelities_.rows() == n || (fidelities_.size() == 0 && fidelities_.cols() == 0),
                "Dataset: fidelity row count differs from input row count");
        if (fidelities_.size() == 0) fidelities_.resize(n, 0);
        require(outputs_.size() == n, "Dataset: output length differs from input row count");
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index s = 0; s < inputs_.cols(); ++s) {
                const double v = inputs_(i, s);
                require(v >= 0.0 && v <= 1.0,
                        "Dataset: input (" + std::to_string(i) + "," + std::to_string(s) + ") outside [0,1]");
            }
            for (Eigen::Index r = 0; r < fidelities_.cols(); ++r) {
                const double v = fidelities_(i, r);
                require(v > 0.0 && v <= 1.0,
                        "Dataset: fidelity (" + std::to_string(i) + "," + std::to_string(r) + ") outside (0,1]");
            }
            require(std::isfinite(outputs_(i)), "Dataset: non-finite output at row " + std::to_string(i));
        }
    }

    int n() const { return static_cast<int>(inputs_.rows()); }
    int p() const { return static_cast<int>(inputs_.cols()); }
    int q() const { return static_cast<int>(fidelities_.cols()); }

    const MatrixXd& inputs() const { return inputs_; }
    const MatrixXd& fidelities() const { return fidelities_; }
    const VectorXd& outputs() const { return outputs_; }

    // Pairs (i, j), i < j, with identical (x, t).
    std::vector<std::pair<int, int>> duplicate_pairs() const {
        std::vector<std::pair<int, int>> out;
        for (int i = 0; i < n(); ++i)
            for (int j = i + 1; j < n(); ++j)
                if (inputs_.row(i) == inputs_.row(j) && fidelities_.row(i) == fidelities_.row(j))
                    out.emplace_back(i, j);
        return out;
    }

private:
    MatrixXd inputs_;
    MatrixXd fidelities_;
    VectorXd outputs_;
};

enum class BasisKind { constant, linear_x, linear_x_t };

inline int basis_size(BasisKind kind, int p, int q) {
    switch (kind) {
        case BasisKind::constant: return 1;
        case BasisKind::linear_x: return 1 + p;
        case BasisKind::linear_x_t: return 1 + p + q;
    }
    return 1;
}

// f(x, t). Fidelity columns are taken as-is, so they vanish at the target t = 0.
template <class X, class T>
VectorXd basis_row(BasisKind kind, const Eigen::MatrixBase<X>& x, const Eigen::MatrixBase<T>& t) {
    const auto p = static_cast<int>(x.size());
    const auto q = static_cast<int>(t.size());
    VectorXd f(basis_size(kind, p, q));
    f(0) = 1.0;
    if (kind == BasisKind::constant) return f;
    for (int s = 0; s < p; ++s) f(1 + s) = x(s);
    if (kind == BasisKind::linear_x) return f;
    for (int r = 0; r < q; ++r) f(1 + p + r) = t(r);
    return f;
}

inline MatrixXd basis_matrix(BasisKind kind, const MatrixXd& inputs, const MatrixXd& fidelities) {
    const auto n = inputs.rows();
    MatrixXd F(n, basis_size(kind, static_cast<int>(inputs.cols()), static_cast<int>(fidelities.cols())));
    for (Eigen::Index i = 0; i < n; ++i) F.row(i) = basis_row(kind, inputs.row(i), fidelities.row(i)).transpose();
    return F;
}

inline std::string to_string(BasisKind kind) {
    switch (kind) {
        case BasisKind::constant: return "constant";
        case BasisKind::linear_x: return "linear-x";
        case BasisKind::linear_x_t: return "linear-x-t";
    }
    return "?";
}

inline BasisKind basis_from_string(const std::string& s) {
    if (s == "constant") return BasisKind::constant;
    if (s == "linear-x") return BasisKind::linear_x;
    if (s == "linear-x-t") return BasisKind::linear_x_t;
    throw StructuralError("unknown basis '" + s + "'");
}

}  // namespace confgp

#endif
