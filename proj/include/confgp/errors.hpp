#ifndef CONFGP_ERRORS_HPP
#define CONFGP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace confgp {

// Shape, size or domain violations in arguments.
class StructuralError : public std::invalid_argument {
public:
    explicit StructuralError(const std::string& what) : std::invalid_argument(what) {}
};

// Covariance matrix could not be factored even at the maximum jitter.
class SingularCovarianceError : public std::runtime_error {
public:
    SingularCovarianceError(const std::string& what, int row_a = -1, int row_b = -1)
        : std::runtime_error(what), row_a_(row_a), row_b_(row_b) {}

    // Indices of two identical rows, or -1 when no duplicate was found.
    int row_a() const { return row_a_; }
    int row_b() const { return row_b_; }

private:
    int row_a_;
    int row_b_;
};

// Parameter estimation failed (rank-deficient basis, no converged restart, ...).
class EstimationError : public std::runtime_error {
public:
    explicit EstimationError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool condition, const std::string& message) {
    if (!condition) throw StructuralError(message);
}

}  // namespace confgp

#endif
