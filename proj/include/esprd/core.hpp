#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace esprd {

// Error taxonomy. The CLI maps each category to a distinct exit code.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct config_error : error {
    using error::error;
};
struct data_error : error {
    using error::error;
};
struct fit_error : error {
    using error::error;
};
struct eval_error : error {
    using error::error;
};
struct unsupported_error : error {
    using error::error;
};

// Dense row-major matrix of doubles. Small and deliberately boring; the
// feature dimension here is 2N (N = qubit count), so nothing fancy is needed.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double* row_ptr(std::size_t r) { return data_.data() + r * cols_; }
    const double* row_ptr(std::size_t r) const { return data_.data() + r * cols_; }
    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

// Symmetric 2x2 matrix, stored as (xx, xy, yy).
struct Mat2 {
    double xx = 0.0;
    double xy = 0.0;
    double yy = 0.0;

    double det() const { return xx * yy - xy * xy; }
    double trace() const { return xx + yy; }

    // Positive-definite iff both eigenvalues are strictly positive.
    bool positive_definite() const { return xx > 0.0 && det() > 0.0; }

    // Lower-triangular Cholesky factor, tolerant of semidefinite input
    // (a zero matrix factors to zero; used by the noiseless simulator paths).
    void cholesky(double& l00, double& l10, double& l11) const {
        l00 = std::sqrt(std::max(xx, 0.0));
        l10 = l00 > 0.0 ? xy / l00 : 0.0;
        l11 = std::sqrt(std::max(yy - l10 * l10, 0.0));
    }
};

inline std::uint64_t pow3(unsigned n) {
    std::uint64_t r = 1;
    for (unsigned i = 0; i < n; ++i) r *= 3;
    return r;
}

}  // namespace esprd
