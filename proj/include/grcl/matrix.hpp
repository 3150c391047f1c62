#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace grcl {

/// Dense row-major matrix of doubles. Rows are node embeddings almost
/// everywhere in this codebase, so the row accessors return spans.
struct Matrix {
    std::int64_t rows = 0;
    std::int64_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::int64_t r, std::int64_t c, double fill = 0.0)
        : rows(r), cols(c), data(static_cast<std::size_t>(r * c), fill) {
        if (r < 0 || c < 0) throw std::invalid_argument("Matrix: negative shape");
    }

    double& at(std::int64_t r, std::int64_t c) { return data[static_cast<std::size_t>(r * cols + c)]; }
    double at(std::int64_t r, std::int64_t c) const { return data[static_cast<std::size_t>(r * cols + c)]; }

    std::span<double> row(std::int64_t r) {
        return {data.data() + r * cols, static_cast<std::size_t>(cols)};
    }
    std::span<const double> row(std::int64_t r) const {
        return {data.data() + r * cols, static_cast<std::size_t>(cols)};
    }

    void zero() { std::fill(data.begin(), data.end(), 0.0); }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double dk = a[k] - b[k];
        s += dk * dk;
    }
    return s;
}

inline double squared_norm(std::span<const double> a) { return dot(a, a); }

/// y += c * x
inline void axpy(double c, std::span<const double> x, std::span<double> y) {
    for (std::size_t k = 0; k < x.size(); ++k) y[k] += c * x[k];
}

bool all_finite(const Matrix& m);

/// Frobenius norm squared.
double frobenius_sq(const Matrix& m);

/// Scales every row of `m` to unit Euclidean norm in place and returns the
/// original row norms. Throws naming the row if one has zero norm.
std::vector<double> normalize_rows(Matrix& m);

}  // namespace grcl
