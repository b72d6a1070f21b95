#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>

namespace cmfda::linalg {

template <std::size_t N>
using Matrix = std::array<double, N * N>;  // row-major
template <std::size_t N>
using Vector = std::array<double, N>;

/// Lower Cholesky factor of a symmetric positive-definite matrix, or nullopt
/// when a pivot is not strictly positive.
template <std::size_t N>
std::optional<Matrix<N>> cholesky(const Matrix<N>& a) {
    Matrix<N> l{};
    for (std::size_t j = 0; j < N; ++j) {
        double diag = a[j * N + j];
        for (std::size_t k = 0; k < j; ++k) diag -= l[j * N + k] * l[j * N + k];
        if (!(diag > 0.0)) return std::nullopt;
        const double ljj = std::sqrt(diag);
        l[j * N + j] = ljj;
        for (std::size_t i = j + 1; i < N; ++i) {
            double s = a[i * N + j];
            for (std::size_t k = 0; k < j; ++k) s -= l[i * N + k] * l[j * N + k];
            l[i * N + j] = s / ljj;
        }
    }
    return l;
}

template <std::size_t N>
Vector<N> cholesky_solve(const Matrix<N>& l, Vector<N> b) {
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t k = 0; k < i; ++k) b[i] -= l[i * N + k] * b[k];
        b[i] /= l[i * N + i];
    }
    for (std::size_t ii = N; ii-- > 0;) {
        for (std::size_t k = ii + 1; k < N; ++k) b[ii] -= l[k * N + ii] * b[k];
        b[ii] /= l[ii * N + ii];
    }
    return b;
}

template <std::size_t N>
double norm1(const Matrix<N>& a) {
    double best = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < N; ++i) s += std::abs(a[i * N + j]);
        best = std::max(best, s);
    }
    return best;
}

/// Reciprocal 1-norm condition number of `a`, computed exactly from the
/// inverse obtained through its Cholesky factor `l`.
template <std::size_t N>
double reciprocal_condition(const Matrix<N>& a, const Matrix<N>& l) {
    Matrix<N> inv{};
    for (std::size_t j = 0; j < N; ++j) {
        Vector<N> e{};
        e[j] = 1.0;
        const auto col = cholesky_solve<N>(l, e);
        for (std::size_t i = 0; i < N; ++i) inv[i * N + j] = col[i];
    }
    const double denom = norm1<N>(a) * norm1<N>(inv);
    return denom > 0.0 && std::isfinite(denom) ? 1.0 / denom : 0.0;
}

}  // namespace cmfda::linalg
