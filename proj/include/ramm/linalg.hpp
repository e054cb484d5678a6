#pragma once
// Dense double-precision helpers. Everything the model needs is small
// (hundreds of rows at most), so plain loops over std::vector suffice.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ramm/error.hpp"

namespace ramm {

using Vec = std::vector<double>;

/// Row-major matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    friend bool operator==(const Matrix&, const Matrix&) = default;
};

inline void require_same_size(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw DimensionError(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                             " vs " + std::to_string(b) + ")");
    }
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    require_same_size(a.size(), b.size(), "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    require_same_size(a.size(), b.size(), "squared_distance");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

/// y = M x
inline Vec matvec(const Matrix& m, std::span<const double> x) {
    require_same_size(m.cols, x.size(), "matvec");
    Vec y(m.rows, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double* w = m.data.data() + r * m.cols;
        double s = 0.0;
        for (std::size_t c = 0; c < m.cols; ++c) s += w[c] * x[c];
        y[r] = s;
    }
    return y;
}

/// y += Mᵀ x
inline void matvec_transposed_accumulate(const Matrix& m, std::span<const double> x, std::span<double> y) {
    require_same_size(m.rows, x.size(), "matvec_transposed");
    require_same_size(m.cols, y.size(), "matvec_transposed");
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double xr = x[r];
        if (xr == 0.0) continue;
        const double* w = m.data.data() + r * m.cols;
        for (std::size_t c = 0; c < m.cols; ++c) y[c] += w[c] * xr;
    }
}

/// M += a bᵀ
inline void outer_accumulate(Matrix& m, std::span<const double> a, std::span<const double> b) {
    require_same_size(m.rows, a.size(), "outer");
    require_same_size(m.cols, b.size(), "outer");
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double ar = a[r];
        if (ar == 0.0) continue;
        double* w = m.data.data() + r * m.cols;
        for (std::size_t c = 0; c < m.cols; ++c) w[c] += ar * b[c];
    }
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    require_same_size(x.size(), y.size(), "axpy");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline Vec concat(std::span<const double> a, std::span<const double> b) {
    Vec out;
    out.reserve(a.size() + b.size());
    out.insert(out.end(), a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

inline bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

/// Returns v / ‖v‖₂; throws on a zero or non-finite vector.
inline Vec normalized(std::span<const double> v) {
    const double n = norm2(v);
    if (!(n > 0.0) || !std::isfinite(n)) throw NumericError("cannot normalize a zero or non-finite vector");
    Vec out(v.begin(), v.end());
    for (double& x : out) x /= n;
    return out;
}

inline double leaky_relu(double x, double slope) { return x > 0.0 ? x : slope * x; }
inline double leaky_relu_grad(double x, double slope) { return x > 0.0 ? 1.0 : slope; }

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// Numerically stable softmax (max subtraction).
inline Vec softmax(std::span<const double> logits) {
    if (logits.empty()) throw DimensionError("softmax of an empty vector");
    const double m = *std::max_element(logits.begin(), logits.end());
    Vec p(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - m);
        z += p[i];
    }
    for (double& x : p) x /= z;
    return p;
}

}  // namespace ramm
