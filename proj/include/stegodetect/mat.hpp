#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "stegodetect/errors.hpp"
#include "stegodetect/rng.hpp"

namespace stegodetect {

// When enabled, every numeric kernel verifies its output is finite and
// throws NumericError naming the offending operation. Off by default:
// it is a debugging mode, not a production guard.
bool debug_checks_enabled();
void set_debug_checks(bool enabled);

// Dense row-major matrix. Values are treated as immutable once an
// operation returns them; accumulation buffers are single-owner.
// Training runs in float, gradient checking instantiates double.
template <typename T>
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> data;

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, T(0)) {}
    Mat(std::size_t r, std::size_t c, std::initializer_list<T> values)
        : rows(r), cols(c), data(values) {
        if (data.size() != rows * cols)
            throw ShapeError("Mat init list has " + std::to_string(data.size()) +
                             " values for shape " + shape_str());
    }

    T& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    T at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    T* row_ptr(std::size_t r) { return data.data() + r * cols; }
    const T* row_ptr(std::size_t r) const { return data.data() + r * cols; }

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }
    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

    std::string shape_str() const {
        return std::to_string(rows) + "x" + std::to_string(cols);
    }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }
};

template <typename T>
using EigenRowMajor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<EigenRowMajor<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const EigenRowMajor<T>>;

template <typename T>
bool all_finite(const T* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(p[i])) return false;
    return true;
}

template <typename T>
bool all_finite(const Mat<T>& m) {
    return all_finite(m.data.data(), m.size());
}

template <typename T>
void check_finite(const Mat<T>& m, const char* op) {
    if (debug_checks_enabled() && !all_finite(m))
        throw NumericError(std::string(op) + " produced a non-finite value");
}

// Standard matrix product.
template <typename T>
Mat<T> matmul(const Mat<T>& a, const Mat<T>& b) {
    if (a.cols != b.rows)
        throw ShapeError("matmul: inner dimensions differ, " + a.shape_str() + " vs " +
                         b.shape_str());
    Mat<T> out(a.rows, b.cols);
    if (a.rows == 0 || b.cols == 0 || a.cols == 0) return out;
    MatMap<T>(out.data.data(), out.rows, out.cols).noalias() =
        ConstMatMap<T>(a.data.data(), a.rows, a.cols) *
        ConstMatMap<T>(b.data.data(), b.rows, b.cols);
    check_finite(out, "matmul");
    return out;
}

// out[0:m) = a[0:m) · b (+ bias broadcast over rows). `a` is the first m
// rows of a buffer with k columns. Used by the recurrent layers so padded
// batch rows never enter the product.
template <typename T>
void affine_rows(const T* a, std::size_t m, std::size_t k, const Mat<T>& b, const T* bias,
                 T* out) {
    if (m == 0) return;
    MatMap<T> o(out, m, b.cols);
    o.noalias() = ConstMatMap<T>(a, m, k) * ConstMatMap<T>(b.data.data(), b.rows, b.cols);
    if (bias) o.rowwise() += Eigen::Map<const Eigen::RowVectorX<T>>(bias, b.cols);
}

// acc += aᵀ[0:m) · g[0:m)  (a: m×k, g: m×n, acc: k×n). Weight-gradient kernel.
template <typename T>
void acc_tn(const T* a, const T* g, std::size_t m, std::size_t k, std::size_t n, Mat<T>& acc) {
    if (m == 0) return;
    MatMap<T>(acc.data.data(), k, n).noalias() +=
        ConstMatMap<T>(a, m, k).transpose() * ConstMatMap<T>(g, m, n);
}

// out[0:m) = g[0:m) · bᵀ  (g: m×n, b: k×n, out: m×k). Input-gradient kernel.
template <typename T>
void mul_nt(const T* g, std::size_t m, const Mat<T>& b, T* out) {
    if (m == 0) return;
    MatMap<T>(out, m, b.rows).noalias() =
        ConstMatMap<T>(g, m, b.cols) * ConstMatMap<T>(b.data.data(), b.rows, b.cols).transpose();
}

// acc[j] += sum over the first m rows of g[:, j]. Bias-gradient kernel.
template <typename T>
void acc_col_sums(const T* g, std::size_t m, std::size_t n, Mat<T>& acc) {
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t j = 0; j < n; ++j) acc.data[j] += g[r * n + j];
}

enum class InitScheme { kGlorotUniform, kZeros, kOnes };

// Glorot-uniform weights in ±sqrt(6/(fan_in+fan_out)); zero/one fills for
// biases. The LSTM forget-gate bias uses kOnes (see network.hpp).
template <typename T>
Mat<T> init_weights(std::size_t rows, std::size_t cols, Rng& rng,
                    InitScheme scheme = InitScheme::kGlorotUniform) {
    if (rows == 0 || cols == 0)
        throw UsageError("init_weights: zero dimension " + std::to_string(rows) + "x" +
                         std::to_string(cols));
    Mat<T> m(rows, cols);
    switch (scheme) {
        case InitScheme::kZeros:
            break;
        case InitScheme::kOnes:
            m.fill(T(1));
            break;
        case InitScheme::kGlorotUniform: {
            const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
            for (auto& v : m.data) v = static_cast<T>(rng.uniform(-bound, bound));
            break;
        }
    }
    return m;
}

}  // namespace stegodetect
