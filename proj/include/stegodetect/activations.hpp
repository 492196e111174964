#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "stegodetect/errors.hpp"

namespace stegodetect {

// Gate nonlinearities with analytic derivatives. Both saturate cleanly and
// never produce NaN for finite input.

template <typename T>
T sigmoid(T x) {
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
}

template <typename T>
T sigmoid_deriv(T x) {
    const T s = sigmoid(x);
    return s * (T(1) - s);
}

template <typename T>
T tanh_act(T x) {
    return std::tanh(x);
}

template <typename T>
T tanh_deriv(T x) {
    const T t = std::tanh(x);
    return T(1) - t * t;
}

// Softmax over one row, stabilized by max subtraction so extreme logits
// cannot overflow.
template <typename T>
void softmax_row(const T* logits, std::size_t n, T* out) {
    const T mx = *std::max_element(logits, logits + n);
    T sum = T(0);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (std::size_t i = 0; i < n; ++i) out[i] /= sum;
}

template <typename T>
std::vector<T> softmax(const std::vector<T>& logits) {
    if (logits.empty()) throw UsageError("softmax: empty logit vector");
    std::vector<T> out(logits.size());
    softmax_row(logits.data(), logits.size(), out.data());
    return out;
}

}  // namespace stegodetect
