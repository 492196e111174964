#pragma once

#include <cmath>
#include <cstdio>
#include <vector>

#include "stegodetect/network.hpp"

namespace stegodetect {

template <typename T>
struct LossResult {
    T value = T(0);
    Mat<T> dlogits;       // (Y - onehot(T)) / N, gradient of the error term
    bool clamped = false; // a true-class probability hit the 1e-12 floor
};

// Mean cross-entropy over the batch plus l2_coeff · Σ‖W‖² over weight
// matrices (embeddings and biases are not regularized).
template <typename T>
LossResult<T> compute_loss(const Mat<T>& probs, const std::vector<int>& labels,
                           const ModelParams<T>& params, T l2_coeff) {
    LossResult<T> out;
    out.dlogits = loss_logit_gradient(probs, labels);  // validates labels

    double err = 0.0;
    for (std::size_t r = 0; r < probs.rows; ++r) {
        double p = static_cast<double>(probs.at(r, labels[r]));
        if (p < 1e-12) {
            p = 1e-12;
            out.clamped = true;
            if (debug_checks_enabled())
                std::fprintf(stderr, "compute_loss: clamped zero probability at row %zu\n", r);
        }
        err -= std::log(p);
    }
    err /= static_cast<double>(probs.rows);

    double reg = 0.0;
    if (l2_coeff > T(0)) {
        for_each_tensor(params, [&](const std::string&, const Mat<T>& m, TensorKind kind) {
            if (kind != TensorKind::kWeight) return;
            for (const T v : m.data) reg += static_cast<double>(v) * static_cast<double>(v);
        });
        reg *= static_cast<double>(l2_coeff);
    }
    out.value = static_cast<T>(err + reg);
    return out;
}

}  // namespace stegodetect
