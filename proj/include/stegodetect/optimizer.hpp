#pragma once

#include <cmath>
#include <vector>

#include "stegodetect/network.hpp"

namespace stegodetect {

// Adam with bias correction. Moment buffers mirror the canonical tensor
// order; the bias-correction powers are kept as running products.
template <typename T>
struct AdamState {
    std::vector<Mat<T>> m, v;
    std::size_t step = 0;
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T epsilon = T(1e-8);
    T beta1_pow = T(1);
    T beta2_pow = T(1);

    static AdamState from_params(const ModelParams<T>& params) {
        AdamState s;
        for_each_tensor(params, [&](const std::string&, const Mat<T>& t, TensorKind) {
            s.m.emplace_back(t.rows, t.cols);
            s.v.emplace_back(t.rows, t.cols);
        });
        return s;
    }
};

template <typename T>
void adam_step(ModelParams<T>& params, const ModelParams<T>& grads, AdamState<T>& state, T lr) {
    state.step += 1;
    state.beta1_pow *= state.beta1;
    state.beta2_pow *= state.beta2;
    const T corr1 = T(1) - state.beta1_pow;
    const T corr2 = T(1) - state.beta2_pow;

    std::size_t idx = 0;
    for_each_tensor_pair(params, const_cast<ModelParams<T>&>(grads),
                         [&](const std::string& name, Mat<T>& p, Mat<T>& g, TensorKind) {
                             if (!all_finite(g))
                                 throw NumericError("adam_step: non-finite gradient in " + name);
                             Mat<T>& m = state.m[idx];
                             Mat<T>& v = state.v[idx];
                             for (std::size_t i = 0; i < p.size(); ++i) {
                                 const T gi = g.data[i];
                                 m.data[i] = state.beta1 * m.data[i] + (T(1) - state.beta1) * gi;
                                 v.data[i] = state.beta2 * v.data[i] + (T(1) - state.beta2) * gi * gi;
                                 const T mhat = m.data[i] / corr1;
                                 const T vhat = v.data[i] / corr2;
                                 p.data[i] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
                             }
                             ++idx;
                         });
}

// Global-norm clipping: if the L2 norm over all gradients exceeds
// clip_norm, every gradient is scaled by clip_norm / norm. Returns the
// pre-clip norm.
template <typename T>
T clip_gradients(ModelParams<T>& grads, T clip_norm) {
    if (!(clip_norm > T(0))) throw UsageError("clip_gradients: clip_norm must be positive");
    double sq = 0.0;
    for_each_tensor(grads, [&](const std::string&, const Mat<T>& g, TensorKind) {
        for (const T v : g.data) sq += static_cast<double>(v) * static_cast<double>(v);
    });
    const T norm = static_cast<T>(std::sqrt(sq));
    if (norm > clip_norm) {
        const T scale = clip_norm / norm;
        for_each_tensor(grads, [&](const std::string&, Mat<T>& g, TensorKind) {
            for (auto& v : g.data) v *= scale;
        });
    }
    return norm;
}

}  // namespace stegodetect
