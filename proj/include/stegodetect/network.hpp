#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "stegodetect/activations.hpp"
#include "stegodetect/corpus.hpp"
#include "stegodetect/mat.hpp"
#include "stegodetect/model_config.hpp"
#include "stegodetect/rng.hpp"

namespace stegodetect {

// ---------------------------------------------------------------------------
// Parameters

// One LSTM cell layer. Gate weights act on the concatenation [h_prev, x]:
// rows [0, units) hold the recurrent block, rows [units, units+input_dim)
// the input block. Four separate matrices, one per gate.
template <typename T>
struct LstmLayerParams {
    Mat<T> w_i, w_f, w_c, w_o;  // (units + input_dim) × units
    Mat<T> b_i, b_f, b_c, b_o;  // 1 × units
    std::size_t input_dim = 0;
    std::size_t units = 0;
};

// All trainable tensors. Gradient buffers use the same structure
// (zeros_like); persistence and the optimizer walk both via
// for_each_tensor, which fixes the canonical tensor order.
template <typename T>
struct ModelParams {
    ModelConfig config;
    Mat<T> embedding;  // vocab_size × embedding_dim; row 0 is PAD and stays zero
    std::vector<std::vector<LstmLayerParams<T>>> stacks;  // [direction][layer]
    Mat<T> fusion_w;   // splice_dim × fused_dim
    Mat<T> fusion_b;   // 1 × fused_dim
    Mat<T> head_w;     // fused_dim × num_classes
    Mat<T> head_b;     // 1 × num_classes
};

enum class TensorKind { kEmbedding, kWeight, kBias };

// Visits every tensor in a fixed, documented order:
//   embedding,
//   per direction (fwd then bwd), per layer: w_i w_f w_c w_o b_i b_f b_c b_o,
//   fusion.w fusion.b head.w head.b
template <typename Params, typename Fn>
void for_each_tensor(Params& p, Fn&& fn) {
    fn("embedding", p.embedding, TensorKind::kEmbedding);
    for (std::size_t d = 0; d < p.stacks.size(); ++d) {
        const std::string dir = d == 0 ? "fwd" : "bwd";
        for (std::size_t l = 0; l < p.stacks[d].size(); ++l) {
            auto& layer = p.stacks[d][l];
            const std::string base = dir + ".l" + std::to_string(l) + ".";
            fn(base + "w_i", layer.w_i, TensorKind::kWeight);
            fn(base + "w_f", layer.w_f, TensorKind::kWeight);
            fn(base + "w_c", layer.w_c, TensorKind::kWeight);
            fn(base + "w_o", layer.w_o, TensorKind::kWeight);
            fn(base + "b_i", layer.b_i, TensorKind::kBias);
            fn(base + "b_f", layer.b_f, TensorKind::kBias);
            fn(base + "b_c", layer.b_c, TensorKind::kBias);
            fn(base + "b_o", layer.b_o, TensorKind::kBias);
        }
    }
    fn("fusion.w", p.fusion_w, TensorKind::kWeight);
    fn("fusion.b", p.fusion_b, TensorKind::kBias);
    fn("head.w", p.head_w, TensorKind::kWeight);
    fn("head.b", p.head_b, TensorKind::kBias);
}

template <typename T>
ModelParams<T> allocate_params(const ModelConfig& config);

// Glorot-uniform weights and embeddings, zero biases except the
// forget-gate bias, which starts at 1. Tensors are drawn in canonical
// order, so equal seeds give identical models. The PAD embedding row is
// zeroed and never receives gradient, so it stays the zero vector.
template <typename T>
ModelParams<T> init_params(const ModelConfig& config, Rng& rng) {
    ModelParams<T> p = allocate_params<T>(config);
    for_each_tensor(p, [&](const std::string& name, Mat<T>& m, TensorKind kind) {
        switch (kind) {
            case TensorKind::kEmbedding:
            case TensorKind::kWeight:
                m = init_weights<T>(m.rows, m.cols, rng);
                break;
            case TensorKind::kBias:
                if (name.size() >= 3 && name.compare(name.size() - 3, 3, "b_f") == 0) m.fill(T(1));
                break;
        }
    });
    for (std::size_t j = 0; j < config.embedding_dim; ++j)
        p.embedding.at(Vocabulary::kPad, j) = T(0);
    return p;
}

// Structural zip over two parameter sets with identical layout, e.g.
// parameters and their gradient buffers.
template <typename ParamsA, typename ParamsB, typename Fn>
void for_each_tensor_pair(ParamsA& a, ParamsB& b, Fn&& fn) {
    std::vector<std::pair<std::string, typename std::remove_reference_t<decltype(a.embedding)>*>> ta;
    std::vector<typename std::remove_reference_t<decltype(b.embedding)>*> tb;
    std::vector<TensorKind> kinds;
    for_each_tensor(a, [&](const std::string& name, auto& m, TensorKind k) {
        ta.emplace_back(name, &m);
        kinds.push_back(k);
    });
    for_each_tensor(b, [&](const std::string&, auto& m, TensorKind) { tb.push_back(&m); });
    if (ta.size() != tb.size())
        throw ShapeError("tensor pair walk: mismatched parameter structures");
    for (std::size_t i = 0; i < ta.size(); ++i)
        fn(ta[i].first, *ta[i].second, *tb[i], kinds[i]);
}

// Zero-valued parameter set with the shapes the config dictates.
template <typename T>
ModelParams<T> allocate_params(const ModelConfig& config) {
    config.validate();
    ModelParams<T> p;
    p.config = config;
    p.embedding = Mat<T>(config.vocab_size, config.embedding_dim);
    p.stacks.resize(config.num_directions());
    for (auto& stack : p.stacks) {
        stack.resize(config.num_layers);
        for (std::size_t l = 0; l < config.num_layers; ++l) {
            auto& layer = stack[l];
            layer.units = config.units_per_layer;
            layer.input_dim = l == 0 ? config.embedding_dim : config.units_per_layer;
            const std::size_t in_rows = layer.units + layer.input_dim;
            layer.w_i = Mat<T>(in_rows, layer.units);
            layer.w_f = Mat<T>(in_rows, layer.units);
            layer.w_c = Mat<T>(in_rows, layer.units);
            layer.w_o = Mat<T>(in_rows, layer.units);
            layer.b_i = Mat<T>(1, layer.units);
            layer.b_f = Mat<T>(1, layer.units);
            layer.b_c = Mat<T>(1, layer.units);
            layer.b_o = Mat<T>(1, layer.units);
        }
    }
    p.fusion_w = Mat<T>(config.splice_dim(), config.fused_dim);
    p.fusion_b = Mat<T>(1, config.fused_dim);
    p.head_w = Mat<T>(config.fused_dim, config.num_classes);
    p.head_b = Mat<T>(1, config.num_classes);
    return p;
}

template <typename T>
ModelParams<T> zeros_like(const ModelParams<T>& src) {
    return allocate_params<T>(src.config);
}

// Elementwise precision cast, e.g. a double-trained model down to the
// float layout checkpoints use.
template <typename To, typename From>
ModelParams<To> convert_params(const ModelParams<From>& src) {
    ModelParams<To> dst = allocate_params<To>(src.config);
    for_each_tensor_pair(src, dst,
                         [](const std::string&, const Mat<From>& a, Mat<To>& b, TensorKind) {
                             for (std::size_t i = 0; i < a.size(); ++i)
                                 b.data[i] = static_cast<To>(a.data[i]);
                         });
    return dst;
}

template <typename T>
void zero_all(ModelParams<T>& p) {
    for_each_tensor(p, [](const std::string&, Mat<T>& m, TensorKind) { m.fill(T(0)); });
}

// ---------------------------------------------------------------------------
// Embedding

template <typename T>
struct EmbeddedSequence {
    Mat<T> matrix;  // L × embedding_dim; rows past valid_len are zero
    std::size_t valid_len = 0;
};

template <typename T>
EmbeddedSequence<T> embed_sequence(const std::vector<std::uint32_t>& token_ids,
                                   const ModelParams<T>& params) {
    EmbeddedSequence<T> out;
    out.matrix = Mat<T>(token_ids.size(), params.config.embedding_dim);
    bool seen_pad = false;
    for (std::size_t i = 0; i < token_ids.size(); ++i) {
        const std::uint32_t id = token_ids[i];
        if (id >= params.config.vocab_size)
            throw DataError("token id " + std::to_string(id) + " at position " +
                            std::to_string(i) + " out of range (vocab " +
                            std::to_string(params.config.vocab_size) + ")");
        if (id == Vocabulary::kPad) {
            seen_pad = true;
            continue;
        }
        if (seen_pad) throw DataError("padding must be trailing (token after PAD at position " +
                                      std::to_string(i) + ")");
        std::memcpy(out.matrix.row_ptr(i), params.embedding.row_ptr(id),
                    params.config.embedding_dim * sizeof(T));
        out.valid_len = i + 1;
    }
    return out;
}

// ---------------------------------------------------------------------------
// LSTM cell

// Cached activations for one cell update; only the active-row prefix is
// stored. Exactly what the backward pass needs.
template <typename T>
struct StepCache {
    std::size_t active = 0;
    Mat<T> h_prev, c_prev;               // active × units, state before the update
    Mat<T> gate_i, gate_f, gate_g, gate_o;  // active × units
    Mat<T> tanh_c;                       // tanh of the updated cell state
};

// Advances rows [0, m) of (h, c) in place by one cell update.
//   I = σ(W_i·[h,x]+b_i)   F = σ(W_f·[h,x]+b_f)
//   C = F⊙C_prev + I⊙tanh(W_c·[h,x]+b_c)
//   O = σ(W_o·[h,x]+b_o)   h = O⊙tanh(C)
template <typename T>
void lstm_step_rows(const T* x, std::size_t m, std::size_t input_dim,
                    const LstmLayerParams<T>& layer, Mat<T>& h, Mat<T>& c, StepCache<T>& cache) {
    const std::size_t n = layer.units;
    cache.active = m;
    cache.h_prev = Mat<T>(m, n);
    cache.c_prev = Mat<T>(m, n);
    std::memcpy(cache.h_prev.data.data(), h.data.data(), m * n * sizeof(T));
    std::memcpy(cache.c_prev.data.data(), c.data.data(), m * n * sizeof(T));

    Mat<T> concat(m, n + input_dim);
    for (std::size_t r = 0; r < m; ++r) {
        std::memcpy(concat.row_ptr(r), h.row_ptr(r), n * sizeof(T));
        std::memcpy(concat.row_ptr(r) + n, x + r * input_dim, input_dim * sizeof(T));
    }

    cache.gate_i = Mat<T>(m, n);
    cache.gate_f = Mat<T>(m, n);
    cache.gate_g = Mat<T>(m, n);
    cache.gate_o = Mat<T>(m, n);
    affine_rows(concat.data.data(), m, n + input_dim, layer.w_i, layer.b_i.data.data(),
                cache.gate_i.data.data());
    affine_rows(concat.data.data(), m, n + input_dim, layer.w_f, layer.b_f.data.data(),
                cache.gate_f.data.data());
    affine_rows(concat.data.data(), m, n + input_dim, layer.w_c, layer.b_c.data.data(),
                cache.gate_g.data.data());
    affine_rows(concat.data.data(), m, n + input_dim, layer.w_o, layer.b_o.data.data(),
                cache.gate_o.data.data());

    const std::size_t mn = m * n;
    for (std::size_t i = 0; i < mn; ++i) cache.gate_i.data[i] = sigmoid(cache.gate_i.data[i]);
    for (std::size_t i = 0; i < mn; ++i) cache.gate_f.data[i] = sigmoid(cache.gate_f.data[i]);
    for (std::size_t i = 0; i < mn; ++i) cache.gate_g.data[i] = std::tanh(cache.gate_g.data[i]);
    for (std::size_t i = 0; i < mn; ++i) cache.gate_o.data[i] = sigmoid(cache.gate_o.data[i]);

    cache.tanh_c = Mat<T>(m, n);
    for (std::size_t i = 0; i < mn; ++i) {
        c.data[i] = cache.gate_f.data[i] * cache.c_prev.data[i] +
                    cache.gate_i.data[i] * cache.gate_g.data[i];
        cache.tanh_c.data[i] = std::tanh(c.data[i]);
        h.data[i] = cache.gate_o.data[i] * cache.tanh_c.data[i];
    }
    check_finite(h, "lstm_step");
}

template <typename T>
struct LstmStep {
    Mat<T> h, c;
    StepCache<T> cache;
};

// One cell update over a batch of row vectors (pure form).
template <typename T>
LstmStep<T> lstm_step(const Mat<T>& x, const Mat<T>& h_prev, const Mat<T>& c_prev,
                      const LstmLayerParams<T>& layer) {
    if (x.rows != h_prev.rows || x.rows != c_prev.rows || h_prev.cols != layer.units ||
        c_prev.cols != layer.units || x.cols != layer.input_dim)
        throw ShapeError("lstm_step: x " + x.shape_str() + ", h " + h_prev.shape_str() +
                         ", c " + c_prev.shape_str() + " do not fit layer (units " +
                         std::to_string(layer.units) + ", input " +
                         std::to_string(layer.input_dim) + ")");
    LstmStep<T> out;
    out.h = h_prev;
    out.c = c_prev;
    lstm_step_rows(x.data.data(), x.rows, x.cols, layer, out.h, out.c, out.cache);
    return out;
}

// ---------------------------------------------------------------------------
// Stacked recurrence over a padded batch

enum class Direction { kForward, kBackward };
enum class RunMode { kTrain, kInfer };

template <typename T>
struct DirectionTrace {
    // Indexed [layer][processing step]; a step's entries cover only the
    // rows active at that step. layer_in[0] is unused (the embedded input
    // serves as layer 0's input); drop_mask is empty outside training.
    std::vector<std::vector<StepCache<T>>> steps;
    std::vector<std::vector<Mat<T>>> layer_in;
    std::vector<std::vector<Mat<T>>> drop_mask;
    Mat<T> final_h;  // batch × units; each row frozen at its last valid step
};

// Runs one direction's stack. Rows must be ordered by valid_len descending
// so that at any time t the active rows form a prefix; inactive rows keep
// their state (padding never updates state). When `top_states` is given,
// the top layer's full state matrix is recorded per absolute timestep.
template <typename T>
void run_direction(const std::vector<Mat<T>>& embedded, const std::vector<std::size_t>& active_at,
                   const std::vector<LstmLayerParams<T>>& stack, Direction dir, RunMode mode,
                   double dropout_rate, Rng* rng, DirectionTrace<T>& trace,
                   std::vector<Mat<T>>* top_states = nullptr) {
    const std::size_t max_len = embedded.size();
    const std::size_t batch = embedded.empty() ? 0 : embedded[0].rows;
    const std::size_t num_layers = stack.size();
    const bool record = mode == RunMode::kTrain;
    const bool use_dropout = record && dropout_rate > 0.0;
    const T keep = static_cast<T>(1.0 - dropout_rate);

    std::vector<Mat<T>> h(num_layers), c(num_layers);
    for (std::size_t l = 0; l < num_layers; ++l) {
        h[l] = Mat<T>(batch, stack[l].units);
        c[l] = Mat<T>(batch, stack[l].units);
    }
    if (record) {
        trace.steps.assign(num_layers, {});
        trace.layer_in.assign(num_layers, {});
        trace.drop_mask.assign(num_layers > 0 ? num_layers - 1 : 0, {});
    }
    if (top_states) top_states->assign(max_len, Mat<T>());

    Mat<T> masked;  // scratch when feeding layer l+1 in training mode
    StepCache<T> scratch_cache;
    for (std::size_t s = 0; s < max_len; ++s) {
        const std::size_t t = dir == Direction::kForward ? s : max_len - 1 - s;
        const std::size_t a = active_at[t];
        const T* x = embedded[t].data.data();
        std::size_t in_dim = embedded[t].cols;
        for (std::size_t l = 0; l < num_layers; ++l) {
            StepCache<T>* cache = &scratch_cache;
            if (record) cache = &trace.steps[l].emplace_back();
            if (a > 0) lstm_step_rows(x, a, in_dim, stack[l], h[l], c[l], *cache);
            if (l + 1 < num_layers) {
                const std::size_t n = stack[l].units;
                if (use_dropout) {
                    Mat<T> mask(a, n);
                    for (auto& v : mask.data) v = rng->bernoulli(1.0 - dropout_rate) ? T(1) / keep : T(0);
                    masked = Mat<T>(a, n);
                    for (std::size_t i = 0; i < a * n; ++i)
                        masked.data[i] = h[l].data[i] * mask.data[i];
                    trace.drop_mask[l].push_back(std::move(mask));
                    trace.layer_in[l + 1].push_back(masked);
                    x = masked.data.data();
                } else if (record) {
                    Mat<T> copy(a, n);
                    std::memcpy(copy.data.data(), h[l].data.data(), a * n * sizeof(T));
                    trace.layer_in[l + 1].push_back(std::move(copy));
                    x = trace.layer_in[l + 1].back().data.data();
                } else {
                    x = h[l].data.data();
                }
                in_dim = n;
            }
        }
        if (top_states) (*top_states)[t] = h[num_layers - 1];
    }
    trace.final_h = std::move(h[num_layers - 1]);
}

// Per-timestep hidden states of the top layer for a single sequence; the
// backward direction iterates from the last valid token down to the first.
template <typename T>
std::vector<Mat<T>> rnn_forward(const EmbeddedSequence<T>& seq, Direction dir,
                                const ModelParams<T>& params, RunMode mode = RunMode::kInfer,
                                Rng* rng = nullptr) {
    if (seq.valid_len == 0) throw DataError("rnn_forward: sequence has no valid tokens");
    const std::size_t L = seq.matrix.rows;
    std::vector<Mat<T>> embedded(L);
    std::vector<std::size_t> active_at(L);
    for (std::size_t t = 0; t < L; ++t) {
        embedded[t] = Mat<T>(1, seq.matrix.cols);
        std::memcpy(embedded[t].data.data(), seq.matrix.row_ptr(t), seq.matrix.cols * sizeof(T));
        active_at[t] = t < seq.valid_len ? 1 : 0;
    }
    const std::size_t d = dir == Direction::kForward ? 0 : (params.stacks.size() > 1 ? 1 : 0);
    DirectionTrace<T> trace;
    std::vector<Mat<T>> states;
    run_direction(embedded, active_at, params.stacks[d], dir, mode,
                  params.config.dropout_rate, rng, trace, &states);
    states.resize(seq.valid_len);
    return states;
}

// Splice of the two directions' terminal features: the forward state at
// the last valid token, the backward state at the first token.
template <typename T>
Mat<T> extract_sentence_feature(const std::vector<Mat<T>>& fwd_states,
                                const std::vector<Mat<T>>* bwd_states, std::size_t valid_len) {
    if (fwd_states.empty() || valid_len == 0 || valid_len > fwd_states.size())
        throw UsageError("extract_sentence_feature: no states for valid_len " +
                         std::to_string(valid_len));
    const Mat<T>& f = fwd_states[valid_len - 1];
    if (!bwd_states) return f;
    const Mat<T>& b = (*bwd_states)[0];
    Mat<T> z(f.rows, f.cols + b.cols);
    for (std::size_t r = 0; r < f.rows; ++r) {
        std::memcpy(z.row_ptr(r), f.row_ptr(r), f.cols * sizeof(T));
        std::memcpy(z.row_ptr(r) + f.cols, b.row_ptr(r), b.cols * sizeof(T));
    }
    return z;
}

// Affine fusion F = Z·W_F + b_F; deliberately has no activation.
template <typename T>
Mat<T> fuse_features(const Mat<T>& z, const ModelParams<T>& params) {
    if (z.cols != params.fusion_w.rows)
        throw ShapeError("fuse_features: Z " + z.shape_str() + " vs fusion " +
                         params.fusion_w.shape_str());
    Mat<T> f(z.rows, params.fusion_w.cols);
    affine_rows(z.data.data(), z.rows, z.cols, params.fusion_w, params.fusion_b.data.data(),
                f.data.data());
    check_finite(f, "fuse_features");
    return f;
}

template <typename T>
struct ClassifyResult {
    Mat<T> logits;
    Mat<T> probs;
};

// Softmax head over num_classes logits. For binary models the stego
// probability is the class-1 column.
template <typename T>
ClassifyResult<T> classify(const Mat<T>& f, const ModelParams<T>& params) {
    if (f.cols != params.head_w.rows)
        throw ShapeError("classify: F " + f.shape_str() + " vs head " +
                         params.head_w.shape_str());
    ClassifyResult<T> out;
    out.logits = Mat<T>(f.rows, params.head_w.cols);
    affine_rows(f.data.data(), f.rows, f.cols, params.head_w, params.head_b.data.data(),
                out.logits.data.data());
    out.probs = Mat<T>(out.logits.rows, out.logits.cols);
    for (std::size_t r = 0; r < out.logits.rows; ++r)
        softmax_row(out.logits.row_ptr(r), out.logits.cols, out.probs.row_ptr(r));
    check_finite(out.probs, "classify");
    return out;
}

// Stego iff the stego probability reaches the threshold (inclusive).
inline int decide(double y_stego, double threshold) {
    return y_stego >= threshold ? 1 : 0;
}

// ---------------------------------------------------------------------------
// Full model forward / backward

template <typename T>
struct ForwardTrace {
    RunMode mode = RunMode::kInfer;
    std::size_t batch_size = 0;
    std::size_t max_len = 0;
    std::vector<std::uint32_t> ids;        // batch × max_len (copy of the batch)
    std::vector<std::uint32_t> valid_len;  // descending
    std::vector<std::size_t> active_at;    // rows with valid_len > t
    std::vector<Mat<T>> embedded;          // [t] batch × d
    std::vector<DirectionTrace<T>> dirs;
    Mat<T> spliced;     // Z: batch × splice_dim
    Mat<T> fused;       // F: batch × fused_dim (pre-dropout)
    Mat<T> fused_mask;  // dropout mask on F, train mode only
    Mat<T> logits;      // batch × num_classes
    Mat<T> probs;
};

template <typename T>
ForwardTrace<T> forward(const Batch& batch, const ModelParams<T>& params, RunMode mode,
                        Rng* rng = nullptr) {
    const ModelConfig& cfg = params.config;
    if (batch.size == 0) throw UsageError("forward: empty batch");
    for (std::size_t r = 0; r + 1 < batch.size; ++r)
        if (batch.valid_len[r] < batch.valid_len[r + 1])
            throw UsageError("forward: batch rows must be ordered by valid_len descending");
    for (std::size_t r = 0; r < batch.size; ++r)
        if (batch.valid_len[r] == 0) throw DataError("forward: sample with no valid tokens");
    const bool train = mode == RunMode::kTrain;
    const bool use_dropout = train && cfg.dropout_rate > 0.0;
    if (use_dropout && rng == nullptr)
        throw UsageError("forward: training with dropout requires an rng");

    ForwardTrace<T> tr;
    tr.mode = mode;
    tr.batch_size = batch.size;
    tr.max_len = batch.max_len;
    tr.ids = batch.ids;
    tr.valid_len = batch.valid_len;
    tr.active_at.resize(batch.max_len);
    for (std::size_t t = 0; t < batch.max_len; ++t) {
        std::size_t a = 0;
        while (a < batch.size && batch.valid_len[a] > t) ++a;
        tr.active_at[t] = a;
    }

    // Embedding lookup; PAD rows read the zero row.
    tr.embedded.resize(batch.max_len);
    for (std::size_t t = 0; t < batch.max_len; ++t) {
        tr.embedded[t] = Mat<T>(batch.size, cfg.embedding_dim);
        for (std::size_t r = 0; r < batch.size; ++r) {
            const std::uint32_t id = batch.id_at(r, t);
            if (id >= cfg.vocab_size)
                throw DataError("forward: token id " + std::to_string(id) + " at row " +
                                std::to_string(r) + " position " + std::to_string(t) +
                                " out of range");
            std::memcpy(tr.embedded[t].row_ptr(r), params.embedding.row_ptr(id),
                        cfg.embedding_dim * sizeof(T));
        }
    }

    tr.dirs.resize(cfg.num_directions());
    run_direction(tr.embedded, tr.active_at, params.stacks[0], Direction::kForward, mode,
                  cfg.dropout_rate, rng, tr.dirs[0]);
    if (cfg.bidirectional)
        run_direction(tr.embedded, tr.active_at, params.stacks[1], Direction::kBackward, mode,
                      cfg.dropout_rate, rng, tr.dirs[1]);

    const std::size_t units = cfg.units_per_layer;
    tr.spliced = Mat<T>(batch.size, cfg.splice_dim());
    for (std::size_t r = 0; r < batch.size; ++r) {
        std::memcpy(tr.spliced.row_ptr(r), tr.dirs[0].final_h.row_ptr(r), units * sizeof(T));
        if (cfg.bidirectional)
            std::memcpy(tr.spliced.row_ptr(r) + units, tr.dirs[1].final_h.row_ptr(r),
                        units * sizeof(T));
    }

    tr.fused = fuse_features(tr.spliced, params);
    Mat<T> f_used = tr.fused;
    if (use_dropout) {
        const T keep = static_cast<T>(1.0 - cfg.dropout_rate);
        tr.fused_mask = Mat<T>(tr.fused.rows, tr.fused.cols);
        for (auto& v : tr.fused_mask.data)
            v = rng->bernoulli(1.0 - cfg.dropout_rate) ? T(1) / keep : T(0);
        for (std::size_t i = 0; i < f_used.size(); ++i) f_used.data[i] *= tr.fused_mask.data[i];
    }
    auto cls = classify(f_used, params);
    tr.logits = std::move(cls.logits);
    tr.probs = std::move(cls.probs);
    return tr;
}

// Gradient of the mean cross-entropy error term with respect to the
// logits: (Y - onehot(T)) / N. Shared by compute_loss and backward.
template <typename T>
Mat<T> loss_logit_gradient(const Mat<T>& probs, const std::vector<int>& labels) {
    if (labels.size() != probs.rows)
        throw UsageError("loss gradient: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(probs.rows) + " rows");
    Mat<T> d = probs;
    const T inv_n = T(1) / static_cast<T>(probs.rows);
    for (std::size_t r = 0; r < probs.rows; ++r) {
        if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= probs.cols)
            throw UsageError("loss gradient: label " + std::to_string(labels[r]) +
                             " out of range");
        d.at(r, labels[r]) -= T(1);
    }
    for (auto& v : d.data) v *= inv_n;
    return d;
}

namespace detail {

// BPTT through one direction's stack. d_final is the loss gradient at the
// direction's spliced terminal feature. Rows that were inactive at a step
// pass their carried gradient through untouched, mirroring the forward
// freeze of padded steps.
template <typename T>
void backward_direction(const ForwardTrace<T>& tr, std::size_t dir_idx, const Mat<T>& d_final,
                        const ModelParams<T>& params, ModelParams<T>& grads) {
    const auto& dt = tr.dirs[dir_idx];
    const auto& stack = params.stacks[dir_idx];
    auto& gstack = grads.stacks[dir_idx];
    const Direction dir = dir_idx == 0 ? Direction::kForward : Direction::kBackward;
    const std::size_t L = tr.max_len;
    const std::size_t B = tr.batch_size;
    const std::size_t num_layers = stack.size();
    const bool masked_boundaries = !dt.drop_mask.empty();

    // d_ext[t]: gradient arriving at this layer's output at absolute time
    // t from the layer above (empty for the top layer).
    std::vector<Mat<T>> d_ext(L);
    for (std::size_t li = num_layers; li-- > 0;) {
        const auto& layer = stack[li];
        auto& glayer = gstack[li];
        const std::size_t n = layer.units;
        const std::size_t in_dim = layer.input_dim;
        Mat<T> dh_carry(B, n), dc_carry(B, n);
        if (li == num_layers - 1) dh_carry = d_final;
        std::vector<Mat<T>> d_below(li > 0 ? L : 0);

        for (std::size_t s = L; s-- > 0;) {
            const std::size_t t = dir == Direction::kForward ? s : L - 1 - s;
            const std::size_t a = tr.active_at[t];
            if (a == 0) continue;
            const StepCache<T>& cache = dt.steps[li][s];
            const T* x_in = li == 0 ? tr.embedded[t].data.data()
                                    : dt.layer_in[li][s].data.data();

            const std::size_t an = a * n;
            Mat<T> dpre_i(a, n), dpre_f(a, n), dpre_c(a, n), dpre_o(a, n);
            const T* ext = d_ext[t].empty() ? nullptr : d_ext[t].data.data();
            for (std::size_t i = 0; i < an; ++i) {
                const T dh = dh_carry.data[i] + (ext ? ext[i] : T(0));
                const T o = cache.gate_o.data[i];
                const T tc = cache.tanh_c.data[i];
                const T gi = cache.gate_i.data[i];
                const T gf = cache.gate_f.data[i];
                const T gg = cache.gate_g.data[i];
                const T dc = dh * o * (T(1) - tc * tc) + dc_carry.data[i];
                dpre_o.data[i] = dh * tc * o * (T(1) - o);
                dpre_f.data[i] = dc * cache.c_prev.data[i] * gf * (T(1) - gf);
                dpre_i.data[i] = dc * gg * gi * (T(1) - gi);
                dpre_c.data[i] = dc * gi * (T(1) - gg * gg);
                dc_carry.data[i] = dc * gf;
            }

            // Weight gradients against the concatenated step input.
            Mat<T> concat(a, n + in_dim);
            for (std::size_t r = 0; r < a; ++r) {
                std::memcpy(concat.row_ptr(r), cache.h_prev.row_ptr(r), n * sizeof(T));
                std::memcpy(concat.row_ptr(r) + n, x_in + r * in_dim, in_dim * sizeof(T));
            }
            acc_tn(concat.data.data(), dpre_i.data.data(), a, n + in_dim, n, glayer.w_i);
            acc_tn(concat.data.data(), dpre_f.data.data(), a, n + in_dim, n, glayer.w_f);
            acc_tn(concat.data.data(), dpre_c.data.data(), a, n + in_dim, n, glayer.w_c);
            acc_tn(concat.data.data(), dpre_o.data.data(), a, n + in_dim, n, glayer.w_o);
            acc_col_sums(dpre_i.data.data(), a, n, glayer.b_i);
            acc_col_sums(dpre_f.data.data(), a, n, glayer.b_f);
            acc_col_sums(dpre_c.data.data(), a, n, glayer.b_c);
            acc_col_sums(dpre_o.data.data(), a, n, glayer.b_o);

            // Gradient to the concatenated input: dA = Σ dpre_g · W_gᵀ.
            Mat<T> d_concat(a, n + in_dim);
            mul_nt(dpre_i.data.data(), a, layer.w_i, d_concat.data.data());
            Mat<T> tmp(a, n + in_dim);
            mul_nt(dpre_f.data.data(), a, layer.w_f, tmp.data.data());
            for (std::size_t i = 0; i < d_concat.size(); ++i) d_concat.data[i] += tmp.data[i];
            mul_nt(dpre_c.data.data(), a, layer.w_c, tmp.data.data());
            for (std::size_t i = 0; i < d_concat.size(); ++i) d_concat.data[i] += tmp.data[i];
            mul_nt(dpre_o.data.data(), a, layer.w_o, tmp.data.data());
            for (std::size_t i = 0; i < d_concat.size(); ++i) d_concat.data[i] += tmp.data[i];

            for (std::size_t r = 0; r < a; ++r)
                std::memcpy(dh_carry.row_ptr(r), d_concat.row_ptr(r), n * sizeof(T));

            if (li > 0) {
                Mat<T> dx(a, in_dim);
                for (std::size_t r = 0; r < a; ++r)
                    std::memcpy(dx.row_ptr(r), d_concat.row_ptr(r) + n, in_dim * sizeof(T));
                if (masked_boundaries) {
                    const Mat<T>& mask = dt.drop_mask[li - 1][s];
                    for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] *= mask.data[i];
                }
                d_below[t] = std::move(dx);
            } else {
                // Scatter into the used embedding rows; PAD never appears
                // in the active region.
                for (std::size_t r = 0; r < a; ++r) {
                    const std::uint32_t id = tr.ids[r * L + t];
                    if (id == Vocabulary::kPad) continue;
                    T* dst = grads.embedding.row_ptr(id);
                    const T* src = d_concat.row_ptr(r) + n;
                    for (std::size_t j = 0; j < in_dim; ++j) dst[j] += src[j];
                }
            }
        }
        d_ext = std::move(d_below);
    }
}

}  // namespace detail

// Accumulates gradients of the full training loss (mean cross-entropy
// plus l2_coeff · Σ‖W‖² over weight matrices) into `grads` via
// backpropagation through time. Requires a train-mode trace.
template <typename T>
void backward(const ForwardTrace<T>& trace, const std::vector<int>& labels, T l2_coeff,
              const ModelParams<T>& params, ModelParams<T>& grads) {
    if (trace.mode != RunMode::kTrain)
        throw UsageError("backward: trace was recorded in inference mode");
    const std::size_t B = trace.batch_size;
    const std::size_t units = params.config.units_per_layer;

    Mat<T> dlogits = loss_logit_gradient(trace.probs, labels);

    Mat<T> f_used = trace.fused;
    if (!trace.fused_mask.empty())
        for (std::size_t i = 0; i < f_used.size(); ++i) f_used.data[i] *= trace.fused_mask.data[i];
    acc_tn(f_used.data.data(), dlogits.data.data(), B, f_used.cols, dlogits.cols, grads.head_w);
    acc_col_sums(dlogits.data.data(), B, dlogits.cols, grads.head_b);

    Mat<T> df(B, params.head_w.rows);
    mul_nt(dlogits.data.data(), B, params.head_w, df.data.data());
    if (!trace.fused_mask.empty())
        for (std::size_t i = 0; i < df.size(); ++i) df.data[i] *= trace.fused_mask.data[i];

    acc_tn(trace.spliced.data.data(), df.data.data(), B, trace.spliced.cols, df.cols,
           grads.fusion_w);
    acc_col_sums(df.data.data(), B, df.cols, grads.fusion_b);

    Mat<T> dz(B, params.fusion_w.rows);
    mul_nt(df.data.data(), B, params.fusion_w, dz.data.data());

    for (std::size_t d = 0; d < trace.dirs.size(); ++d) {
        Mat<T> d_final(B, units);
        for (std::size_t r = 0; r < B; ++r)
            std::memcpy(d_final.row_ptr(r), dz.row_ptr(r) + d * units, units * sizeof(T));
        detail::backward_direction(trace, d, d_final, params, grads);
    }

    if (l2_coeff > T(0)) {
        for_each_tensor_pair(params, grads,
                             [&](const std::string&, const Mat<T>& w, Mat<T>& g, TensorKind kind) {
                                 if (kind != TensorKind::kWeight) return;
                                 for (std::size_t i = 0; i < g.size(); ++i)
                                     g.data[i] += T(2) * l2_coeff * w.data[i];
                             });
    }
}

}  // namespace stegodetect
