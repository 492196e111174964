#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "stegodetect/corpus.hpp"
#include "stegodetect/network.hpp"

namespace stegodetect {

// K×K count matrix, rows = true class, columns = predicted class.
struct ConfusionMatrix {
    std::size_t num_classes = 0;
    std::vector<std::uint64_t> counts;

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::size_t k) : num_classes(k), counts(k * k, 0) {}

    void add(int true_class, int predicted_class);
    std::uint64_t at(std::size_t true_class, std::size_t predicted_class) const {
        return counts[true_class * num_classes + predicted_class];
    }
    std::uint64_t total() const;
};

struct ClassPRF {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct Metrics {
    double accuracy = 0.0;
    std::vector<ClassPRF> per_class;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    ConfusionMatrix confusion;

    // Binary convention: report the stego class (class 1).
    const ClassPRF& stego() const { return per_class.at(1); }
};

// Per-class precision/recall are 0 when their denominator is 0; F1 is the
// harmonic mean, 0 when both terms are 0. Macro values are unweighted
// means over all classes.
Metrics metrics_from_confusion(const ConfusionMatrix& cm);

// Argmax with ties resolved to the lowest class id.
std::size_t argmax_row(const float* row, std::size_t n);

namespace detail {

template <typename T>
void score_split(const ModelParams<T>& params, const LabeledCorpus& corpus, Split split,
                 ConfusionMatrix& cm, bool use_threshold, double threshold) {
    const auto idx = corpus.indices_of(split);
    if (idx.empty()) throw UsageError("evaluate: empty split");
    const std::size_t chunk = 256;
    for (std::size_t begin = 0; begin < idx.size(); begin += chunk) {
        std::vector<std::size_t> part(idx.begin() + begin,
                                      idx.begin() + std::min(begin + chunk, idx.size()));
        Batch batch = make_batch(corpus, part);
        auto tr = forward(batch, params, RunMode::kInfer);
        for (std::size_t r = 0; r < batch.size; ++r) {
            int pred;
            if (use_threshold) {
                pred = decide(static_cast<double>(tr.probs.at(r, 1)), threshold);
            } else {
                std::size_t best = 0;
                for (std::size_t k = 1; k < tr.probs.cols; ++k)
                    if (tr.probs.at(r, k) > tr.probs.at(r, best)) best = k;
                pred = static_cast<int>(best);
            }
            cm.add(batch.labels[r], pred);
        }
    }
}

}  // namespace detail

// Threshold decision on the stego probability; positive class = stego.
template <typename T>
Metrics evaluate_binary(const ModelParams<T>& params, const LabeledCorpus& corpus, Split split,
                        double threshold) {
    if (params.config.num_classes != 2)
        throw UsageError("evaluate_binary: model has " +
                         std::to_string(params.config.num_classes) + " classes");
    ConfusionMatrix cm(2);
    detail::score_split(params, corpus, split, cm, true, threshold);
    return metrics_from_confusion(cm);
}

// Argmax prediction over all classes; macro-averaged P/R/F1.
template <typename T>
Metrics evaluate_multiclass(const ModelParams<T>& params, const LabeledCorpus& corpus,
                            Split split) {
    ConfusionMatrix cm(params.config.num_classes);
    detail::score_split(params, corpus, split, cm, false, 0.0);
    return metrics_from_confusion(cm);
}

// One detection model per embedding rate, reported as rows of
// (bpw, accuracy, stego precision, stego recall) plus the count of
// adjacent accuracy inversions over increasing bpw.
struct SweepRow {
    int bpw = 0;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};

struct SweepReport {
    std::vector<SweepRow> rows;
    int inversions = 0;
};

SweepReport sweep_bpw(const std::vector<std::pair<int, Metrics>>& per_bpw,
                      const std::vector<int>& requested_bpw);

// Tab-separated metric lines: bpw<TAB>acc<TAB>p<TAB>r.
std::string format_sweep_tsv(const SweepReport& report);
// Human-readable table with the inversion statistic.
std::string format_sweep_table(const SweepReport& report);

namespace detail {
std::string format_sig9(double v);
}

// Fused-feature dump: header "label\tbpw\tf1..f_h", one tab-separated
// record per sample (9 significant digits), in corpus order. Returns the
// record count.
template <typename T>
std::size_t export_features(const ModelParams<T>& params, const LabeledCorpus& corpus,
                            Split split, std::ostream& out) {
    const auto idx = corpus.indices_of(split);
    if (idx.empty()) throw UsageError("export_features: empty split");
    const std::size_t h = params.config.fused_dim;

    out << "label\tbpw";
    for (std::size_t j = 1; j <= h; ++j) out << "\tf" << j;
    out << "\n";

    const std::size_t chunk = 256;
    std::vector<std::vector<T>> rows(idx.size());
    for (std::size_t begin = 0; begin < idx.size(); begin += chunk) {
        std::vector<std::size_t> part(idx.begin() + begin,
                                      idx.begin() + std::min(begin + chunk, idx.size()));
        Batch batch = make_batch(corpus, part);
        auto tr = forward(batch, params, RunMode::kInfer);
        std::map<std::size_t, std::size_t> pos;  // corpus index -> output slot
        for (std::size_t i = 0; i < part.size(); ++i) pos[part[i]] = begin + i;
        for (std::size_t r = 0; r < batch.size; ++r) {
            auto& dst = rows[pos[batch.orig_index[r]]];
            dst.assign(tr.fused.row_ptr(r), tr.fused.row_ptr(r) + h);
        }
    }
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const Sample& s = corpus.samples[idx[i]];
        out << s.label << "\t" << s.bpw;
        for (std::size_t j = 0; j < h; ++j)
            out << "\t" << detail::format_sig9(static_cast<double>(rows[i][j]));
        out << "\n";
    }
    if (!out) throw IoError("export_features: write failed");
    return idx.size();
}

}  // namespace stegodetect
