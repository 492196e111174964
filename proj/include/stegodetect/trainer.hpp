#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stegodetect/corpus.hpp"
#include "stegodetect/loss.hpp"
#include "stegodetect/metrics.hpp"
#include "stegodetect/optimizer.hpp"

namespace stegodetect {

enum class Precision { kFloat32, kFloat64 };

struct TrainConfig {
    double learning_rate = 0.001;
    std::size_t batch_size = 128;
    double dropout = 0.5;
    double l2_coeff = 1e-4;
    std::size_t max_epochs = 30;
    std::size_t patience = 5;
    double clip_norm = 5.0;
    std::uint64_t seed = 1;
    Precision precision = Precision::kFloat32;

    void validate() const {
        if (learning_rate <= 0 || batch_size == 0 || l2_coeff < 0 || max_epochs == 0 ||
            patience == 0 || clip_norm <= 0)
            throw UsageError("train config: rates/sizes must be positive");
        if (!(dropout >= 0.0 && dropout < 1.0))
            throw UsageError("train config: dropout must be in [0,1)");
    }
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_acc = 0.0;
    double val_precision = 0.0;
    double val_recall = 0.0;
    double val_f1 = 0.0;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;  // 1-based
    double best_val_acc = 0.0;
};

// epoch<TAB>train_loss<TAB>val_acc<TAB>val_p<TAB>val_r<TAB>val_f1 lines.
std::string train_log_tsv(const TrainLog& log);

template <typename T>
struct TrainResult {
    ModelParams<T> best_params;
    TrainLog log;
};

// Epoch loop: shuffle, forward/backward/clip/adam over minibatches, then
// validation at the model threshold (binary) or by argmax (multiclass).
// Keeps the parameters from the best-validation epoch; stops after
// `patience` epochs without improvement. Deterministic under the seed in
// single-threaded use. Binary validation logs the stego-class P/R/F1,
// multiclass logs macro values.
template <typename T>
TrainResult<T> train(ModelParams<T> params, const LabeledCorpus& corpus, const TrainConfig& cfg) {
    cfg.validate();
    if (!corpus.has_splits() || corpus.count_of(Split::kTrain) == 0 ||
        corpus.count_of(Split::kVal) == 0)
        throw UsageError("train: corpus needs nonempty train and validation splits");
    params.config.dropout_rate = cfg.dropout;
    const bool binary = params.config.num_classes == 2;

    Rng master(cfg.seed);
    Rng dropout_rng = master.substream(1);

    ModelParams<T> grads = zeros_like(params);
    AdamState<T> adam = AdamState<T>::from_params(params);

    TrainResult<T> result;
    result.best_params = params;
    std::size_t stale = 0;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto batches =
            make_batches(corpus, Split::kTrain, cfg.batch_size, master.substream(100 + epoch).seed());
        double loss_sum = 0.0;
        std::size_t sample_count = 0;
        for (std::size_t b = 0; b < batches.size(); ++b) {
            const Batch& batch = batches[b];
            auto trace = forward(batch, params, RunMode::kTrain, &dropout_rng);
            auto loss = compute_loss(trace.probs, batch.labels,
                                     params, static_cast<T>(cfg.l2_coeff));
            if (!std::isfinite(static_cast<double>(loss.value)))
                throw NumericError("train: loss diverged at epoch " + std::to_string(epoch) +
                                   " batch " + std::to_string(b + 1));
            loss_sum += static_cast<double>(loss.value) * static_cast<double>(batch.size);
            sample_count += batch.size;
            zero_all(grads);
            backward(trace, batch.labels, static_cast<T>(cfg.l2_coeff), params, grads);
            clip_gradients(grads, static_cast<T>(cfg.clip_norm));
            adam_step(params, grads, adam, static_cast<T>(cfg.learning_rate));
        }

        Metrics val = binary
                          ? evaluate_binary(params, corpus, Split::kVal, params.config.threshold)
                          : evaluate_multiclass(params, corpus, Split::kVal);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(sample_count);
        rec.val_acc = val.accuracy;
        rec.val_precision = binary ? val.stego().precision : val.macro_precision;
        rec.val_recall = binary ? val.stego().recall : val.macro_recall;
        rec.val_f1 = binary ? val.stego().f1 : val.macro_f1;
        result.log.epochs.push_back(rec);

        if (rec.val_acc > result.log.best_val_acc || result.log.best_epoch == 0) {
            result.log.best_val_acc = rec.val_acc;
            result.log.best_epoch = epoch;
            result.best_params = params;
            stale = 0;
        } else if (++stale >= cfg.patience) {
            break;
        }
    }
    return result;
}

}  // namespace stegodetect
