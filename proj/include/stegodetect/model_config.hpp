#pragma once

#include <cstddef>
#include <cstdint>

#include "stegodetect/errors.hpp"

namespace stegodetect {

// Architecture settings for the detector. Two presets cover the stock
// configurations: a 3-layer unidirectional stack with 200 units per layer
// and a 2-layer bidirectional stack with 100 units per direction.
struct ModelConfig {
    std::size_t embedding_dim = 256;
    std::size_t num_layers = 3;
    std::size_t units_per_layer = 200;
    bool bidirectional = false;
    std::size_t fused_dim = 128;
    std::size_t num_classes = 2;    // 2 = cover/stego detection, 6 = bpw rate estimation
    double dropout_rate = 0.5;
    double threshold = 0.5;         // stego decision threshold on class-1 probability
    std::size_t vocab_size = 0;

    static ModelConfig ts_rnn(std::size_t vocab_size, std::size_t num_classes = 2) {
        ModelConfig c;
        c.num_layers = 3;
        c.units_per_layer = 200;
        c.bidirectional = false;
        c.vocab_size = vocab_size;
        c.num_classes = num_classes;
        return c;
    }

    static ModelConfig ts_birnn(std::size_t vocab_size, std::size_t num_classes = 2) {
        ModelConfig c;
        c.num_layers = 2;
        c.units_per_layer = 100;
        c.bidirectional = true;
        c.vocab_size = vocab_size;
        c.num_classes = num_classes;
        return c;
    }

    std::size_t num_directions() const { return bidirectional ? 2 : 1; }

    // Width of the spliced final-state vector Z.
    std::size_t splice_dim() const { return num_directions() * units_per_layer; }

    void validate() const {
        if (embedding_dim < 1 || num_layers < 1 || units_per_layer < 1 || fused_dim < 1 ||
            num_classes < 1 || vocab_size < 1)
            throw UsageError("model config: all dimensions must be >= 1");
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
            throw UsageError("model config: dropout_rate must be in [0,1)");
        if (!(threshold > 0.0 && threshold < 1.0))
            throw UsageError("model config: threshold must be in (0,1)");
    }
};

}  // namespace stegodetect
