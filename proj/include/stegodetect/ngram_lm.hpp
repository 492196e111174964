#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "stegodetect/rng.hpp"
#include "stegodetect/vocab.hpp"

namespace stegodetect {

// Backoff n-gram model over tokenized sentences with start/end markers.
// Counts are stored raw; add-one smoothing is applied at sampling and
// scoring time. The model keeps its own uncapped vocabulary.
class NgramLM {
  public:
    // Start/end sentinels live outside the vocabulary id range.
    static constexpr std::uint32_t kStart = 0xFFFFFFFEu;
    static constexpr std::uint32_t kEnd = 0xFFFFFFFDu;

    // Tokenizes each line and tallies every context length up to order-1.
    static NgramLM train(const std::vector<std::string>& lines, std::size_t order = 3);

    std::size_t order() const { return order_; }
    const Vocabulary& vocab() const { return vocab_; }

    // Number of generatable words (markers and reserved ids excluded).
    std::size_t word_count() const { return global_order_.size(); }

    // Raw count of `next` after `context`. The strings "<s>"/"</s>" denote
    // the markers. Zero for unseen events.
    std::uint64_t count(const std::vector<std::string>& context, const std::string& next) const;

    // Candidates of the longest seen context, ranked by count descending
    // with lexicographic tie-break, markers excluded, padded with the
    // globally most frequent unused words up to pool_size.
    std::vector<std::uint32_t> candidate_pool(const std::vector<std::uint32_t>& context,
                                              std::size_t pool_size) const;

    // Draws from the add-one smoothed distribution over the backed-off
    // context's observed continuations (end marker included).
    std::uint32_t sample_next(const std::vector<std::uint32_t>& context, Rng& rng) const;

    // log P(word | context) with add-one smoothing over the full
    // vocabulary, so any in-vocabulary word scores finitely.
    double log_prob(const std::vector<std::uint32_t>& context, std::uint32_t word) const;

    // Mean per-word log probability of a sentence (markers not scored).
    double avg_log_prob(const std::vector<std::string>& words) const;

    std::uint32_t token_id(const std::string& word) const { return vocab_.id_of(word); }
    const std::string& token_word(std::uint32_t id) const { return vocab_.word_of(id); }

  private:
    struct Dist {
        // (token, count), sorted by count desc then lexicographic word
        // order once training finishes; kEnd sorts after all words on ties.
        std::vector<std::pair<std::uint32_t, std::uint32_t>> items;
        std::uint64_t total = 0;
    };

    static std::string pack_key(const std::uint32_t* ids, std::size_t n);
    const Dist* backed_off(const std::vector<std::uint32_t>& context) const;
    std::uint32_t lex_rank(std::uint32_t token) const;

    std::size_t order_ = 3;
    Vocabulary vocab_;
    std::vector<std::unordered_map<std::string, Dist>> tables_;  // [context length]
    std::vector<std::uint32_t> lex_rank_;      // per vocabulary id
    std::vector<std::uint32_t> global_order_;  // word ids by global frequency
};

}  // namespace stegodetect
