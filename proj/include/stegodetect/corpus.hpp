#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "stegodetect/vocab.hpp"

namespace stegodetect {

// Sentences longer than this are truncated at ingestion; bounds the BPTT
// unroll length.
inline constexpr std::size_t kMaxSentenceTokens = 64;

// Lowercases, splits on whitespace, strips leading/trailing punctuation
// from each token and keeps intra-word apostrophes/hyphens. May return an
// empty vector; callers drop such samples. Idempotent on its own output.
std::vector<std::string> tokenize(const std::string& text);

enum class Split : std::uint8_t { kTrain, kVal, kTest, kNone };

enum class LabelKind : std::uint8_t { kBinary, kRate };

struct Sample {
    std::vector<std::string> words;
    std::vector<std::uint32_t> ids;  // filled by encode_corpus
    int label = 0;                   // class id: stego flag (binary) or bpw (rate)
    int bpw = -1;                    // embedding rate tag, -1 if unknown
    std::string source;
};

// Labeled sentences with per-sample split assignments. Samples keep both
// their raw tokens and (after encode_corpus) vocabulary ids, so one corpus
// can be re-encoded against different vocabularies.
struct LabeledCorpus {
    std::vector<Sample> samples;
    LabelKind label_kind = LabelKind::kRate;
    std::size_t num_classes = 6;
    std::vector<Split> split_of;  // parallel to samples; empty until assign_splits

    bool has_splits() const { return !split_of.empty(); }
    std::vector<std::size_t> indices_of(Split s) const;
    std::size_t count_of(Split s) const;
};

// Per-label sample counts.
std::map<int, std::size_t> class_histogram(const LabeledCorpus& corpus);

// Manifest lines map path globs to a format tag and a bpw label:
//   glob<TAB>format<TAB>bpw        (bpw 0 = cover; '#' starts a comment)
// Globs match paths relative to the corpus root; '*' matches within one
// path segment, '?' matches one character.
struct Manifest {
    struct Entry {
        std::string glob;
        std::string format;
        int bpw = 0;
    };
    std::vector<Entry> entries;
};

Manifest load_manifest(const std::string& path);
void save_manifest(const Manifest& manifest, const std::string& path);

// Walks `root`, matches files against the manifest and reads one sentence
// per line. Non-matching files are skipped with a warning on stderr; lines
// that tokenize to nothing are dropped. Labels are the manifest bpw values.
LabeledCorpus load_tsteg_layout(const std::string& root, const Manifest& manifest);

// Stratified train/val/test assignment, deterministic under `seed`.
// Ratios must sum to 1; every class needs at least 3 samples.
void assign_splits(LabeledCorpus& corpus, double train_ratio, double val_ratio,
                   double test_ratio, std::uint64_t seed);

// Fills Sample::ids from words (unknown words become <unk>), truncating to
// kMaxSentenceTokens.
void encode_corpus(LabeledCorpus& corpus, const Vocabulary& vocab);

// Cover (bpw 0) versus one stego rate as a binary task; labels become
// 0/1 and split assignments are inherited.
LabeledCorpus binary_view(const LabeledCorpus& corpus, int stego_bpw);

// One padded minibatch. Rows are ordered by valid_len descending so the
// recurrent kernels can run on active-row prefixes; orig_index maps each
// row back to its corpus sample.
struct Batch {
    std::size_t size = 0;
    std::size_t max_len = 0;
    std::vector<std::uint32_t> ids;        // size × max_len, row-major, PAD-filled
    std::vector<std::uint32_t> valid_len;  // per row, descending
    std::vector<int> labels;
    std::vector<std::size_t> orig_index;

    std::uint32_t id_at(std::size_t row, std::size_t t) const { return ids[row * max_len + t]; }
};

Batch make_batch(const LabeledCorpus& corpus, const std::vector<std::size_t>& sample_indices);

// Deterministic per-epoch shuffle into batches; the final partial batch is
// kept. Requires an encoded corpus and a nonempty split.
std::vector<Batch> make_batches(const LabeledCorpus& corpus, Split split, std::size_t batch_size,
                                std::uint64_t shuffle_seed);

}  // namespace stegodetect
