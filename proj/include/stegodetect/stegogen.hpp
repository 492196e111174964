#pragma once

#include <cstdint>
#include <vector>

#include "stegodetect/corpus.hpp"
#include "stegodetect/ngram_lm.hpp"
#include "stegodetect/rng.hpp"

namespace stegodetect {

// Payload bit sequence with a read cursor. Reads past the end return 0
// bits and set the padded flag.
class BitStream {
  public:
    BitStream() = default;
    explicit BitStream(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {}

    static BitStream random(std::size_t nbits, Rng& rng) {
        std::vector<std::uint8_t> b(nbits);
        for (auto& v : b) v = static_cast<std::uint8_t>(rng.next_u64() & 1);
        return BitStream(std::move(b));
    }

    std::size_t size() const { return bits_.size(); }
    std::size_t cursor() const { return cursor_; }
    bool exhausted() const { return cursor_ >= bits_.size(); }
    bool padded() const { return padded_; }
    const std::vector<std::uint8_t>& bits() const { return bits_; }

    // Next k bits as a big-endian value (first bit read is the most
    // significant).
    std::uint32_t read(std::size_t k) {
        std::uint32_t v = 0;
        for (std::size_t i = 0; i < k; ++i) {
            std::uint8_t bit = 0;
            if (cursor_ < bits_.size()) {
                bit = bits_[cursor_];
            } else {
                padded_ = true;
            }
            ++cursor_;
            v = (v << 1) | bit;
        }
        return v;
    }

    // Appends k bits of `value`, big-endian. Used by the decoder.
    void push(std::uint32_t value, std::size_t k) {
        for (std::size_t i = k; i-- > 0;)
            bits_.push_back(static_cast<std::uint8_t>((value >> i) & 1));
    }

    bool operator==(const BitStream& o) const { return bits_ == o.bits_; }

  private:
    std::vector<std::uint8_t> bits_;
    std::size_t cursor_ = 0;
    bool padded_ = false;
};

// Generates one sentence. bpw 0 samples cover text from the smoothed
// model until the end marker or max_len. bpw >= 1 hides bpw payload bits
// per word: each step ranks the candidate continuations, keeps the top
// 2^bpw (markers excluded, pool padded with globally frequent words when
// the context is sparse) and emits the word at the bit-indexed position;
// generation stops at max_len or when the payload runs out. Every emitted
// word consumes exactly bpw bits.
std::vector<std::string> generate(const NgramLM& lm, int bpw, BitStream& bits,
                                  std::size_t max_len, Rng& rng);

// Recovers the payload of a sentence produced by `generate` with the same
// model and bpw. A word outside its candidate pool raises DataError naming
// the position. bpw 0 yields an empty stream.
BitStream decode(const NgramLM& lm, const std::vector<std::string>& sentence, int bpw);

// Balanced synthetic corpus over the given rates (0 = cover). Cover
// sentences are resampled until they land in [8, 40] tokens; each stego
// sentence carries a fresh random payload and matches the length of its
// cover counterpart so the classes differ in word statistics, not length.
// Deterministic under `seed`. When `payloads` is given it receives one
// entry per sample (empty for covers).
LabeledCorpus synthesize_dataset(const NgramLM& lm, std::size_t per_class,
                                 const std::vector<int>& bpw_set, std::uint64_t seed,
                                 std::vector<BitStream>* payloads = nullptr);

}  // namespace stegodetect
