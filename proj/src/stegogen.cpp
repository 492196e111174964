#include "stegodetect/stegogen.hpp"

#include <algorithm>
#include <string>

#include "stegodetect/errors.hpp"

namespace stegodetect {

namespace {

constexpr std::size_t kMinSynthLen = 8;
constexpr std::size_t kMaxSynthLen = 40;

void shift_context(std::vector<std::uint32_t>& context, std::uint32_t id, std::size_t order) {
    context.push_back(id);
    if (context.size() > order - 1) context.erase(context.begin());
}

}  // namespace

std::vector<std::string> generate(const NgramLM& lm, int bpw, BitStream& bits,
                                  std::size_t max_len, Rng& rng) {
    if (bpw < 0 || bpw > 5) throw UsageError("generate: bpw must be in 0..5");
    if (max_len < 1) throw UsageError("generate: max_len must be >= 1");

    std::vector<std::uint32_t> context(lm.order() - 1, NgramLM::kStart);
    std::vector<std::string> words;

    if (bpw == 0) {
        while (words.size() < max_len) {
            const std::uint32_t id = lm.sample_next(context, rng);
            if (id == NgramLM::kEnd) break;
            words.push_back(lm.token_word(id));
            shift_context(context, id, lm.order());
        }
        return words;
    }

    const std::size_t pool_size = std::size_t{1} << bpw;
    if (lm.word_count() < pool_size)
        throw UsageError("generate: model vocabulary has " + std::to_string(lm.word_count()) +
                         " words, need " + std::to_string(pool_size) + " for bpw " +
                         std::to_string(bpw));
    while (words.size() < max_len && !bits.exhausted()) {
        const auto pool = lm.candidate_pool(context, pool_size);
        const std::uint32_t idx = bits.read(static_cast<std::size_t>(bpw));
        const std::uint32_t id = pool[idx];
        words.push_back(lm.token_word(id));
        shift_context(context, id, lm.order());
    }
    return words;
}

BitStream decode(const NgramLM& lm, const std::vector<std::string>& sentence, int bpw) {
    if (bpw < 0 || bpw > 5) throw UsageError("decode: bpw must be in 0..5");
    BitStream out;
    if (bpw == 0) return out;

    const std::size_t pool_size = std::size_t{1} << bpw;
    std::vector<std::uint32_t> context(lm.order() - 1, NgramLM::kStart);
    for (std::size_t p = 0; p < sentence.size(); ++p) {
        const std::uint32_t id = lm.token_id(sentence[p]);
        if (id == Vocabulary::kUnk && !lm.vocab().contains(sentence[p]))
            throw DataError("decode: word '" + sentence[p] + "' at position " +
                            std::to_string(p) + " is not in the model vocabulary");
        const auto pool = lm.candidate_pool(context, pool_size);
        const auto it = std::find(pool.begin(), pool.end(), id);
        if (it == pool.end())
            throw DataError("decode: word '" + sentence[p] + "' at position " +
                            std::to_string(p) + " is outside its candidate pool");
        out.push(static_cast<std::uint32_t>(it - pool.begin()), static_cast<std::size_t>(bpw));
        shift_context(context, id, lm.order());
    }
    return out;
}

LabeledCorpus synthesize_dataset(const NgramLM& lm, std::size_t per_class,
                                 const std::vector<int>& bpw_set, std::uint64_t seed,
                                 std::vector<BitStream>* payloads) {
    if (per_class < 1) throw UsageError("synthesize_dataset: per-class count must be >= 1");
    if (bpw_set.empty()) throw UsageError("synthesize_dataset: empty bpw set");
    for (int b : bpw_set)
        if (b < 0 || b > 5) throw UsageError("synthesize_dataset: bpw must be in 0..5");

    const Rng master(seed);
    BitStream no_bits;

    // Cover sentences drive the length distribution for every class.
    std::vector<std::vector<std::string>> covers(per_class);
    for (std::size_t i = 0; i < per_class; ++i) {
        for (std::uint64_t attempt = 0;; ++attempt) {
            if (attempt == 200)
                throw UsageError("synthesize_dataset: source model rarely produces sentences of " +
                                 std::to_string(kMinSynthLen) + "+ tokens");
            Rng r = master.substream((i << 8) | attempt);
            auto words = generate(lm, 0, no_bits, kMaxSynthLen, r);
            if (words.size() >= kMinSynthLen) {
                covers[i] = std::move(words);
                break;
            }
        }
    }

    LabeledCorpus corpus;
    corpus.label_kind = LabelKind::kRate;
    corpus.num_classes = 6;
    if (payloads) payloads->clear();

    for (std::size_t c = 0; c < bpw_set.size(); ++c) {
        const int bpw = bpw_set[c];
        for (std::size_t i = 0; i < per_class; ++i) {
            Sample s;
            s.label = bpw;
            s.bpw = bpw;
            s.source = "synthetic";
            if (bpw == 0) {
                s.words = covers[i];
                if (payloads) payloads->push_back(BitStream());
            } else {
                const std::size_t len = covers[i].size();
                Rng r = master.substream((static_cast<std::uint64_t>(c + 1) << 32) | i);
                BitStream payload = BitStream::random(len * static_cast<std::size_t>(bpw), r);
                BitStream reader = payload;
                s.words = generate(lm, bpw, reader, len, r);
                if (payloads) payloads->push_back(std::move(payload));
            }
            corpus.samples.push_back(std::move(s));
        }
    }
    return corpus;
}

}  // namespace stegodetect
