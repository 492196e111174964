#include "stegodetect/ngram_lm.hpp"

#include <algorithm>
#include <cstring>

#include "stegodetect/corpus.hpp"
#include "stegodetect/errors.hpp"

namespace stegodetect {

std::string NgramLM::pack_key(const std::uint32_t* ids, std::size_t n) {
    std::string key(n * sizeof(std::uint32_t), '\0');
    if (n) std::memcpy(key.data(), ids, n * sizeof(std::uint32_t));
    return key;
}

std::uint32_t NgramLM::lex_rank(std::uint32_t token) const {
    // markers and reserved ids sort after every real word
    return token < lex_rank_.size() ? lex_rank_[token] : UINT32_MAX;
}

NgramLM NgramLM::train(const std::vector<std::string>& lines, std::size_t order) {
    if (order < 1) throw UsageError("ngram: order must be >= 1");
    NgramLM lm;
    lm.order_ = order;
    lm.tables_.resize(order);

    std::vector<std::vector<std::uint32_t>> sentences;
    for (const auto& line : lines) {
        const auto words = tokenize(line);
        if (words.empty()) continue;
        std::vector<std::uint32_t> ids;
        ids.reserve(words.size());
        for (const auto& w : words) ids.push_back(lm.vocab_.add(w));
        sentences.push_back(std::move(ids));
    }
    if (sentences.empty()) throw UsageError("ngram: corpus contains no usable sentences");

    std::vector<std::uint64_t> global_count(lm.vocab_.size(), 0);
    std::vector<std::unordered_map<std::string, std::unordered_map<std::uint32_t, std::uint32_t>>>
        raw(order);
    std::vector<std::uint32_t> window;
    for (const auto& sent : sentences) {
        window.assign(order - 1, kStart);
        window.insert(window.end(), sent.begin(), sent.end());
        window.push_back(kEnd);
        for (std::size_t i = order - 1; i < window.size(); ++i) {
            const std::uint32_t next = window[i];
            if (next != kEnd) ++global_count[next];
            for (std::size_t c = 0; c < order; ++c)
                ++raw[c][pack_key(&window[i - c], c)][next];
        }
    }

    // lexicographic ranks over the vocabulary (reserved ids rank last)
    std::vector<std::uint32_t> by_word;
    for (std::uint32_t id = 2; id < lm.vocab_.size(); ++id) by_word.push_back(id);
    std::sort(by_word.begin(), by_word.end(), [&](std::uint32_t a, std::uint32_t b) {
        return lm.vocab_.word_of(a) < lm.vocab_.word_of(b);
    });
    lm.lex_rank_.assign(lm.vocab_.size(), UINT32_MAX);
    for (std::uint32_t r = 0; r < by_word.size(); ++r) lm.lex_rank_[by_word[r]] = r;

    for (std::size_t c = 0; c < order; ++c) {
        for (auto& [key, counts] : raw[c]) {
            Dist dist;
            dist.items.assign(counts.begin(), counts.end());
            for (const auto& [tok, n] : dist.items) dist.total += n;
            std::sort(dist.items.begin(), dist.items.end(), [&](const auto& a, const auto& b) {
                if (a.second != b.second) return a.second > b.second;
                return lm.lex_rank(a.first) < lm.lex_rank(b.first);
            });
            lm.tables_[c].emplace(key, std::move(dist));
        }
    }

    for (std::uint32_t id = 2; id < lm.vocab_.size(); ++id) lm.global_order_.push_back(id);
    std::sort(lm.global_order_.begin(), lm.global_order_.end(),
              [&](std::uint32_t a, std::uint32_t b) {
                  if (global_count[a] != global_count[b]) return global_count[a] > global_count[b];
                  return lm.lex_rank_[a] < lm.lex_rank_[b];
              });
    return lm;
}

const NgramLM::Dist* NgramLM::backed_off(const std::vector<std::uint32_t>& context) const {
    const std::size_t max_ctx = std::min(context.size(), order_ - 1);
    for (std::size_t c = max_ctx + 1; c-- > 0;) {
        const auto key = pack_key(context.data() + (context.size() - c), c);
        auto it = tables_[c].find(key);
        if (it != tables_[c].end()) return &it->second;
    }
    return nullptr;  // only possible for an empty model, ruled out by train()
}

std::uint64_t NgramLM::count(const std::vector<std::string>& context,
                             const std::string& next) const {
    if (context.size() > order_ - 1)
        throw UsageError("ngram count: context longer than order-1");
    auto to_id = [&](const std::string& w) -> std::uint32_t {
        if (w == "<s>") return kStart;
        if (w == "</s>") return kEnd;
        return vocab_.id_of(w);
    };
    std::vector<std::uint32_t> ids;
    for (const auto& w : context) ids.push_back(to_id(w));
    auto it = tables_[ids.size()].find(pack_key(ids.data(), ids.size()));
    if (it == tables_[ids.size()].end()) return 0;
    const std::uint32_t target = to_id(next);
    for (const auto& [tok, n] : it->second.items)
        if (tok == target) return n;
    return 0;
}

std::vector<std::uint32_t> NgramLM::candidate_pool(const std::vector<std::uint32_t>& context,
                                                   std::size_t pool_size) const {
    if (pool_size > word_count())
        throw UsageError("candidate pool of " + std::to_string(pool_size) +
                         " exceeds vocabulary of " + std::to_string(word_count()) + " words");
    const Dist* dist = backed_off(context);
    std::vector<std::uint32_t> pool;
    pool.reserve(pool_size);
    if (dist) {
        for (const auto& [tok, n] : dist->items) {
            if (pool.size() == pool_size) break;
            if (tok == kEnd || tok == kStart) continue;
            pool.push_back(tok);
        }
    }
    for (std::uint32_t cand : global_order_) {
        if (pool.size() == pool_size) break;
        if (std::find(pool.begin(), pool.end(), cand) == pool.end()) pool.push_back(cand);
    }
    return pool;
}

std::uint32_t NgramLM::sample_next(const std::vector<std::uint32_t>& context, Rng& rng) const {
    const Dist* dist = backed_off(context);
    // add-one over the observed support
    const std::uint64_t weight_total = dist->total + dist->items.size();
    std::uint64_t r = rng.uniform_int(weight_total);
    for (const auto& [tok, n] : dist->items) {
        const std::uint64_t w = static_cast<std::uint64_t>(n) + 1;
        if (r < w) return tok;
        r -= w;
    }
    return dist->items.back().first;
}

double NgramLM::log_prob(const std::vector<std::uint32_t>& context, std::uint32_t word) const {
    const Dist* dist = backed_off(context);
    std::uint64_t count = 0;
    for (const auto& [tok, n] : dist->items)
        if (tok == word) {
            count = n;
            break;
        }
    const double vocab_events = static_cast<double>(word_count()) + 1.0;  // words + end marker
    return std::log((static_cast<double>(count) + 1.0) /
                    (static_cast<double>(dist->total) + vocab_events));
}

double NgramLM::avg_log_prob(const std::vector<std::string>& words) const {
    if (words.empty()) throw UsageError("avg_log_prob: empty sentence");
    std::vector<std::uint32_t> context(order_ - 1, kStart);
    double sum = 0.0;
    for (const auto& w : words) {
        const std::uint32_t id = vocab_.id_of(w);
        sum += log_prob(context, id);
        context.push_back(id);
    }
    return sum / static_cast<double>(words.size());
}

}  // namespace stegodetect
