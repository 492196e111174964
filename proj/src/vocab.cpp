#include "stegodetect/vocab.hpp"

#include <algorithm>
#include <unordered_map>

namespace stegodetect {

Vocabulary build_vocab(const std::vector<const std::vector<std::string>*>& token_streams,
                       std::size_t max_size, std::size_t min_freq) {
    if (max_size < 3) throw UsageError("build_vocab: max_size must be at least 3");

    std::unordered_map<std::string, std::uint64_t> freq;
    std::uint64_t total = 0;
    for (const auto* stream : token_streams) {
        for (const auto& tok : *stream) {
            ++freq[tok];
            ++total;
        }
    }
    if (total == 0) throw UsageError("build_vocab: no tokens in input streams");

    std::vector<std::pair<std::string, std::uint64_t>> ranked;
    ranked.reserve(freq.size());
    for (auto& kv : freq)
        if (kv.second >= min_freq) ranked.emplace_back(kv.first, kv.second);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocabulary vocab;
    const std::size_t keep = max_size - 2;  // reserved PAD/UNK count against the cap
    for (std::size_t i = 0; i < ranked.size() && i < keep; ++i) vocab.add(ranked[i].first);
    return vocab;
}

}  // namespace stegodetect
