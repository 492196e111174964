#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "stegodetect/errors.hpp"

namespace stegodetect {

// Bidirectional word <-> id map. Ids 0 and 1 are reserved for padding and
// unknown words; real words start at 2.
class Vocabulary {
  public:
    static constexpr std::uint32_t kPad = 0;
    static constexpr std::uint32_t kUnk = 1;

    Vocabulary() : words_{"<pad>", "<unk>"} {
        // reserved entries are not registered in the lookup map: no input
        // word may alias them
    }

    // Registers a word (no-op if present) and returns its id.
    std::uint32_t add(const std::string& word) {
        auto it = ids_.find(word);
        if (it != ids_.end()) return it->second;
        const auto id = static_cast<std::uint32_t>(words_.size());
        ids_.emplace(word, id);
        words_.push_back(word);
        return id;
    }

    std::uint32_t id_of(const std::string& word) const {
        auto it = ids_.find(word);
        return it == ids_.end() ? kUnk : it->second;
    }

    bool contains(const std::string& word) const { return ids_.count(word) != 0; }

    const std::string& word_of(std::uint32_t id) const {
        if (id >= words_.size())
            throw UsageError("vocabulary: id " + std::to_string(id) + " out of range (size " +
                             std::to_string(words_.size()) + ")");
        return words_[id];
    }

    // Total id count, reserved entries included.
    std::size_t size() const { return words_.size(); }

    // Words in id order, reserved entries included. Used by persistence.
    const std::vector<std::string>& words() const { return words_; }

    static Vocabulary from_words(const std::vector<std::string>& words) {
        Vocabulary v;
        if (words.size() < 2 || words[0] != "<pad>" || words[1] != "<unk>")
            throw DataError("vocabulary: word list lacks reserved <pad>/<unk> entries");
        for (std::size_t i = 2; i < words.size(); ++i) {
            if (v.add(words[i]) != i)
                throw DataError("vocabulary: duplicate word '" + words[i] + "'");
        }
        return v;
    }

  private:
    std::unordered_map<std::string, std::uint32_t> ids_;
    std::vector<std::string> words_;
};

// Frequency-ranked vocabulary construction: words sorted by count
// descending, ties broken lexicographically; words below min_freq or
// beyond the max_size cap (cap counts the two reserved ids) map to <unk>.
Vocabulary build_vocab(const std::vector<const std::vector<std::string>*>& token_streams,
                       std::size_t max_size = 10000, std::size_t min_freq = 1);

}  // namespace stegodetect
