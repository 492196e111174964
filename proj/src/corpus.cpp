#include "stegodetect/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "stegodetect/rng.hpp"

namespace fs = std::filesystem;

namespace stegodetect {

std::vector<std::string> tokenize(const std::string& text) {
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    auto is_punct = [](unsigned char c) { return c < 0x80 && std::ispunct(c) != 0; };

    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t j = i;
        while (j < text.size() && !is_space(static_cast<unsigned char>(text[j]))) ++j;
        if (j > i) {
            std::size_t lo = i, hi = j;
            while (lo < hi && is_punct(static_cast<unsigned char>(text[lo]))) ++lo;
            while (hi > lo && is_punct(static_cast<unsigned char>(text[hi - 1]))) --hi;
            if (hi > lo) {
                std::string tok;
                tok.reserve(hi - lo);
                for (std::size_t k = lo; k < hi; ++k) {
                    const unsigned char c = static_cast<unsigned char>(text[k]);
                    tok.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : text[k]);
                }
                tokens.push_back(std::move(tok));
            }
        }
        i = j;
    }
    return tokens;
}

std::vector<std::size_t> LabeledCorpus::indices_of(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < split_of.size(); ++i)
        if (split_of[i] == s) out.push_back(i);
    return out;
}

std::size_t LabeledCorpus::count_of(Split s) const {
    return static_cast<std::size_t>(std::count(split_of.begin(), split_of.end(), s));
}

std::map<int, std::size_t> class_histogram(const LabeledCorpus& corpus) {
    std::map<int, std::size_t> hist;
    for (const auto& s : corpus.samples) ++hist[s.label];
    return hist;
}

// ---------------------------------------------------------------------------
// Manifest + directory ingestion

namespace {

// '*' matches within a path segment, '?' one character; '/' must match
// literally.
bool glob_match(const char* pat, const char* str) {
    const char *star_pat = nullptr, *star_str = nullptr;
    while (*str) {
        if (*pat == '*') {
            star_pat = ++pat;
            star_str = str;
        } else if (*pat == *str || (*pat == '?' && *str != '/')) {
            ++pat;
            ++str;
        } else if (star_pat && *star_str != '/') {
            pat = star_pat;
            str = ++star_str;
        } else {
            return false;
        }
    }
    while (*pat == '*') ++pat;
    return *pat == '\0';
}

std::vector<std::string> split_fields(const std::string& line, char sep) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace

Manifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path);
    Manifest m;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto fields = split_fields(line, '\t');
        if (fields.size() != 3)
            throw DataError("manifest " + path + " line " + std::to_string(lineno) +
                            ": expected glob<TAB>format<TAB>bpw");
        Manifest::Entry e;
        e.glob = fields[0];
        e.format = fields[1];
        try {
            e.bpw = std::stoi(fields[2]);
        } catch (const std::exception&) {
            throw DataError("manifest " + path + " line " + std::to_string(lineno) +
                            ": bpw is not a number");
        }
        if (e.bpw < 0 || e.bpw > 5)
            throw DataError("manifest " + path + " line " + std::to_string(lineno) +
                            ": bpw must be in 0..5");
        m.entries.push_back(std::move(e));
    }
    return m;
}

void save_manifest(const Manifest& manifest, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest: " + path);
    for (const auto& e : manifest.entries)
        out << e.glob << "\t" << e.format << "\t" << e.bpw << "\n";
    if (!out) throw IoError("write failed: " + path);
}

LabeledCorpus load_tsteg_layout(const std::string& root, const Manifest& manifest) {
    if (!fs::exists(root)) throw IoError("corpus root does not exist: " + root);

    std::vector<std::string> rel_paths;
    if (fs::is_regular_file(root)) {
        rel_paths.push_back(fs::path(root).filename().generic_string());
    } else {
        for (const auto& entry : fs::recursive_directory_iterator(root))
            if (entry.is_regular_file())
                rel_paths.push_back(fs::relative(entry.path(), root).generic_string());
    }
    std::sort(rel_paths.begin(), rel_paths.end());

    LabeledCorpus corpus;
    corpus.label_kind = LabelKind::kRate;
    corpus.num_classes = 6;

    const fs::path base = fs::is_regular_file(root) ? fs::path(root).parent_path() : fs::path(root);
    for (const auto& rel : rel_paths) {
        const Manifest::Entry* match = nullptr;
        for (const auto& e : manifest.entries) {
            if (glob_match(e.glob.c_str(), rel.c_str())) {
                match = &e;
                break;
            }
        }
        if (!match) {
            std::fprintf(stderr, "warning: ignoring unmapped file %s\n", rel.c_str());
            continue;
        }
        std::ifstream in(base / rel);
        if (!in) throw IoError("cannot open corpus file: " + (base / rel).string());
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            auto words = tokenize(line);
            if (words.empty()) continue;
            if (words.size() > kMaxSentenceTokens) words.resize(kMaxSentenceTokens);
            Sample s;
            s.words = std::move(words);
            s.label = match->bpw;
            s.bpw = match->bpw;
            s.source = rel;
            corpus.samples.push_back(std::move(s));
        }
    }
    return corpus;
}

// ---------------------------------------------------------------------------
// Splits, encoding, batching

void assign_splits(LabeledCorpus& corpus, double train_ratio, double val_ratio, double test_ratio,
                   std::uint64_t seed) {
    if (std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9)
        throw UsageError("assign_splits: ratios must sum to 1");
    if (corpus.samples.empty()) throw UsageError("assign_splits: empty corpus");

    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < corpus.samples.size(); ++i)
        by_class[corpus.samples[i].label].push_back(i);

    corpus.split_of.assign(corpus.samples.size(), Split::kNone);
    Rng rng(seed);
    for (auto& [label, idx] : by_class) {
        if (idx.size() < 3)
            throw UsageError("assign_splits: class " + std::to_string(label) + " has only " +
                             std::to_string(idx.size()) + " samples, cannot stratify");
        Rng class_rng = rng.substream(static_cast<std::uint64_t>(label) + 17);
        for (std::size_t i = idx.size() - 1; i > 0; --i)
            std::swap(idx[i], idx[class_rng.uniform_int(i + 1)]);

        const std::size_t n = idx.size();
        std::size_t n_train = static_cast<std::size_t>(n * train_ratio);
        std::size_t n_val = static_cast<std::size_t>(n * val_ratio);
        std::size_t n_test = static_cast<std::size_t>(n * test_ratio);
        // largest-remainder rounding, ties resolved train > val > test
        double rem[3] = {n * train_ratio - n_train, n * val_ratio - n_val,
                         n * test_ratio - n_test};
        std::size_t* buckets[3] = {&n_train, &n_val, &n_test};
        while (n_train + n_val + n_test < n) {
            int best = 0;
            for (int k = 1; k < 3; ++k)
                if (rem[k] > rem[best] + 1e-12) best = k;
            ++*buckets[best];
            rem[best] -= 1.0;
        }
        for (std::size_t i = 0; i < n; ++i) {
            Split s = i < n_train                ? Split::kTrain
                      : i < n_train + n_val      ? Split::kVal
                                                 : Split::kTest;
            corpus.split_of[idx[i]] = s;
        }
    }
}

void encode_corpus(LabeledCorpus& corpus, const Vocabulary& vocab) {
    for (auto& s : corpus.samples) {
        s.ids.clear();
        const std::size_t n = std::min(s.words.size(), kMaxSentenceTokens);
        s.ids.reserve(n);
        for (std::size_t i = 0; i < n; ++i) s.ids.push_back(vocab.id_of(s.words[i]));
    }
}

LabeledCorpus binary_view(const LabeledCorpus& corpus, int stego_bpw) {
    if (stego_bpw < 1) throw UsageError("binary_view: stego bpw must be >= 1");
    LabeledCorpus out;
    out.label_kind = LabelKind::kBinary;
    out.num_classes = 2;
    std::size_t covers = 0, stegos = 0;
    for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
        const Sample& s = corpus.samples[i];
        if (s.label != 0 && s.label != stego_bpw) continue;
        Sample copy = s;
        copy.label = s.label == 0 ? 0 : 1;
        (copy.label == 0 ? covers : stegos) += 1;
        out.samples.push_back(std::move(copy));
        if (corpus.has_splits()) out.split_of.push_back(corpus.split_of[i]);
    }
    if (covers == 0 || stegos == 0)
        throw UsageError("binary_view: corpus lacks cover or bpw-" + std::to_string(stego_bpw) +
                         " samples");
    return out;
}

Batch make_batch(const LabeledCorpus& corpus, const std::vector<std::size_t>& sample_indices) {
    if (sample_indices.empty()) throw UsageError("make_batch: no samples");
    Batch b;
    b.size = sample_indices.size();
    std::vector<std::size_t> order = sample_indices;
    for (std::size_t idx : order) {
        if (corpus.samples[idx].ids.empty())
            throw UsageError("make_batch: corpus is not encoded (sample " + std::to_string(idx) +
                             ")");
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) {
        return corpus.samples[a].ids.size() > corpus.samples[c].ids.size();
    });
    for (std::size_t idx : order) b.max_len = std::max(b.max_len, corpus.samples[idx].ids.size());

    b.ids.assign(b.size * b.max_len, Vocabulary::kPad);
    b.valid_len.resize(b.size);
    b.labels.resize(b.size);
    b.orig_index = order;
    for (std::size_t r = 0; r < b.size; ++r) {
        const Sample& s = corpus.samples[order[r]];
        std::copy(s.ids.begin(), s.ids.end(), b.ids.begin() + r * b.max_len);
        b.valid_len[r] = static_cast<std::uint32_t>(s.ids.size());
        b.labels[r] = s.label;
    }
    return b;
}

std::vector<Batch> make_batches(const LabeledCorpus& corpus, Split split, std::size_t batch_size,
                                std::uint64_t shuffle_seed) {
    if (batch_size == 0) throw UsageError("make_batches: batch_size must be positive");
    auto idx = corpus.indices_of(split);
    if (idx.empty()) throw UsageError("make_batches: split is empty");

    Rng rng(shuffle_seed);
    for (std::size_t i = idx.size() - 1; i > 0; --i) std::swap(idx[i], idx[rng.uniform_int(i + 1)]);

    std::vector<Batch> batches;
    for (std::size_t begin = 0; begin < idx.size(); begin += batch_size) {
        std::vector<std::size_t> part(idx.begin() + begin,
                                      idx.begin() + std::min(begin + batch_size, idx.size()));
        batches.push_back(make_batch(corpus, part));
    }
    return batches;
}

}  // namespace stegodetect
