#include "stegodetect/metrics.hpp"

#include <cstdio>
#include <numeric>
#include <sstream>

namespace stegodetect {

void ConfusionMatrix::add(int true_class, int predicted_class) {
    if (true_class < 0 || predicted_class < 0 ||
        static_cast<std::size_t>(true_class) >= num_classes ||
        static_cast<std::size_t>(predicted_class) >= num_classes)
        throw UsageError("confusion matrix: class out of range");
    ++counts[static_cast<std::size_t>(true_class) * num_classes +
             static_cast<std::size_t>(predicted_class)];
}

std::uint64_t ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

Metrics metrics_from_confusion(const ConfusionMatrix& cm) {
    Metrics m;
    m.confusion = cm;
    const std::size_t k = cm.num_classes;
    const std::uint64_t total = cm.total();

    std::uint64_t correct = 0;
    for (std::size_t c = 0; c < k; ++c) correct += cm.at(c, c);
    m.accuracy = total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);

    m.per_class.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        std::uint64_t tp = cm.at(c, c), fp = 0, fn = 0;
        for (std::size_t o = 0; o < k; ++o) {
            if (o == c) continue;
            fp += cm.at(o, c);
            fn += cm.at(c, o);
        }
        ClassPRF& prf = m.per_class[c];
        prf.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
        prf.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
        prf.f1 = prf.precision + prf.recall == 0.0
                     ? 0.0
                     : 2.0 * prf.precision * prf.recall / (prf.precision + prf.recall);
        m.macro_precision += prf.precision;
        m.macro_recall += prf.recall;
        m.macro_f1 += prf.f1;
    }
    if (k > 0) {
        m.macro_precision /= static_cast<double>(k);
        m.macro_recall /= static_cast<double>(k);
        m.macro_f1 /= static_cast<double>(k);
    }
    return m;
}

std::size_t argmax_row(const float* row, std::size_t n) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (row[i] > row[best]) best = i;
    return best;
}

SweepReport sweep_bpw(const std::vector<std::pair<int, Metrics>>& per_bpw,
                      const std::vector<int>& requested_bpw) {
    SweepReport report;
    for (int bpw : requested_bpw) {
        const Metrics* found = nullptr;
        for (const auto& [b, metrics] : per_bpw)
            if (b == bpw) found = &metrics;
        if (!found) throw UsageError("sweep_bpw: no model for bpw " + std::to_string(bpw));
        SweepRow row;
        row.bpw = bpw;
        row.accuracy = found->accuracy;
        row.precision = found->stego().precision;
        row.recall = found->stego().recall;
        report.rows.push_back(row);
    }
    for (std::size_t i = 0; i + 1 < report.rows.size(); ++i)
        if (report.rows[i + 1].accuracy < report.rows[i].accuracy) ++report.inversions;
    return report;
}

namespace detail {

std::string format_sig9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace detail

std::string format_sweep_tsv(const SweepReport& report) {
    std::ostringstream out;
    for (const auto& row : report.rows)
        out << row.bpw << "\t" << detail::format_sig9(row.accuracy) << "\t"
            << detail::format_sig9(row.precision) << "\t" << detail::format_sig9(row.recall)
            << "\n";
    return out.str();
}

std::string format_sweep_table(const SweepReport& report) {
    std::ostringstream out;
    out << "  bpw       acc         p         r\n";
    for (const auto& row : report.rows) {
        char buf[80];
        std::snprintf(buf, sizeof(buf), "  %3d  %8.4f  %8.4f  %8.4f\n", row.bpw, row.accuracy,
                      row.precision, row.recall);
        out << buf;
    }
    out << "adjacent accuracy inversions: " << report.inversions << "\n";
    return out.str();
}

}  // namespace stegodetect
