#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <string>
#include <tuple>
#include <vector>

#include "tablere/errors.hpp"

namespace tablere {

/// Confusion matrices are indexed [predicted][true] throughout, so column
/// sums give per-class support.
using ConfusionMatrix = std::vector<std::vector<std::size_t>>;

inline ConfusionMatrix make_confusion(std::size_t classes) {
    return ConfusionMatrix(classes, std::vector<std::size_t>(classes, 0));
}

struct Metrics {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    double micro_f1 = 0.0;
    double weighted_f1 = 0.0;
    std::vector<double> precision;
    std::vector<double> recall;
    std::vector<double> f1;
    std::vector<std::size_t> support;      // per-class true counts
    std::vector<bool> zero_support;        // flagged classes absent from the partition
    ConfusionMatrix confusion;
};

inline Metrics metrics_from_confusion(const ConfusionMatrix& confusion) {
    const std::size_t classes = confusion.size();
    Metrics m;
    m.confusion = confusion;
    m.precision.assign(classes, 0.0);
    m.recall.assign(classes, 0.0);
    m.f1.assign(classes, 0.0);
    m.support.assign(classes, 0);
    m.zero_support.assign(classes, false);

    std::size_t total = 0;
    std::size_t correct = 0;
    for (std::size_t p = 0; p < classes; ++p) {
        if (confusion[p].size() != classes) {
            throw ShapeError("metrics: confusion matrix must be square");
        }
        for (std::size_t t = 0; t < classes; ++t) {
            total += confusion[p][t];
        }
        correct += confusion[p][p];
    }
    if (total == 0) {
        throw UsageError("metrics: empty confusion matrix");
    }
    m.accuracy = static_cast<double>(correct) / static_cast<double>(total);

    double macro_sum = 0.0;
    double weighted_sum = 0.0;
    for (std::size_t k = 0; k < classes; ++k) {
        std::size_t tp = confusion[k][k];
        std::size_t pred_k = 0; // row sum: predicted as k
        std::size_t true_k = 0; // column sum: truly k
        for (std::size_t j = 0; j < classes; ++j) {
            pred_k += confusion[k][j];
            true_k += confusion[j][k];
        }
        m.support[k] = true_k;
        m.zero_support[k] = true_k == 0;
        const double prec = pred_k == 0 ? 0.0 : static_cast<double>(tp) / pred_k;
        const double rec = true_k == 0 ? 0.0 : static_cast<double>(tp) / true_k;
        const double f1 = (prec + rec) == 0.0 ? 0.0 : 2.0 * prec * rec / (prec + rec);
        m.precision[k] = prec;
        m.recall[k] = rec;
        m.f1[k] = f1;
        macro_sum += f1;
        weighted_sum += f1 * static_cast<double>(true_k);
    }
    m.macro_f1 = macro_sum / static_cast<double>(classes);
    m.weighted_f1 = weighted_sum / static_cast<double>(total);
    // micro-averaged: global TP/FP/FN. For single-label multiclass this
    // collapses to accuracy, an identity the acceptance suite asserts.
    const double micro_p = static_cast<double>(correct) / static_cast<double>(total);
    const double micro_r = micro_p;
    m.micro_f1 = (micro_p + micro_r) == 0.0 ? 0.0 : 2.0 * micro_p * micro_r / (micro_p + micro_r);
    return m;
}

/// Off-diagonal confusion cells normalized by true-label column support,
/// descending; ties break by (predicted, true) index order.
struct DifficultPair {
    std::size_t predicted = 0;
    std::size_t true_label = 0;
    double rate = 0.0;
};

inline std::vector<DifficultPair> difficult_relations(const ConfusionMatrix& confusion,
                                                      std::size_t k) {
    const std::size_t classes = confusion.size();
    std::vector<std::size_t> column_sum(classes, 0);
    for (std::size_t p = 0; p < classes; ++p) {
        for (std::size_t t = 0; t < classes; ++t) {
            column_sum[t] += confusion[p][t];
        }
    }
    std::vector<DifficultPair> pairs;
    for (std::size_t p = 0; p < classes; ++p) {
        for (std::size_t t = 0; t < classes; ++t) {
            if (p == t || confusion[p][t] == 0 || column_sum[t] == 0) {
                continue;
            }
            pairs.push_back({p, t,
                             static_cast<double>(confusion[p][t]) /
                                 static_cast<double>(column_sum[t])});
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](const DifficultPair& a, const DifficultPair& b) {
        if (a.rate != b.rate) {
            return a.rate > b.rate;
        }
        return std::tie(a.predicted, a.true_label) < std::tie(b.predicted, b.true_label);
    });
    if (pairs.size() > k) {
        pairs.resize(k);
    }
    return pairs;
}

// ---------------------------------------------------------------------------
// Report writers
// ---------------------------------------------------------------------------

inline void write_confusion_csv(const std::string& path, const ConfusionMatrix& confusion) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("confusion: cannot write '" + path + "'");
    }
    for (const auto& row : confusion) {
        for (std::size_t t = 0; t < row.size(); ++t) {
            out << (t ? "," : "") << row[t];
        }
        out << '\n';
    }
}

/// 8-bit grayscale heatmap, binary PGM (P5); each row is normalized by its
/// row sum.
inline void write_confusion_pgm(const std::string& path, const ConfusionMatrix& confusion) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("confusion: cannot write '" + path + "'");
    }
    const std::size_t n = confusion.size();
    out << "P5\n" << n << ' ' << n << "\n255\n";
    for (const auto& row : confusion) {
        std::size_t row_sum = 0;
        for (const std::size_t v : row) {
            row_sum += v;
        }
        for (const std::size_t v : row) {
            const double frac =
                row_sum == 0 ? 0.0 : static_cast<double>(v) / static_cast<double>(row_sum);
            out.put(static_cast<char>(static_cast<unsigned char>(frac * 255.0 + 0.5)));
        }
    }
}

} // namespace tablere
