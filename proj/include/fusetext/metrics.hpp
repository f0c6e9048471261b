#pragma once

#include <span>
#include <string>
#include <vector>

#include "fusetext/errors.hpp"

namespace fusetext::metrics {

struct ConfusionCounts {
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;

    std::size_t total() const { return tp + tn + fp + fn; }
    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        tp += o.tp, tn += o.tn, fp += o.fp, fn += o.fn;
        return *this;
    }
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// One-vs-rest counts treating `positive_class` as positive.
inline ConfusionCounts confusion_counts(std::span<const std::size_t> predictions, std::span<const std::size_t> labels,
                                        std::size_t positive_class) {
    if (predictions.size() != labels.size()) throw ContractError("confusion_counts: length mismatch");
    if (predictions.empty()) throw ContractError("confusion_counts: empty input");
    ConfusionCounts c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool pred = predictions[i] == positive_class;
        const bool gold = labels[i] == positive_class;
        if (pred && gold) ++c.tp;
        else if (pred) ++c.fp;
        else if (gold) ++c.fn;
        else ++c.tn;
    }
    return c;
}

struct Scores {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    // Set when a denominator was zero and the 0 convention applied.
    bool undefined = false;
};

// Accuracy, precision, recall and F1 from counts. Any 0/0 yields 0.
inline Scores compute_metrics(const ConfusionCounts& c) {
    if (c.total() == 0) throw ContractError("compute_metrics: no examples");
    Scores s;
    const auto ratio = [&s](double num, double den) {
        if (den == 0.0) {
            s.undefined = true;
            return 0.0;
        }
        return num / den;
    };
    s.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
    s.precision = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp));
    s.recall = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn));
    s.f1 = ratio(2.0 * s.precision * s.recall, s.precision + s.recall);
    return s;
}

struct ClassMetrics {
    std::string name;
    std::size_t support = 0;  // gold examples of this class
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool undefined = false;
};

struct MacroScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Unweighted mean over classes that occur in the gold labels.
inline MacroScores macro_average(std::span<const ClassMetrics> per_class) {
    MacroScores m;
    std::size_t n = 0;
    for (const auto& c : per_class) {
        if (c.support == 0) continue;
        m.precision += c.precision;
        m.recall += c.recall;
        m.f1 += c.f1;
        ++n;
    }
    if (n == 0) throw ContractError("macro_average: no class present in the gold labels");
    m.precision /= static_cast<double>(n);
    m.recall /= static_cast<double>(n);
    m.f1 /= static_cast<double>(n);
    return m;
}

struct MetricsReport {
    std::vector<ClassMetrics> per_class;
    double accuracy = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
};

inline MetricsReport build_report(std::span<const std::size_t> predictions, std::span<const std::size_t> labels,
                                  const std::vector<std::string>& class_names) {
    if (predictions.size() != labels.size()) throw ContractError("build_report: length mismatch");
    if (labels.empty()) throw ContractError("build_report: empty input");
    MetricsReport r;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) correct += predictions[i] == labels[i];
    r.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
    for (std::size_t c = 0; c < class_names.size(); ++c) {
        const ConfusionCounts counts = confusion_counts(predictions, labels, c);
        const Scores s = compute_metrics(counts);
        r.per_class.push_back({class_names[c], counts.tp + counts.fn, s.precision, s.recall, s.f1, s.undefined});
    }
    const MacroScores m = macro_average(r.per_class);
    r.macro_precision = m.precision;
    r.macro_recall = m.recall;
    r.macro_f1 = m.f1;
    return r;
}

}  // namespace fusetext::metrics
