#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "retrace/activity_class.hpp"
#include "retrace/entropy.hpp"
#include "retrace/error.hpp"
#include "retrace/knn.hpp"
#include "retrace/parallel.hpp"
#include "retrace/standardizer.hpp"
#include "retrace/svm.hpp"

namespace retrace {

/// Rows are predicted classes (or cluster ids), columns are true classes.
struct ConfusionMatrix {
    std::vector<std::string> row_keys;
    std::vector<std::string> column_keys;
    std::vector<std::vector<std::size_t>> counts;

    ConfusionMatrix() = default;
    ConfusionMatrix(std::vector<std::string> rows, std::vector<std::string> cols)
        : row_keys(std::move(rows)), column_keys(std::move(cols)),
          counts(row_keys.size(), std::vector<std::size_t>(column_keys.size(), 0)) {}

    static ConfusionMatrix for_classes() {
        std::vector<std::string> names;
        for (ActivityClass c : kAllClasses) names.emplace_back(to_string(c));
        return ConfusionMatrix(names, names);
    }

    std::size_t total() const {
        std::size_t t = 0;
        for (const auto& row : counts) t = std::accumulate(row.begin(), row.end(), t);
        return t;
    }
    std::size_t row_total(std::size_t r) const { return std::accumulate(counts[r].begin(), counts[r].end(), std::size_t{0}); }
    std::size_t column_total(std::size_t c) const {
        std::size_t t = 0;
        for (const auto& row : counts) t += row[c];
        return t;
    }
};

inline void write_confusion_csv(std::ostream& out, const ConfusionMatrix& m) {
    out << "predicted";
    for (const auto& c : m.column_keys) out << ',' << c;
    out << '\n';
    for (std::size_t r = 0; r < m.row_keys.size(); ++r) {
        out << m.row_keys[r];
        for (std::size_t v : m.counts[r]) out << ',' << v;
        out << '\n';
    }
}

inline double safe_ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

/// Class-level metrics for a square class-by-class matrix.
inline double precision(const ConfusionMatrix& m, ActivityClass c) {
    const auto i = class_index(c);
    return safe_ratio(static_cast<double>(m.counts[i][i]), static_cast<double>(m.row_total(i)));
}

inline double recall(const ConfusionMatrix& m, ActivityClass c) {
    const auto i = class_index(c);
    return safe_ratio(static_cast<double>(m.counts[i][i]), static_cast<double>(m.column_total(i)));
}

/// Harmonic mean of precision and recall; 0 when both are 0.
inline double f_measure(const ConfusionMatrix& m, ActivityClass c) {
    const double p = precision(m, c), r = recall(m, c);
    return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

/// Area under the ROC curve via the Mann-Whitney rank statistic with midranks,
/// so tied scores contribute one half.
inline double roc_area(std::span<const double> scores, const std::vector<bool>& positive) {
    if (scores.size() != positive.size()) throw Error("AUC scores/truth size mismatch");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double pos_rank_sum = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t lo = 0; lo < n;) {
        std::size_t hi = lo;
        while (hi < n && scores[order[hi]] == scores[order[lo]]) ++hi;
        const double midrank = (static_cast<double>(lo + 1) + static_cast<double>(hi)) / 2.0;
        for (std::size_t t = lo; t < hi; ++t) {
            if (positive[order[t]]) {
                pos_rank_sum += midrank;
                ++n_pos;
            }
        }
        lo = hi;
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) throw Error("AUC undefined: ground truth has a single class");
    const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

/// One-vs-rest AUC for class `c` using each item's score for that class.
inline double roc_area_one_vs_rest(std::span<const ClassScores> scores, std::span<const ActivityClass> truths,
                                   ActivityClass c) {
    if (scores.size() != truths.size()) throw Error("AUC scores/truth size mismatch");
    std::vector<double> s(scores.size());
    std::vector<bool> pos(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        s[i] = scores[i][class_index(c)];
        pos[i] = truths[i] == c;
    }
    return roc_area(s, pos);
}

/// Assigns each item a fold so that fold sizes, and each class's count per fold,
/// differ by at most one. Classes are shuffled independently, then dealt
/// round-robin in class order.
inline std::vector<std::size_t> stratified_folds(std::span<const ActivityClass> labels, std::size_t folds,
                                                 std::uint64_t seed) {
    if (folds < 2) throw Error("stratified folds need folds >= 2");
    if (folds > labels.size()) {
        throw Error("folds=" + std::to_string(folds) + " exceeds dataset size " + std::to_string(labels.size()));
    }
    std::vector<std::size_t> assignment(labels.size());
    std::size_t cursor = 0;
    for (ActivityClass c : kAllClasses) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == c) members.push_back(i);
        }
        std::mt19937_64 rng(derive_seed(seed, class_index(c)));
        std::shuffle(members.begin(), members.end(), rng);
        for (std::size_t i : members) assignment[i] = cursor++ % folds;
    }
    return assignment;
}

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f_measure = 0.0;
    std::optional<double> roc_area;  // empty when the class has no positives or no negatives
    std::size_t support = 0;
};

struct ClassReport {
    std::array<ClassMetrics, kNumClasses> per_class{};
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f = 0.0;
    std::optional<double> macro_roc_area;
};

/// Metrics from a class confusion matrix plus per-item ranking scores.
inline ClassReport build_class_report(const ConfusionMatrix& conf, std::span<const ClassScores> ranking,
                                      std::span<const ActivityClass> truths) {
    ClassReport rep;
    double roc_sum = 0.0;
    std::size_t roc_count = 0;
    for (ActivityClass c : kAllClasses) {
        auto& m = rep.per_class[class_index(c)];
        m.precision = precision(conf, c);
        m.recall = recall(conf, c);
        m.f_measure = f_measure(conf, c);
        m.support = conf.column_total(class_index(c));
        if (m.support > 0 && m.support < truths.size()) {
            m.roc_area = roc_area_one_vs_rest(ranking, truths, c);
            roc_sum += *m.roc_area;
            ++roc_count;
        }
        rep.macro_precision += m.precision;
        rep.macro_recall += m.recall;
        rep.macro_f += m.f_measure;
    }
    rep.macro_precision /= static_cast<double>(kNumClasses);
    rep.macro_recall /= static_cast<double>(kNumClasses);
    rep.macro_f /= static_cast<double>(kNumClasses);
    if (roc_count > 0) rep.macro_roc_area = roc_sum / static_cast<double>(roc_count);
    return rep;
}

struct KnnSpec {
    std::size_t k = 3;
};

struct SvmSpec {
    double C = 1.0;
    double gamma = 0.5;
    double tol = 1e-3;
};

using ClassifierSpec = std::variant<KnnSpec, SvmSpec>;

inline std::string classifier_name(const ClassifierSpec& spec) {
    return std::holds_alternative<KnnSpec>(spec) ? "knn" : "svm";
}

struct FoldNote {
    std::size_t fold = 0;
    std::vector<ActivityClass> absent_classes;  // classes missing from this fold's training data
};

struct CrossValidationResult {
    ClassReport report;
    ConfusionMatrix confusion;
    std::vector<Prediction> predictions;  // in input order
    std::vector<std::size_t> fold_of;
    std::vector<Standardizer> fold_standardizers;
    std::vector<FoldNote> notes;
};

/// Cross-validation over a given fold assignment (ids 0..folds-1), with
/// per-fold standardization. Predictions from all folds are pooled into one
/// confusion matrix before metrics are computed.
inline CrossValidationResult cross_validate_on_folds(const ClassifierSpec& spec, std::span<const FeatureVector> features,
                                                     std::span<const ActivityClass> labels,
                                                     std::vector<std::size_t> fold_of, std::size_t threads = 1) {
    if (features.size() != labels.size() || fold_of.size() != labels.size()) {
        throw Error("features/labels/folds size mismatch");
    }
    CrossValidationResult out;
    out.fold_of = std::move(fold_of);
    std::size_t folds = 0;
    for (std::size_t f : out.fold_of) folds = std::max(folds, f + 1);
    const auto points = to_points(features);
    out.predictions.resize(points.size());
    out.fold_standardizers.resize(folds);
    out.notes.resize(folds);

    parallel_for(folds, threads, [&](std::size_t f) {
        std::vector<Point> train;
        std::vector<ActivityClass> train_labels;
        std::vector<std::size_t> test;
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (out.fold_of[i] == f) {
                test.push_back(i);
            } else {
                train.push_back(points[i]);
                train_labels.push_back(labels[i]);
            }
        }
        const auto scaler = Standardizer::fit(train);
        out.fold_standardizers[f] = scaler;
        const auto train_std = scaler.apply(std::span<const Point>(train));

        FoldNote note{f, {}};
        std::array<bool, kNumClasses> present{};
        for (ActivityClass c : train_labels) present[class_index(c)] = true;
        for (ActivityClass c : kAllClasses) {
            if (!present[class_index(c)]) note.absent_classes.push_back(c);
        }
        out.notes[f] = std::move(note);

        if (const auto* knn = std::get_if<KnnSpec>(&spec)) {
            const auto model = fit_knn(train_std, train_labels, knn->k);
            for (std::size_t i : test) out.predictions[i] = knn_predict(model, scaler.apply(points[i]));
        } else {
            const auto& svm = std::get<SvmSpec>(spec);
            const auto model = train_svm(train_std, train_labels, SmoOptions{svm.C, svm.gamma, svm.tol, 0});
            for (std::size_t i : test) out.predictions[i] = svm_predict(model, scaler.apply(points[i]));
        }
    });

    out.confusion = ConfusionMatrix::for_classes();
    std::vector<ClassScores> ranking;
    ranking.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        ++out.confusion.counts[class_index(out.predictions[i].label)][class_index(labels[i])];
        ranking.push_back(out.predictions[i].ranking);
    }
    out.report = build_class_report(out.confusion, ranking, labels);
    return out;
}

/// Stratified k-fold cross-validation.
inline CrossValidationResult cross_validate(const ClassifierSpec& spec, std::span<const FeatureVector> features,
                                            std::span<const ActivityClass> labels, std::size_t folds,
                                            std::uint64_t seed, std::size_t threads = 1) {
    if (features.size() != labels.size()) throw Error("features/labels size mismatch");
    return cross_validate_on_folds(spec, features, labels, stratified_folds(labels, folds, seed), threads);
}

/// Rows are cluster ids 0..k-1, columns the five classes.
inline ConfusionMatrix cluster_confusion(std::span<const std::size_t> clusters, std::span<const ActivityClass> truths,
                                         std::size_t k = 0) {
    if (clusters.size() != truths.size()) throw Error("cluster/label size mismatch");
    for (std::size_t c : clusters) k = std::max(k, c + 1);
    std::vector<std::string> rows, cols;
    for (std::size_t c = 0; c < k; ++c) rows.push_back("cluster" + std::to_string(c));
    for (ActivityClass c : kAllClasses) cols.emplace_back(to_string(c));
    ConfusionMatrix m(rows, cols);
    for (std::size_t i = 0; i < clusters.size(); ++i) ++m.counts[clusters[i]][class_index(truths[i])];
    return m;
}

/// Sum over rows of the row's largest count, divided by the total.
inline double purity(const ConfusionMatrix& m) {
    const std::size_t total = m.total();
    if (total == 0) return 0.0;
    std::size_t dominant = 0;
    for (const auto& row : m.counts) {
        if (!row.empty()) dominant += *std::max_element(row.begin(), row.end());
    }
    return static_cast<double>(dominant) / static_cast<double>(total);
}

inline nlohmann::ordered_json confusion_to_json(const ConfusionMatrix& m) {
    nlohmann::ordered_json j;
    j["rows"] = m.row_keys;
    j["columns"] = m.column_keys;
    j["counts"] = m.counts;
    return j;
}

inline nlohmann::ordered_json report_to_json(const ClassReport& rep) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json classes;
    for (ActivityClass c : kAllClasses) {
        const auto& m = rep.per_class[class_index(c)];
        nlohmann::ordered_json e;
        e["precision"] = m.precision;
        e["recall"] = m.recall;
        e["f_measure"] = m.f_measure;
        e["roc_area"] = m.roc_area ? nlohmann::ordered_json(*m.roc_area) : nlohmann::ordered_json(nullptr);
        e["support"] = m.support;
        classes[std::string(to_string(c))] = std::move(e);
    }
    j["classes"] = std::move(classes);
    j["macro"] = {{"precision", rep.macro_precision},
                  {"recall", rep.macro_recall},
                  {"f_measure", rep.macro_f},
                  {"roc_area", rep.macro_roc_area ? nlohmann::ordered_json(*rep.macro_roc_area)
                                                  : nlohmann::ordered_json(nullptr)}};
    return j;
}

/// Aligned text table: one column per class, F and ROC rows.
inline void write_report_table(std::ostream& out, const std::string& model_name, const ClassReport& rep) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-8s %-4s", "model", "");
    out << buf;
    for (ActivityClass c : kAllClasses) {
        std::snprintf(buf, sizeof buf, " %14s", std::string(to_string(c)).c_str());
        out << buf;
    }
    std::snprintf(buf, sizeof buf, " %14s\n", "macro");
    out << buf;
    const auto row = [&](const char* metric, auto value_of, std::optional<double> macro) {
        std::snprintf(buf, sizeof buf, "%-8s %-4s", model_name.c_str(), metric);
        out << buf;
        for (ActivityClass c : kAllClasses) {
            const std::optional<double> v = value_of(rep.per_class[class_index(c)]);
            if (v) std::snprintf(buf, sizeof buf, " %14.3f", *v);
            else std::snprintf(buf, sizeof buf, " %14s", "-");
            out << buf;
        }
        if (macro) std::snprintf(buf, sizeof buf, " %14.3f\n", *macro);
        else std::snprintf(buf, sizeof buf, " %14s\n", "-");
        out << buf;
    };
    row("F", [](const ClassMetrics& m) -> std::optional<double> { return m.f_measure; }, rep.macro_f);
    row("ROC", [](const ClassMetrics& m) { return m.roc_area; }, rep.macro_roc_area);
}

}  // namespace retrace
