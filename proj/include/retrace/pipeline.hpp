#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "retrace/entropy.hpp"
#include "retrace/error.hpp"
#include "retrace/evaluation.hpp"
#include "retrace/gmm.hpp"
#include "retrace/model_io.hpp"
#include "retrace/standardizer.hpp"
#include "retrace/synth.hpp"
#include "retrace/trace.hpp"

namespace retrace {

inline constexpr std::uint64_t kDefaultSeed = 7;

/// Writes through a sibling temporary file and renames it into place, so a
/// failed write never leaves a partial artifact at `path`.
inline void write_file_atomically(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
    auto tmp = path;
    tmp += ".partial";
    try {
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw Error("cannot open '" + tmp.string() + "' for writing");
            body(out);
            out.flush();
            if (!out) throw Error("write to '" + tmp.string() + "' failed");
        }
        std::filesystem::rename(tmp, path);
    } catch (...) {
        std::error_code ec;
        std::filesystem::remove(tmp, ec);
        throw;
    }
}

inline std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "' for reading");
    return in;
}

/// Prefixes errors with the file they came from.
template <typename Fn>
auto with_file_context(const std::filesystem::path& path, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const ParseError& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

struct FeaturizeResult {
    std::vector<FeatureVector> features;
    std::size_t traces_before_filter = 0;
    std::size_t traces_after_filter = 0;
    std::size_t events = 0;
};

/// ingest -> group -> popularity filter -> entropy features
inline FeaturizeResult featurize_events(std::istream& events_in, EventFormat format, const PopularityFilter& filter,
                                        std::size_t threads = 1) {
    const auto events = parse_events(events_in, format);
    const auto traces = build_traces(events);
    const auto kept = filter_popular(traces, filter);
    FeaturizeResult out;
    out.events = events.size();
    out.traces_before_filter = traces.size();
    out.traces_after_filter = kept.size();
    out.features = featurize_all(kept, threads);
    return out;
}

struct LabelledFeatures {
    std::vector<FeatureVector> features;
    std::vector<ActivityClass> labels;
    std::size_t unlabelled_features = 0;  // feature rows with no label; skipped
    std::vector<std::string> unknown_urls;  // label rows with no feature row; skipped
};

inline LabelledFeatures join_labels(const std::vector<FeatureVector>& features, const LabelMap& labels) {
    LabelledFeatures out;
    std::unordered_set<std::string> seen;
    for (const auto& f : features) {
        seen.insert(f.url_id);
        const auto it = labels.find(f.url_id);
        if (it == labels.end()) {
            ++out.unlabelled_features;
            continue;
        }
        out.features.push_back(f);
        out.labels.push_back(it->second);
    }
    for (const auto& [url, label] : labels) {
        if (!seen.contains(url)) out.unknown_urls.push_back(url);
    }
    return out;
}

inline ModelDocument train_model(const std::string& type, const LabelledFeatures& data, std::size_t k, double C,
                                 double gamma, std::uint64_t seed, std::size_t threads = 1) {
    const auto raw = to_points(data.features);
    ModelDocument doc;
    doc.standardizer = Standardizer::fit(raw);
    const auto pts = doc.standardizer.apply(std::span<const Point>(raw));
    if (type == "knn") {
        doc.model = fit_knn(pts, data.labels, k);
    } else if (type == "svm") {
        doc.model = train_svm(pts, data.labels, SmoOptions{C, gamma, 1e-3, 0}, threads);
    } else if (type == "gmm") {
        doc.model = em_fit(pts, k, seed);
    } else {
        throw Error("unknown model type '" + type + "'");
    }
    return doc;
}

inline void write_assignments_csv(std::ostream& out, const std::vector<FeatureVector>& features,
                                  const GmmAssignment& assignment) {
    out << "url,cluster,top_responsibility\n";
    char buf[32];
    for (std::size_t i = 0; i < features.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.6f", assignment.top_responsibility(i));
        out << features[i].url_id << ',' << assignment.cluster[i] << ',' << buf << '\n';
    }
}

/// `url,predicted,score`; classifiers report the winning class and its score,
/// GMMs the cluster id and its responsibility.
inline void write_predictions_csv(std::ostream& out, const ModelDocument& doc, const std::vector<FeatureVector>& features) {
    out << "url,predicted,score\n";
    char buf[32];
    if (const auto* gmm = std::get_if<GmmModel>(&doc.model)) {
        const auto pts = doc.standardizer.apply(std::span<const Point>(to_points(features)));
        const auto a = em_assign(*gmm, pts);
        for (std::size_t i = 0; i < features.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.6f", a.top_responsibility(i));
            out << features[i].url_id << ",cluster" << a.cluster[i] << ',' << buf << '\n';
        }
        return;
    }
    for (const auto& f : features) {
        const auto p = doc.standardizer.apply(to_point(f));
        const auto pred = std::holds_alternative<KnnModel>(doc.model) ? knn_predict(std::get<KnnModel>(doc.model), p)
                                                                       : svm_predict(std::get<SvmModel>(doc.model), p);
        std::snprintf(buf, sizeof buf, "%.6f", pred.scores[class_index(pred.label)]);
        out << f.url_id << ',' << to_string(pred.label) << ',' << buf << '\n';
    }
}

struct EvalOptions {
    std::string model = "knn";
    std::size_t k = 0;  // 0: 3 for knn, 5 for gmm
    double C = 1.0;
    double gamma = 0.5;
    std::size_t folds = 10;
    std::uint64_t seed = kDefaultSeed;
    std::size_t threads = 1;
};

struct EvalOutput {
    nlohmann::ordered_json report;
    std::string table;
    ConfusionMatrix confusion;
};

/// Cross-validated report for knn/svm; cluster confusion and purity for gmm.
inline EvalOutput run_eval(const LabelledFeatures& data, const EvalOptions& opt) {
    EvalOutput out;
    auto& j = out.report;
    j["model"] = opt.model;
    j["seed"] = opt.seed;
    j["n_items"] = data.features.size();
    j["skipped_unlabelled_features"] = data.unlabelled_features;
    j["skipped_unknown_label_urls"] = data.unknown_urls.size();
    std::ostringstream table;

    if (opt.model == "gmm") {
        const std::size_t k = opt.k ? opt.k : 5;
        const auto raw = to_points(data.features);
        const auto scaler = Standardizer::fit(raw);
        const auto pts = scaler.apply(std::span<const Point>(raw));
        const auto model = em_fit(pts, k, opt.seed);
        const auto a = em_assign(model, pts);
        out.confusion = cluster_confusion(a.cluster, data.labels, k);
        const double pur = purity(out.confusion);
        j["k"] = k;
        j["log_likelihood"] = model.log_likelihood;
        j["purity"] = pur;
        j["confusion"] = confusion_to_json(out.confusion);
        char buf[64];
        std::snprintf(buf, sizeof buf, "gmm k=%zu purity=%.3f\n", k, pur);
        table << buf;
        write_confusion_csv(table, out.confusion);
        out.table = table.str();
        return out;
    }

    ClassifierSpec spec;
    if (opt.model == "knn") {
        spec = KnnSpec{opt.k ? opt.k : 3};
        j["hyperparameters"] = {{"k", opt.k ? opt.k : 3}};
    } else if (opt.model == "svm") {
        spec = SvmSpec{opt.C, opt.gamma, 1e-3};
        j["hyperparameters"] = {{"C", opt.C}, {"gamma", opt.gamma}};
    } else {
        throw Error("unknown model type '" + opt.model + "'");
    }
    j["folds"] = opt.folds;
    const auto cv = cross_validate(spec, data.features, data.labels, opt.folds, opt.seed, opt.threads);
    out.confusion = cv.confusion;
    j["report"] = report_to_json(cv.report);
    j["confusion"] = confusion_to_json(cv.confusion);
    nlohmann::ordered_json notes = nlohmann::ordered_json::array();
    for (const auto& n : cv.notes) {
        if (n.absent_classes.empty()) continue;
        nlohmann::ordered_json absent = nlohmann::ordered_json::array();
        for (ActivityClass c : n.absent_classes) absent.push_back(to_string(c));
        notes.push_back({{"fold", n.fold}, {"absent_training_classes", absent}});
    }
    j["fold_notes"] = notes;
    write_report_table(table, opt.model, cv.report);
    out.table = table.str();
    return out;
}

}  // namespace retrace
