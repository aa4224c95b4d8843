#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "retrace/activity_class.hpp"
#include "retrace/error.hpp"
#include "retrace/gmm.hpp"
#include "retrace/knn.hpp"
#include "retrace/standardizer.hpp"
#include "retrace/svm.hpp"

namespace retrace {

inline constexpr int kModelFormatVersion = 1;
inline constexpr const char* kModelFormatName = "retrace-model";

/// A trained model plus the standardizer its inputs must pass through.
struct ModelDocument {
    Standardizer standardizer;
    std::variant<KnnModel, SvmModel, GmmModel> model;

    std::string type() const {
        switch (model.index()) {
            case 0: return "knn";
            case 1: return "svm";
            default: return "gmm";
        }
    }
};

namespace detail {

using ojson = nlohmann::ordered_json;

inline ActivityClass class_from_json(const nlohmann::json& j) {
    const auto c = parse_activity_class(j.get<std::string>());
    if (!c) throw Error("model references unknown class '" + j.get<std::string>() + "'");
    return *c;
}

}  // namespace detail

inline nlohmann::ordered_json model_to_json(const ModelDocument& doc) {
    using detail::ojson;
    ojson j;
    j["format"] = kModelFormatName;
    j["version"] = kModelFormatVersion;
    j["type"] = doc.type();
    j["standardizer"] = {{"mean", doc.standardizer.mean()}, {"std", doc.standardizer.stddev()}};
    if (const auto* knn = std::get_if<KnnModel>(&doc.model)) {
        j["hyperparameters"] = {{"k", knn->k}};
        ojson labels = ojson::array();
        for (ActivityClass c : knn->labels) labels.push_back(to_string(c));
        j["knn"] = {{"points", knn->points}, {"labels", labels}};
    } else if (const auto* svm = std::get_if<SvmModel>(&doc.model)) {
        j["hyperparameters"] = {{"C", svm->C}, {"gamma", svm->gamma}};
        ojson classes = ojson::array();
        for (ActivityClass c : svm->classes) classes.push_back(to_string(c));
        ojson machines = ojson::array();
        for (const auto& m : svm->machines) {
            machines.push_back({{"positive", to_string(m.positive)},
                                {"negative", to_string(m.negative)},
                                {"bias", m.svm.bias},
                                {"support_vectors", m.svm.support_vectors},
                                {"coef", m.svm.coef}});
        }
        j["svm"] = {{"classes", classes}, {"machines", machines}};
    } else {
        const auto& gmm = std::get<GmmModel>(doc.model);
        j["hyperparameters"] = {{"k", gmm.k()}, {"variance_floor", kVarianceFloor}};
        ojson comps = ojson::array();
        for (const auto& c : gmm.components) comps.push_back({{"weight", c.weight}, {"mean", c.mean}, {"variance", c.variance}});
        j["gmm"] = {{"components", comps}, {"log_likelihood", gmm.log_likelihood}, {"iterations", gmm.iterations}};
    }
    return j;
}

inline ModelDocument model_from_json(const nlohmann::json& j) {
    try {
        if (j.value("format", std::string{}) != kModelFormatName) throw Error("not a retrace model document");
        if (!j.contains("version")) throw Error("model document has no version field");
        const int version = j.at("version").get<int>();
        if (version != kModelFormatVersion) {
            throw Error("model schema version " + std::to_string(version) + " is not supported (expected " +
                        std::to_string(kModelFormatVersion) + ")");
        }
        ModelDocument doc;
        doc.standardizer = Standardizer(j.at("standardizer").at("mean").get<std::vector<double>>(),
                                        j.at("standardizer").at("std").get<std::vector<double>>());
        const auto type = j.at("type").get<std::string>();
        if (type == "knn") {
            const auto& body = j.at("knn");
            std::vector<ActivityClass> labels;
            for (const auto& l : body.at("labels")) labels.push_back(detail::class_from_json(l));
            doc.model = fit_knn(body.at("points").get<std::vector<Point>>(), std::move(labels),
                                j.at("hyperparameters").at("k").get<std::size_t>());
        } else if (type == "svm") {
            const auto& body = j.at("svm");
            SvmModel svm;
            svm.C = j.at("hyperparameters").at("C").get<double>();
            svm.gamma = j.at("hyperparameters").at("gamma").get<double>();
            for (const auto& c : body.at("classes")) svm.classes.push_back(detail::class_from_json(c));
            for (const auto& m : body.at("machines")) {
                PairwiseMachine pm{detail::class_from_json(m.at("positive")), detail::class_from_json(m.at("negative")), {}};
                pm.svm.gamma = svm.gamma;
                pm.svm.bias = m.at("bias").get<double>();
                pm.svm.support_vectors = m.at("support_vectors").get<std::vector<Point>>();
                pm.svm.coef = m.at("coef").get<std::vector<double>>();
                if (pm.svm.coef.size() != pm.svm.support_vectors.size()) throw Error("SVM coef/support vector mismatch");
                svm.machines.push_back(std::move(pm));
            }
            if (svm.classes.size() < 2 || svm.machines.empty()) throw Error("SVM model has no machines");
            doc.model = std::move(svm);
        } else if (type == "gmm") {
            const auto& body = j.at("gmm");
            GmmModel gmm;
            for (const auto& c : body.at("components")) {
                gmm.components.push_back({c.at("weight").get<double>(), c.at("mean").get<std::vector<double>>(),
                                          c.at("variance").get<std::vector<double>>()});
            }
            if (gmm.components.empty()) throw Error("GMM model has no components");
            gmm.log_likelihood = body.at("log_likelihood").get<double>();
            gmm.iterations = body.at("iterations").get<std::size_t>();
            doc.model = std::move(gmm);
        } else {
            throw Error("unknown model type '" + type + "'");
        }
        return doc;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed model document: ") + e.what());
    }
}

inline void write_model(std::ostream& out, const ModelDocument& doc) { out << model_to_json(doc).dump(2) << '\n'; }

inline ModelDocument read_model(std::istream& in) {
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed model document: ") + e.what());
    }
    return model_from_json(j);
}

}  // namespace retrace
