#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "retrace/model_io.hpp"
#include "retrace/pipeline.hpp"
#include "retrace/synth.hpp"

using namespace retrace;

namespace {

LabelledFeatures corpus_features(std::size_t per_class, std::uint64_t seed) {
    const auto corpus = gen_corpus(per_class, seed);
    return join_labels(featurize_all(corpus.traces), corpus.labels);
}

std::string predictions(const ModelDocument& doc, const std::vector<FeatureVector>& f) {
    std::ostringstream out;
    write_predictions_csv(out, doc, f);
    return out.str();
}

ModelDocument round_trip(const ModelDocument& doc) {
    std::stringstream buf;
    write_model(buf, doc);
    return read_model(buf);
}

std::filesystem::path temp_dir() {
    auto dir = std::filesystem::temp_directory_path() /
               ("retrace_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST(ModelIo, RoundTripPreservesPredictions) {
    const auto data = corpus_features(20, 3);
    for (const std::string type : {"knn", "svm", "gmm"}) {
        const auto doc = train_model(type, data, type == "gmm" ? 5 : 3, 1.0, 0.5, 7);
        const auto back = round_trip(doc);
        EXPECT_EQ(back.type(), type);
        EXPECT_EQ(back.standardizer.mean(), doc.standardizer.mean());
        EXPECT_EQ(predictions(back, data.features), predictions(doc, data.features)) << type;
        EXPECT_EQ(model_to_json(back).dump(), model_to_json(doc).dump()) << type;
    }
}

TEST(ModelIo, RejectsBadDocuments) {
    const auto doc = train_model("knn", corpus_features(4, 1), 3, 1, 0.5, 7);
    auto j = nlohmann::json::parse(model_to_json(doc).dump());

    auto wrong_version = j;
    wrong_version["version"] = 99;
    try {
        model_from_json(wrong_version);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("version 99"), std::string::npos);
    }
    auto no_version = j;
    no_version.erase("version");
    EXPECT_THROW(model_from_json(no_version), Error);
    auto bad_type = j;
    bad_type["type"] = "forest";
    EXPECT_THROW(model_from_json(bad_type), Error);
    auto missing_body = j;
    missing_body.erase("knn");
    EXPECT_THROW(model_from_json(missing_body), Error);
    std::istringstream garbage("{not json");
    EXPECT_THROW(read_model(garbage), Error);
}

TEST(ModelIo, TrainingIsDeterministic) {
    const auto data = corpus_features(10, 4);
    for (const std::string type : {"knn", "svm", "gmm"}) {
        const auto a = model_to_json(train_model(type, data, 3, 1, 0.5, 7, 1)).dump();
        const auto b = model_to_json(train_model(type, data, 3, 1, 0.5, 7, 6)).dump();
        EXPECT_EQ(a, b) << type;
    }
}

TEST(Pipeline, SvmFitsTrainingDataExceptParasitic) {
    const auto data = corpus_features(100, 7);
    const auto doc = train_model("svm", data, 3, 1.0, 0.5, 7, 4);
    const auto& svm = std::get<SvmModel>(doc.model);
    std::size_t right = 0, total = 0;
    for (std::size_t i = 0; i < data.features.size(); ++i) {
        if (data.labels[i] == ActivityClass::ParasiticAds) continue;
        ++total;
        right += svm_predict(svm, doc.standardizer.apply(to_point(data.features[i]))).label == data.labels[i];
    }
    EXPECT_GE(double(right) / double(total), 0.99);
}

TEST(Pipeline, FeaturizeAppliesFilter) {
    TraceMap traces;
    for (int i = 0; i < 4; ++i) {
        const auto url = "big" + std::to_string(i);
        Trace t{url, {}, std::nullopt};
        for (int e = 0; e < 120; ++e) t.events.push_back({e == 0 ? "owner" : "x" + std::to_string(e), e * 3});
        traces.emplace(url, t);
    }
    traces.emplace("small", Trace{"small", {{"owner", 1}, {"z", 2}}, std::nullopt});
    std::stringstream buf;
    write_events_csv(buf, traces);
    const auto r = featurize_events(buf, EventFormat::Csv, {});
    EXPECT_EQ(r.traces_before_filter, 5u);
    EXPECT_EQ(r.traces_after_filter, 4u);
    EXPECT_EQ(r.events, 482u);
    EXPECT_EQ(r.features.size(), 4u);
}

TEST(Pipeline, JoinLabelsCountsSkips) {
    const std::vector<FeatureVector> f{{"a", 1, 1, 100, 10}, {"b", 2, 2, 100, 10}, {"c", 3, 3, 100, 10}};
    const LabelMap labels{{"a", ActivityClass::Campaign}, {"c", ActivityClass::AutoTweet}, {"zz", ActivityClass::Campaign}};
    const auto j = join_labels(f, labels);
    EXPECT_EQ(j.features.size(), 2u);
    EXPECT_EQ(j.labels, (std::vector<ActivityClass>{ActivityClass::Campaign, ActivityClass::AutoTweet}));
    EXPECT_EQ(j.unlabelled_features, 1u);
    EXPECT_EQ(j.unknown_urls, (std::vector<std::string>{"zz"}));
}

TEST(Pipeline, EvalGmmReportsPurityAndFiveClusters) {
    const auto data = corpus_features(40, 7);
    EvalOptions opt;
    opt.model = "gmm";
    const auto out = run_eval(data, opt);
    EXPECT_EQ(out.confusion.row_keys.size(), 5u);
    EXPECT_EQ(out.confusion.total(), data.features.size());
    EXPECT_GE(out.report["purity"].get<double>(), 0.2);
}

TEST(Pipeline, AtomicWriteLeavesNothingOnFailure) {
    const auto dir = temp_dir();
    const auto path = dir / "out.csv";
    EXPECT_THROW(write_file_atomically(path,
                                       [](std::ostream& out) {
                                           out << "partial";
                                           throw Error("boom");
                                       }),
                 Error);
    EXPECT_FALSE(std::filesystem::exists(path));
    EXPECT_TRUE(std::filesystem::is_empty(dir));

    write_file_atomically(path, [](std::ostream& out) { out << "ok\n"; });
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "ok");
    std::filesystem::remove_all(dir);
}

TEST(Pipeline, ParseErrorsGainFileContext) {
    try {
        with_file_context("events.csv", [] {
            std::istringstream in("u1,,5\n");
            return parse_events(in, EventFormat::Csv);
        });
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(std::string(e.what()), "events.csv: empty user_id at line 1");
    }
}
