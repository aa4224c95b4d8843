// retrace: entropy-based retweet activity classification from the command line.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "retrace/pipeline.hpp"

namespace fs = std::filesystem;
using namespace retrace;

namespace {

struct RunConfig {
    std::string input;
    std::string format = "jsonl";
    std::string labels;
    std::string output;
    std::string model = "knn";
    std::string model_file;
    std::size_t k = 0;
    double C = 1.0;
    double gamma = 0.5;
    std::size_t folds = 10;
    std::size_t k_max = 15;
    bool scan_all_k = false;
    std::size_t min_retweets = 100;
    std::size_t min_popular_urls = 2;
    std::size_t per_class = 100;
    std::uint64_t seed = kDefaultSeed;
    std::size_t threads = 1;
};

void configure_logging() {
    auto logger = spdlog::stderr_color_mt("retrace");
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("RETRACE_LOG")) {
        const auto level = spdlog::level::from_str(env);
        // from_str maps unknown names to "off"; only honour it when asked for.
        if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
    }
}

std::vector<FeatureVector> read_features(const std::string& path) {
    auto in = open_input(path);
    return with_file_context(path, [&] { return parse_features_csv(in); });
}

LabelledFeatures read_labelled(const RunConfig& cfg) {
    const auto features = read_features(cfg.input);
    auto in = open_input(cfg.labels);
    const auto labels = with_file_context(cfg.labels, [&] { return parse_labels(in); });
    auto data = join_labels(features, labels);
    if (!data.unknown_urls.empty()) {
        spdlog::warn("{} label rows reference urls absent from {}; skipped", data.unknown_urls.size(), cfg.input);
    }
    if (data.unlabelled_features > 0) spdlog::warn("{} feature rows have no label; skipped", data.unlabelled_features);
    if (data.features.empty()) throw Error("no labelled feature rows");
    return data;
}

std::vector<Point> standardized_points(const std::vector<FeatureVector>& features) {
    const auto raw = to_points(features);
    return Standardizer::fit(raw).apply(std::span<const Point>(raw));
}

void cmd_synth(const RunConfig& cfg) {
    const auto corpus = gen_corpus(cfg.per_class, cfg.seed, cfg.threads);
    const auto format = parse_event_format(cfg.format);
    write_file_atomically(cfg.output, [&](std::ostream& out) {
        if (format == EventFormat::Csv) write_events_csv(out, corpus.traces);
        else write_events_jsonl(out, corpus.traces);
    });
    if (!cfg.labels.empty()) {
        write_file_atomically(cfg.labels, [&](std::ostream& out) { write_labels(out, corpus.labels); });
    }
    std::cout << "synth: " << corpus.traces.size() << " traces (" << cfg.per_class << " per class) -> " << cfg.output
              << '\n';
}

void cmd_featurize(const RunConfig& cfg) {
    auto in = open_input(cfg.input);
    const PopularityFilter filter{cfg.min_retweets, cfg.min_popular_urls};
    const auto result =
        with_file_context(cfg.input, [&] { return featurize_events(in, *parse_event_format(cfg.format), filter, cfg.threads); });
    write_file_atomically(cfg.output, [&](std::ostream& out) { write_features_csv(out, result.features); });
    std::cout << "featurize: " << result.events << " events, " << result.traces_before_filter
              << " traces before filter, " << result.traces_after_filter << " after filter -> " << cfg.output << '\n';
}

void cmd_train(const RunConfig& cfg) {
    const auto data = read_labelled(cfg);
    const std::size_t k = cfg.k ? cfg.k : (cfg.model == "gmm" ? 5 : 3);
    const auto doc = train_model(cfg.model, data, k, cfg.C, cfg.gamma, cfg.seed, cfg.threads);
    write_file_atomically(cfg.output, [&](std::ostream& out) { write_model(out, doc); });
    std::cout << "train: " << cfg.model << " on " << data.features.size() << " traces -> " << cfg.output << '\n';
}

void cmd_predict(const RunConfig& cfg) {
    auto model_in = open_input(cfg.model_file);
    const auto doc = read_model(model_in);
    const auto features = read_features(cfg.input);
    write_file_atomically(cfg.output, [&](std::ostream& out) { write_predictions_csv(out, doc, features); });
    std::cout << "predict: " << features.size() << " traces with " << doc.type() << " model -> " << cfg.output << '\n';
}

void report_clusters(const RunConfig& cfg, const std::vector<FeatureVector>& features, const GmmAssignment& a) {
    if (cfg.labels.empty()) return;
    auto in = open_input(cfg.labels);
    const auto labels = with_file_context(cfg.labels, [&] { return parse_labels(in); });
    std::vector<std::size_t> ids;
    std::vector<ActivityClass> truths;
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (const auto it = labels.find(features[i].url_id); it != labels.end()) {
            ids.push_back(a.cluster[i]);
            truths.push_back(it->second);
        }
    }
    const auto conf = cluster_confusion(ids, truths, a.k);
    write_confusion_csv(std::cout, conf);
    std::cout << "purity: " << purity(conf) << '\n';
}

void cmd_cluster(const RunConfig& cfg) {
    const auto features = read_features(cfg.input);
    const auto pts = standardized_points(features);
    const std::size_t k = cfg.k ? cfg.k : 5;
    const auto model = em_fit(pts, k, cfg.seed);
    const auto a = em_assign(model, pts);
    write_file_atomically(cfg.output, [&](std::ostream& out) { write_assignments_csv(out, features, a); });
    std::cout << "cluster: k=" << k << " log-likelihood=" << model.log_likelihood << " iterations=" << model.iterations
              << " -> " << cfg.output << '\n';
    report_clusters(cfg, features, a);
}

void cmd_select_k(const RunConfig& cfg) {
    const auto features = read_features(cfg.input);
    const auto pts = standardized_points(features);
    SelectKOptions opt;
    opt.k_max = cfg.k_max;
    opt.folds = cfg.folds;
    opt.scan_all = cfg.scan_all_k;
    opt.threads = cfg.threads;
    const auto result = em_select_k(pts, cfg.seed, opt);
    const auto a = em_assign(result.model, pts);
    write_file_atomically(cfg.output, [&](std::ostream& out) { write_assignments_csv(out, features, a); });
    std::cout << "select-k: chose k=" << result.best_k << "; cv mean held-out log-likelihood per point:";
    for (std::size_t i = 0; i < result.cv_scores.size(); ++i) std::cout << " k" << (i + 1) << '=' << result.cv_scores[i];
    std::cout << "\n";
    report_clusters(cfg, features, a);
}

void cmd_eval(const RunConfig& cfg) {
    const auto data = read_labelled(cfg);
    EvalOptions opt;
    opt.model = cfg.model;
    opt.k = cfg.k;
    opt.C = cfg.C;
    opt.gamma = cfg.gamma;
    opt.folds = cfg.folds;
    opt.seed = cfg.seed;
    opt.threads = cfg.threads;
    const auto result = run_eval(data, opt);
    std::cout << result.table;
    if (cfg.output.empty()) return;
    const fs::path out_path(cfg.output);
    auto stem = out_path;
    stem.replace_extension();
    write_file_atomically(out_path, [&](std::ostream& out) { out << result.report.dump(2) << '\n'; });
    write_file_atomically(stem.string() + ".txt", [&](std::ostream& out) { out << result.table; });
    write_file_atomically(stem.string() + ".confusion.csv", [&](std::ostream& out) { write_confusion_csv(out, result.confusion); });
}

}  // namespace

int main(int argc, char** argv) {
    configure_logging();
    RunConfig cfg;
    CLI::App app{"retrace: entropy features and activity classification for retweet traces"};
    app.require_subcommand(1);

    const auto positive_count = CLI::Range(std::size_t{1}, std::numeric_limits<std::size_t>::max());
    const auto positive_real = CLI::PositiveNumber;
    const auto format_check = CLI::IsMember({"jsonl", "csv"});
    auto common = [&](CLI::App* sub) {
        sub->add_option("--seed", cfg.seed, "Seed for every stochastic step")->capture_default_str();
        sub->add_option("--threads", cfg.threads, "Worker threads")->check(positive_count)->capture_default_str();
    };

    auto* synth = app.add_subcommand("synth", "Generate a labelled synthetic corpus");
    synth->add_option("--per-class", cfg.per_class, "Traces per activity class")->check(positive_count)->capture_default_str();
    synth->add_option("--output", cfg.output, "Events file to write")->required();
    synth->add_option("--labels", cfg.labels, "Labels CSV to write");
    synth->add_option("--format", cfg.format, "Events format")->check(format_check)->capture_default_str();
    common(synth);

    auto* featurize = app.add_subcommand("featurize", "Events -> per-url entropy feature CSV");
    featurize->add_option("--input", cfg.input, "Events file")->required()->check(CLI::ExistingFile);
    featurize->add_option("--format", cfg.format, "Events format")->check(format_check)->capture_default_str();
    featurize->add_option("--output", cfg.output, "Feature CSV to write")->required();
    featurize->add_option("--min-retweets", cfg.min_retweets, "Minimum events per url")->capture_default_str();
    featurize->add_option("--min-popular-urls", cfg.min_popular_urls, "Minimum popular urls per author")->capture_default_str();
    common(featurize);

    const auto model_choice = CLI::IsMember({"knn", "svm", "gmm"});
    auto hyper = [&](CLI::App* sub) {
        sub->add_option("--model", cfg.model, "Model type")->check(model_choice)->capture_default_str();
        sub->add_option("--k", cfg.k, "Neighbours (knn, default 3) or components (gmm, default 5)")->check(positive_count);
        sub->add_option("--C", cfg.C, "SVM penalty")->check(positive_real)->capture_default_str();
        sub->add_option("--gamma", cfg.gamma, "RBF kernel width")->check(positive_real)->capture_default_str();
    };

    auto* train = app.add_subcommand("train", "Fit a model on labelled features");
    train->add_option("--input", cfg.input, "Feature CSV")->required()->check(CLI::ExistingFile);
    train->add_option("--labels", cfg.labels, "Labels CSV")->required()->check(CLI::ExistingFile);
    train->add_option("--output", cfg.output, "Model JSON to write")->required();
    hyper(train);
    common(train);

    auto* predict = app.add_subcommand("predict", "Apply a trained model to features");
    predict->add_option("--input", cfg.input, "Feature CSV")->required()->check(CLI::ExistingFile);
    predict->add_option("--model-file", cfg.model_file, "Model JSON from train")->required()->check(CLI::ExistingFile);
    predict->add_option("--output", cfg.output, "Predictions CSV to write")->required();
    common(predict);

    auto* cluster = app.add_subcommand("cluster", "EM Gaussian mixture with a fixed number of clusters");
    cluster->add_option("--input", cfg.input, "Feature CSV")->required()->check(CLI::ExistingFile);
    cluster->add_option("--k", cfg.k, "Number of clusters (default 5)")->check(positive_count);
    cluster->add_option("--output", cfg.output, "Assignments CSV to write")->required();
    cluster->add_option("--labels", cfg.labels, "Labels CSV; prints confusion matrix and purity")->check(CLI::ExistingFile);
    common(cluster);

    auto* select_k = app.add_subcommand("select-k", "EM Gaussian mixture with k chosen by cross-validation");
    select_k->add_option("--input", cfg.input, "Feature CSV")->required()->check(CLI::ExistingFile);
    select_k->add_option("--k-max", cfg.k_max, "Largest k to try")->check(positive_count)->capture_default_str();
    select_k->add_option("--folds", cfg.folds, "Cross-validation folds")->check(CLI::Range(std::size_t{2}, std::size_t{1000}))->capture_default_str();
    select_k->add_flag("--scan-all-k", cfg.scan_all_k, "Try every k up to --k-max and keep the best");
    select_k->add_option("--output", cfg.output, "Assignments CSV to write")->required();
    select_k->add_option("--labels", cfg.labels, "Labels CSV; prints confusion matrix and purity")->check(CLI::ExistingFile);
    common(select_k);

    auto* eval = app.add_subcommand("eval", "Cross-validated report (knn/svm) or cluster purity (gmm)");
    eval->add_option("--input", cfg.input, "Feature CSV")->required()->check(CLI::ExistingFile);
    eval->add_option("--labels", cfg.labels, "Labels CSV")->required()->check(CLI::ExistingFile);
    eval->add_option("--folds", cfg.folds, "Cross-validation folds")->check(CLI::Range(std::size_t{2}, std::size_t{1000}))->capture_default_str();
    eval->add_option("--output", cfg.output, "Report JSON to write (.txt table and .confusion.csv alongside)");
    hyper(eval);
    common(eval);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*synth) cmd_synth(cfg);
        else if (*featurize) cmd_featurize(cfg);
        else if (*train) cmd_train(cfg);
        else if (*predict) cmd_predict(cfg);
        else if (*cluster) cmd_cluster(cfg);
        else if (*select_k) cmd_select_k(cfg);
        else if (*eval) cmd_eval(cfg);
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
