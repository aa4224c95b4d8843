#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "retrace/knn.hpp"

using namespace retrace;

namespace {

std::vector<Point> random_points(std::mt19937_64& rng, std::size_t n, double scale = 3.0) {
    std::normal_distribution<double> g(1.0, scale);
    std::vector<Point> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back({g(rng), g(rng)});
    return out;
}

void expect_moments(const std::vector<Point>& pts, double tol) {
    for (std::size_t d = 0; d < 2; ++d) {
        double m = 0.0, v = 0.0;
        for (const auto& p : pts) m += p[d];
        m /= double(pts.size());
        for (const auto& p : pts) v += (p[d] - m) * (p[d] - m);
        v /= double(pts.size());
        EXPECT_NEAR(m, 0.0, tol);
        EXPECT_NEAR(v, 1.0, tol);
    }
}

}  // namespace

TEST(Standardizer, TwoPointZScore) {
    const std::vector<Point> pts{{0, 0}, {2, 2}};
    const auto s = Standardizer::fit(pts);
    EXPECT_EQ(s.mean(), (std::vector<double>{1, 1}));
    EXPECT_EQ(s.stddev(), (std::vector<double>{1, 1}));
    EXPECT_EQ(s.apply(Point{2, 2}), (Point{1, 1}));
}

TEST(Standardizer, RandomSampleHasZeroMeanUnitVariance) {
    std::mt19937_64 rng(200);
    const auto pts = random_points(rng, 200);
    const auto z = Standardizer::fit(pts).apply(std::span<const Point>(pts));
    expect_moments(z, 1e-9);

    // A second fit on already-standardized data is the identity.
    const auto again = Standardizer::fit(z);
    for (const auto& p : z) {
        const auto q = again.apply(p);
        EXPECT_NEAR(q[0], p[0], 1e-9);
        EXPECT_NEAR(q[1], p[1], 1e-9);
    }
}

TEST(Standardizer, ZeroVarianceNamesDimension) {
    const std::vector<Point> pts{{0, 1}, {0, 2}, {0, 5}};
    try {
        Standardizer::fit(pts);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("h_time"), std::string::npos) << e.what();
    }
    const std::vector<Point> flat_user{{1, 3}, {2, 3}};
    try {
        Standardizer::fit(flat_user);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("h_user"), std::string::npos) << e.what();
    }
    EXPECT_THROW(Standardizer::fit(std::vector<Point>{{1, 1}}), Error);
}

TEST(Knn, ExactMatchWithKOne) {
    const auto m = fit_knn({{0, 0}, {1, 1}, {5, 5}},
                           {ActivityClass::Campaign, ActivityClass::AutoTweet, ActivityClass::NewsAndBlogs}, 1);
    EXPECT_EQ(knn_predict(m, {1, 1}).label, ActivityClass::AutoTweet);
    EXPECT_EQ(knn_predict(m, {5, 5}).label, ActivityClass::NewsAndBlogs);
}

TEST(Knn, MajorityVoteScores) {
    const auto m = fit_knn({{0, 0}, {0.1, 0}, {0, 0.2}, {9, 9}},
                           {ActivityClass::AdsAndPromotion, ActivityClass::AdsAndPromotion, ActivityClass::Campaign,
                            ActivityClass::Campaign});
    const auto p = knn_predict(m, {0, 0.05});
    EXPECT_EQ(p.label, ActivityClass::AdsAndPromotion);
    EXPECT_DOUBLE_EQ(p.scores[class_index(ActivityClass::AdsAndPromotion)], 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(p.scores[class_index(ActivityClass::Campaign)], 1.0 / 3.0);
}

TEST(Knn, VoteTieGoesToCloserClass) {
    // k=2 with one neighbour per class: inverse distance decides.
    const auto m = fit_knn({{0, 0}, {3, 0}}, {ActivityClass::NewsAndBlogs, ActivityClass::ParasiticAds}, 2);
    EXPECT_EQ(knn_predict(m, {2, 0}).label, ActivityClass::ParasiticAds);
    EXPECT_EQ(knn_predict(m, {1, 0}).label, ActivityClass::NewsAndBlogs);
    // Equidistant: class order.
    EXPECT_EQ(knn_predict(m, {1.5, 0}).label, ActivityClass::NewsAndBlogs);
}

TEST(Knn, DistanceTieAtKthPrefersEarlierIndex) {
    const auto m = fit_knn({{1, 0}, {-1, 0}, {0, 1}}, {ActivityClass::Campaign, ActivityClass::AutoTweet,
                                                      ActivityClass::NewsAndBlogs},
                           1);
    EXPECT_EQ(knn_neighbors(m, {0, 0}), (std::vector<std::size_t>{0}));
}

TEST(Knn, MatchesExhaustiveScan) {
    std::mt19937_64 rng(500);
    const auto train = random_points(rng, 300);
    std::vector<ActivityClass> labels;
    for (std::size_t i = 0; i < train.size(); ++i) labels.push_back(class_from_index(rng() % kNumClasses));
    for (std::size_t k : {1u, 3u, 7u}) {
        const auto m = fit_knn(train, labels, k);
        for (int q = 0; q < 500; ++q) {
            // Snap half the queries onto a grid so exact distance ties occur.
            Point p = random_points(rng, 1).front();
            if (q % 2) p = {std::round(p[0]), std::round(p[1])};
            EXPECT_EQ(knn_neighbors(m, p), oracle::nearest(train, p, k));
        }
    }
}

TEST(Knn, RejectsBadParameters) {
    EXPECT_THROW(fit_knn({{0, 0}}, {ActivityClass::Campaign}, 0), Error);
    EXPECT_THROW(fit_knn({{0, 0}}, {ActivityClass::Campaign}, 2), Error);
    EXPECT_THROW(fit_knn({}, {}, 1), Error);
    EXPECT_THROW(knn_predict(KnnModel{}, {0, 0}), Error);
}

TEST(Knn, ArgmaxInvariantUnderAffineRescaling) {
    std::mt19937_64 rng(11);
    const auto raw = random_points(rng, 120);
    std::vector<ActivityClass> labels;
    for (const auto& p : raw) labels.push_back(p[0] + p[1] > 2.0 ? ActivityClass::Campaign : ActivityClass::AutoTweet);
    auto scaled = raw;
    for (auto& p : scaled) p = {7.5 * p[0] - 3.0, 0.01 * p[1] + 40.0};

    const auto s1 = Standardizer::fit(raw);
    const auto s2 = Standardizer::fit(scaled);
    const auto m1 = fit_knn(s1.apply(std::span<const Point>(raw)), labels);
    const auto m2 = fit_knn(s2.apply(std::span<const Point>(scaled)), labels);
    for (int q = 0; q < 100; ++q) {
        const auto p = random_points(rng, 1).front();
        const Point ps{7.5 * p[0] - 3.0, 0.01 * p[1] + 40.0};
        EXPECT_EQ(knn_predict(m1, s1.apply(p)).label, knn_predict(m2, s2.apply(ps)).label);
    }
}
