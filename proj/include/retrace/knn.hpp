#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "retrace/activity_class.hpp"
#include "retrace/error.hpp"
#include "retrace/standardizer.hpp"

namespace retrace {

/// Output of either supervised classifier.
struct Prediction {
    ActivityClass label = ActivityClass::NewsAndBlogs;
    ClassScores scores{};   // vote fractions
    ClassScores ranking{};  // scores refined by the classifier's tie-break, used for ROC
};

/// k-NN over standardized points with Euclidean distance.
struct KnnModel {
    std::size_t k = 3;
    std::vector<Point> points;
    std::vector<ActivityClass> labels;
};

inline KnnModel fit_knn(std::vector<Point> points, std::vector<ActivityClass> labels, std::size_t k = 3) {
    if (k < 1) throw Error("k-NN needs k >= 1");
    if (points.size() != labels.size()) throw Error("k-NN points/labels size mismatch");
    if (points.empty()) throw Error("k-NN needs at least one training point");
    if (k > points.size()) {
        throw Error("k-NN k=" + std::to_string(k) + " exceeds training size " + std::to_string(points.size()));
    }
    return KnnModel{k, std::move(points), std::move(labels)};
}

/// Indices of the k nearest training points, ordered by (distance, index).
/// Distance ties at the k-th position favour the earlier training point.
inline std::vector<std::size_t> knn_neighbors(const KnnModel& model, const Point& query) {
    if (model.points.empty()) throw Error("k-NN model is empty");
    const std::size_t n = model.points.size();
    const std::size_t k = std::min(model.k, n);
    std::vector<double> dist(n);
    for (std::size_t i = 0; i < n; ++i) dist[i] = squared_distance(model.points[i], query);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const auto closer = [&](std::size_t a, std::size_t b) { return dist[a] < dist[b] || (dist[a] == dist[b] && a < b); };
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), closer);
    idx.resize(k);
    return idx;
}

/// Majority vote; ties broken by summed inverse distance, then by class order.
inline Prediction knn_predict(const KnnModel& model, const Point& query) {
    const auto neighbors = knn_neighbors(model, query);
    std::array<std::size_t, kNumClasses> votes{};
    std::array<std::size_t, kNumClasses> exact{};  // zero-distance neighbours dominate any finite weight
    ClassScores inverse{};
    for (std::size_t i : neighbors) {
        const auto c = class_index(model.labels[i]);
        ++votes[c];
        const double d = std::sqrt(squared_distance(model.points[i], query));
        if (d == 0.0) {
            ++exact[c];
        } else {
            inverse[c] += 1.0 / d;
        }
    }
    Prediction out;
    std::size_t best = 0;
    for (std::size_t c = 1; c < kNumClasses; ++c) {
        if (votes[c] != votes[best]) {
            if (votes[c] > votes[best]) best = c;
        } else if (exact[c] != exact[best]) {
            if (exact[c] > exact[best]) best = c;
        } else if (inverse[c] > inverse[best]) {
            best = c;
        }
    }
    const double k = static_cast<double>(neighbors.size());
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        out.scores[c] = static_cast<double>(votes[c]) / k;
        out.ranking[c] = out.scores[c];
    }
    out.label = class_from_index(best);
    return out;
}

}  // namespace retrace
