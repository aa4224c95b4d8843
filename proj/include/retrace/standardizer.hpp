#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "retrace/entropy.hpp"
#include "retrace/error.hpp"

namespace retrace {

using Point = std::vector<double>;

inline Point to_point(const FeatureVector& f) { return {f.h_time, f.h_user}; }

inline std::vector<Point> to_points(std::span<const FeatureVector> features) {
    std::vector<Point> pts;
    pts.reserve(features.size());
    for (const auto& f : features) pts.push_back(to_point(f));
    return pts;
}

inline std::string dimension_name(std::size_t d) {
    if (d == 0) return "0 (h_time)";
    if (d == 1) return "1 (h_user)";
    return std::to_string(d);
}

/// Per-dimension z-scoring with population (1/n) moments of the training set.
class Standardizer {
public:
    Standardizer() = default;
    Standardizer(std::vector<double> mean, std::vector<double> stddev) : mean_(std::move(mean)), std_(std::move(stddev)) {
        if (mean_.size() != std_.size()) throw Error("standardizer mean/std dimension mismatch");
        for (std::size_t d = 0; d < std_.size(); ++d) {
            if (!(std_[d] > 0.0)) throw Error("standardizer std must be positive in dimension " + dimension_name(d));
        }
    }

    static Standardizer fit(std::span<const Point> points) {
        if (points.size() < 2) throw Error("standardizer needs at least 2 points");
        const std::size_t dims = points.front().size();
        const double n = static_cast<double>(points.size());
        std::vector<double> mean(dims, 0.0), stddev(dims, 0.0);
        for (const auto& p : points) {
            if (p.size() != dims) throw Error("inconsistent point dimension");
            for (std::size_t d = 0; d < dims; ++d) mean[d] += p[d];
        }
        for (auto& m : mean) m /= n;
        for (const auto& p : points) {
            for (std::size_t d = 0; d < dims; ++d) stddev[d] += (p[d] - mean[d]) * (p[d] - mean[d]);
        }
        for (std::size_t d = 0; d < dims; ++d) {
            stddev[d] = std::sqrt(stddev[d] / n);
            if (!(stddev[d] > 0.0)) throw Error("zero variance in feature dimension " + dimension_name(d));
        }
        return Standardizer(std::move(mean), std::move(stddev));
    }

    Point apply(const Point& p) const {
        if (p.size() != mean_.size()) throw Error("point dimension does not match standardizer");
        Point out(p.size());
        for (std::size_t d = 0; d < p.size(); ++d) out[d] = (p[d] - mean_[d]) / std_[d];
        return out;
    }

    std::vector<Point> apply(std::span<const Point> points) const {
        std::vector<Point> out;
        out.reserve(points.size());
        for (const auto& p : points) out.push_back(apply(p));
        return out;
    }

    const std::vector<double>& mean() const noexcept { return mean_; }
    const std::vector<double>& stddev() const noexcept { return std_; }
    std::size_t dimensions() const noexcept { return mean_.size(); }

private:
    std::vector<double> mean_;
    std::vector<double> std_;
};

inline double squared_distance(const Point& a, const Point& b) {
    double s = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
    return s;
}

}  // namespace retrace
