#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "retrace/error.hpp"
#include "retrace/parallel.hpp"
#include "retrace/standardizer.hpp"

namespace retrace {

inline constexpr double kVarianceFloor = 1e-6;

/// Diagonal-covariance Gaussian component.
struct GmmComponent {
    double weight = 1.0;
    std::vector<double> mean;
    std::vector<double> variance;
};

struct GmmModel {
    std::vector<GmmComponent> components;
    double log_likelihood = -std::numeric_limits<double>::infinity();  // total over the fit points
    std::size_t iterations = 0;
    std::vector<double> log_likelihood_trace;  // one entry per E-step, in order

    std::size_t k() const noexcept { return components.size(); }
};

struct EmOptions {
    std::size_t max_iter = 200;
    double ll_tol = 1e-6;
    std::size_t kmeans_iterations = 10;
    std::size_t kmeans_restarts = 10;
};

namespace detail {

inline double log_gaussian_diag(const Point& x, const GmmComponent& c) {
    double s = 0.0;
    for (std::size_t d = 0; d < x.size(); ++d) {
        const double diff = x[d] - c.mean[d];
        s += std::log(2.0 * std::numbers::pi * c.variance[d]) + diff * diff / c.variance[d];
    }
    return -0.5 * s;
}

/// log sum_c pi_c N(x | c); fills `log_joint` with log pi_c + log N(x | c).
inline double log_mixture_density(const Point& x, const GmmModel& m, std::vector<double>& log_joint) {
    log_joint.resize(m.k());
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < m.k(); ++c) {
        log_joint[c] = std::log(m.components[c].weight) + log_gaussian_diag(x, m.components[c]);
        top = std::max(top, log_joint[c]);
    }
    if (!std::isfinite(top)) return top;
    double s = 0.0;
    for (double v : log_joint) s += std::exp(v - top);
    return top + std::log(s);
}

inline void check_points(std::span<const Point> points) {
    if (points.empty()) throw Error("GMM needs at least one point");
    const auto dims = points.front().size();
    if (dims == 0) throw Error("GMM points must have at least one dimension");
    for (const auto& p : points) {
        if (p.size() != dims) throw Error("inconsistent point dimension");
    }
}

/// Per-dimension population variance, floored.
inline std::vector<double> floored_variance(std::span<const Point> points) {
    const auto dims = points.front().size();
    std::vector<double> mean(dims, 0.0), var(dims, 0.0);
    for (const auto& p : points) {
        for (std::size_t d = 0; d < dims; ++d) mean[d] += p[d];
    }
    for (auto& v : mean) v /= static_cast<double>(points.size());
    for (const auto& p : points) {
        for (std::size_t d = 0; d < dims; ++d) var[d] += (p[d] - mean[d]) * (p[d] - mean[d]);
    }
    for (auto& v : var) v = std::max(v / static_cast<double>(points.size()), kVarianceFloor);
    return var;
}

}  // namespace detail

namespace detail {

struct KmeansRun {
    std::vector<Point> centers;
    std::vector<std::size_t> assign;
    double inertia = 0.0;
};

inline KmeansRun kmeans_once(std::span<const Point> points, std::size_t k, std::mt19937_64& rng, std::size_t iterations) {
    const std::size_t n = points.size();
    const std::size_t dims = points.front().size();
    KmeansRun run;
    auto& centers = run.centers;
    centers.push_back(points[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    while (centers.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], squared_distance(points[i], centers.back()));
            total += d2[i];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            double r = std::uniform_real_distribution<double>(0.0, total)(rng);
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                r -= d2[i];
                if (r < 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
        }
        centers.push_back(points[pick]);
    }

    auto& assign = run.assign;
    assign.assign(n, 0);
    for (std::size_t it = 0; it <= iterations; ++it) {
        run.inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double d = squared_distance(points[i], centers[c]);
                if (d < best) {
                    best = d;
                    assign[i] = c;
                }
            }
            run.inertia += best;
        }
        if (it == iterations) break;
        std::vector<Point> sums(k, Point(dims, 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++counts[assign[i]];
            for (std::size_t d = 0; d < dims; ++d) sums[assign[i]][d] += points[i][d];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            for (std::size_t d = 0; d < dims; ++d) centers[c][d] = sums[c][d] / static_cast<double>(counts[c]);
        }
    }
    return run;
}

}  // namespace detail

/// Seeded k-means (k-means++ seeding, then Lloyd iterations; the lowest-inertia
/// of `restarts` runs is kept) followed by moment matching of each cluster.
/// Empty or singleton clusters fall back to the global variance.
inline GmmModel kmeans_initialization(std::span<const Point> points, std::size_t k, std::uint64_t seed,
                                      std::size_t iterations = 10, std::size_t restarts = 10) {
    detail::check_points(points);
    if (k < 1) throw Error("GMM needs k >= 1");
    if (k > points.size()) {
        throw Error("GMM k=" + std::to_string(k) + " exceeds point count " + std::to_string(points.size()));
    }
    const std::size_t n = points.size();
    const std::size_t dims = points.front().size();
    std::mt19937_64 rng(seed);
    auto best_run = detail::kmeans_once(points, k, rng, iterations);
    for (std::size_t r = 1; r < restarts; ++r) {
        auto run = detail::kmeans_once(points, k, rng, iterations);
        if (run.inertia < best_run.inertia) best_run = std::move(run);
    }
    const auto& centers = best_run.centers;
    const auto& assign = best_run.assign;

    const auto global_var = detail::floored_variance(points);
    GmmModel model;
    model.components.resize(k);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) ++counts[assign[i]];
    for (std::size_t c = 0; c < k; ++c) {
        auto& comp = model.components[c];
        // Empty clusters keep a small share so every component stays alive.
        comp.weight = std::max<double>(static_cast<double>(counts[c]), 0.5) / static_cast<double>(n);
        comp.mean = centers[c];
        comp.variance = global_var;
        if (counts[c] < 2) continue;
        std::vector<double> var(dims, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (assign[i] != c) continue;
            for (std::size_t d = 0; d < dims; ++d) var[d] += (points[i][d] - comp.mean[d]) * (points[i][d] - comp.mean[d]);
        }
        for (std::size_t d = 0; d < dims; ++d) comp.variance[d] = std::max(var[d] / static_cast<double>(counts[c]), kVarianceFloor);
    }
    double wsum = 0.0;
    for (const auto& comp : model.components) wsum += comp.weight;
    for (auto& comp : model.components) comp.weight /= wsum;
    return model;
}

/// Total log-likelihood of `points` under `model`.
inline double log_likelihood(const GmmModel& model, std::span<const Point> points) {
    std::vector<double> scratch;
    double ll = 0.0;
    for (const auto& p : points) ll += detail::log_mixture_density(p, model, scratch);
    return ll;
}

/// EM from a given starting model. Stops when the log-likelihood gain drops
/// below ll_tol or after max_iter M-steps. Variances are floored at
/// kVarianceFloor, which is the constrained maximizer so ascent is preserved.
inline GmmModel em_fit_from(std::span<const Point> points, GmmModel model, const EmOptions& opt = {}) {
    detail::check_points(points);
    if (model.k() < 1) throw Error("GMM needs k >= 1");
    if (model.k() > points.size()) {
        throw Error("GMM k=" + std::to_string(model.k()) + " exceeds point count " + std::to_string(points.size()));
    }
    const std::size_t n = points.size();
    const std::size_t k = model.k();
    const std::size_t dims = points.front().size();
    std::vector<double> resp(n * k);
    std::vector<double> scratch;
    model.log_likelihood_trace.clear();

    double prev = -std::numeric_limits<double>::infinity();
    std::size_t iter = 0;
    while (true) {
        // E-step
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double lse = detail::log_mixture_density(points[i], model, scratch);
            ll += lse;
            for (std::size_t c = 0; c < k; ++c) resp[i * k + c] = std::exp(scratch[c] - lse);
        }
        model.log_likelihood_trace.push_back(ll);
        model.log_likelihood = ll;
        if (iter > 0 && ll - prev < opt.ll_tol) break;
        if (iter >= opt.max_iter) break;
        prev = ll;

        // M-step
        for (std::size_t c = 0; c < k; ++c) {
            double nk = 0.0;
            std::vector<double> mean(dims, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                const double r = resp[i * k + c];
                nk += r;
                for (std::size_t d = 0; d < dims; ++d) mean[d] += r * points[i][d];
            }
            auto& comp = model.components[c];
            if (nk <= 0.0) {
                // No support left: keep the component parameters, give it no weight mass.
                comp.weight = std::numeric_limits<double>::min();
                continue;
            }
            for (auto& m : mean) m /= nk;
            std::vector<double> var(dims, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                const double r = resp[i * k + c];
                for (std::size_t d = 0; d < dims; ++d) var[d] += r * (points[i][d] - mean[d]) * (points[i][d] - mean[d]);
            }
            for (auto& v : var) v = std::max(v / nk, kVarianceFloor);
            comp.weight = nk / static_cast<double>(n);
            comp.mean = std::move(mean);
            comp.variance = std::move(var);
        }
        double wsum = 0.0;
        for (const auto& comp : model.components) wsum += comp.weight;
        for (auto& comp : model.components) comp.weight /= wsum;
        ++iter;
    }
    model.iterations = iter;
    return model;
}

inline GmmModel em_fit(std::span<const Point> points, std::size_t k, std::uint64_t seed, const EmOptions& opt = {}) {
    return em_fit_from(points, kmeans_initialization(points, k, seed, opt.kmeans_iterations, opt.kmeans_restarts), opt);
}

struct GmmAssignment {
    std::vector<std::size_t> cluster;      // argmax responsibility, ties to the lowest id
    std::vector<double> responsibilities;  // row-major n x k
    std::size_t k = 0;

    double responsibility(std::size_t i, std::size_t c) const { return responsibilities[i * k + c]; }
    double top_responsibility(std::size_t i) const { return responsibility(i, cluster[i]); }
};

inline GmmAssignment em_assign(const GmmModel& model, std::span<const Point> points) {
    if (model.k() == 0) throw Error("GMM model is not fitted");
    GmmAssignment out;
    out.k = model.k();
    out.cluster.resize(points.size());
    out.responsibilities.resize(points.size() * out.k);
    std::vector<double> scratch;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double lse = detail::log_mixture_density(points[i], model, scratch);
        std::size_t best = 0;
        for (std::size_t c = 0; c < out.k; ++c) {
            out.responsibilities[i * out.k + c] = std::exp(scratch[c] - lse);
            if (scratch[c] > scratch[best]) best = c;
        }
        out.cluster[i] = best;
    }
    return out;
}

struct SelectKOptions {
    std::size_t k_max = 15;
    std::size_t folds = 10;
    bool scan_all = false;  // evaluate every k <= k_max and take the best instead of stopping early
    EmOptions em;
    std::size_t threads = 1;
};

struct SelectKResult {
    std::size_t best_k = 1;
    GmmModel model;
    std::vector<double> cv_scores;  // mean held-out log-likelihood per point, for k = 1, 2, ...
};

/// Mean held-out log-likelihood per point over `folds` random folds.
inline double cross_validated_log_likelihood(std::span<const Point> points, std::size_t k, std::size_t folds,
                                             std::uint64_t seed, const EmOptions& opt, std::size_t threads = 1) {
    const std::size_t n = points.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(seed, 0xF01D));
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<double> fold_scores(folds);
    parallel_for(folds, threads, [&](std::size_t f) {
        std::vector<Point> train, test;
        for (std::size_t r = 0; r < n; ++r) (r % folds == f ? test : train).push_back(points[order[r]]);
        if (train.size() < k) throw Error("fold training set smaller than k=" + std::to_string(k));
        const auto model = em_fit(train, k, derive_seed(seed, k * 1000 + f), opt);
        fold_scores[f] = log_likelihood(model, test) / static_cast<double>(test.size());
    });
    return std::accumulate(fold_scores.begin(), fold_scores.end(), 0.0) / static_cast<double>(folds);
}

/// Greedy cross-validated choice of k: starting at 1, keep increasing k while the
/// held-out likelihood improves; the last improving k is refit on all points.
inline SelectKResult em_select_k(std::span<const Point> points, std::uint64_t seed, const SelectKOptions& opt = {}) {
    detail::check_points(points);
    if (opt.folds < 2) throw Error("k selection needs at least 2 folds");
    if (points.size() < opt.folds) throw Error("k selection needs at least as many points as folds");
    if (opt.k_max < 1) throw Error("k_max must be >= 1");

    SelectKResult out;
    double best = -std::numeric_limits<double>::infinity();
    const std::size_t min_train = points.size() - (points.size() + opt.folds - 1) / opt.folds;
    for (std::size_t k = 1; k <= opt.k_max && k <= min_train; ++k) {
        const double score = cross_validated_log_likelihood(points, k, opt.folds, seed, opt.em, opt.threads);
        out.cv_scores.push_back(score);
        if (score > best) {
            best = score;
            out.best_k = k;
        } else if (!opt.scan_all) {
            break;
        }
    }
    out.model = em_fit(points, out.best_k, derive_seed(seed, 0xA11), opt.em);
    return out;
}

}  // namespace retrace
