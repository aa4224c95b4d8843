#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "retrace/activity_class.hpp"
#include "retrace/error.hpp"
#include "retrace/knn.hpp"
#include "retrace/parallel.hpp"
#include "retrace/standardizer.hpp"

namespace retrace {

/// K(x, z) = exp(-gamma * |x - z|^2)
struct RbfKernel {
    double gamma = 0.5;

    double operator()(const Point& x, const Point& z) const { return std::exp(-gamma * squared_distance(x, z)); }
};

struct SmoOptions {
    double C = 1.0;
    double gamma = 0.5;
    double tol = 1e-3;
    std::size_t max_iterations = 0;  // 0 picks max(100000, 100 n)
};

/// Dual solution of one binary soft-margin problem over all training points.
struct SmoSolution {
    std::vector<double> alpha;  // in [0, C]
    double bias = 0.0;          // f(x) = sum_i alpha_i y_i K(x_i, x) + bias
    std::size_t iterations = 0;
    double dual_objective = 0.0;  // sum alpha - 1/2 alpha' Q alpha (maximized)
    double final_gap = 0.0;       // max KKT violation pair gap at exit
};

/// Compact decision function keeping only the support vectors.
struct BinarySvm {
    double gamma = 0.5;
    std::vector<Point> support_vectors;
    std::vector<double> coef;  // alpha_i * y_i
    double bias = 0.0;

    double decision(const Point& x) const {
        const RbfKernel kernel{gamma};
        double f = bias;
        for (std::size_t i = 0; i < support_vectors.size(); ++i) f += coef[i] * kernel(support_vectors[i], x);
        return f;
    }
};

namespace detail {

inline std::vector<double> kernel_matrix(std::span<const Point> x, const RbfKernel& kernel) {
    const std::size_t n = x.size();
    std::vector<double> k(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        k[i * n + i] = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) k[i * n + j] = k[j * n + i] = kernel(x[i], x[j]);
    }
    return k;
}

}  // namespace detail

/// Solves min 1/2 a'Qa - e'a s.t. y'a = 0, 0 <= a <= C with Q_ij = y_i y_j K_ij.
/// Working pairs come from second-order maximal-violating-pair selection; the
/// loop exits once the KKT gap m(a) - M(a) falls below tol.
inline SmoSolution smo_train(std::span<const Point> x, std::span<const int> y, const SmoOptions& opt) {
    const std::size_t n = x.size();
    if (n != y.size()) throw Error("SMO points/labels size mismatch");
    if (!(opt.C > 0.0)) throw Error("SMO requires C > 0");
    if (!(opt.gamma > 0.0)) throw Error("SMO requires gamma > 0");
    if (!(opt.tol > 0.0)) throw Error("SMO requires tol > 0");
    bool has_pos = false, has_neg = false;
    for (int v : y) {
        if (v == 1) has_pos = true;
        else if (v == -1) has_neg = true;
        else throw Error("SMO labels must be +1 or -1");
    }
    if (!has_pos || !has_neg) throw Error("SMO needs both classes present");

    constexpr double kTau = 1e-12;
    const double C = opt.C;
    const auto K = detail::kernel_matrix(x, RbfKernel{opt.gamma});
    const auto q = [&](std::size_t i, std::size_t j) { return static_cast<double>(y[i] * y[j]) * K[i * n + j]; };

    std::vector<double> alpha(n, 0.0);
    std::vector<double> grad(n, -1.0);  // Q alpha - e
    const std::size_t max_iter = opt.max_iterations ? opt.max_iterations : std::max<std::size_t>(100000, 100 * n);

    const auto in_up = [&](std::size_t t) { return (y[t] == 1 && alpha[t] < C) || (y[t] == -1 && alpha[t] > 0.0); };
    const auto in_low = [&](std::size_t t) { return (y[t] == 1 && alpha[t] > 0.0) || (y[t] == -1 && alpha[t] < C); };

    std::size_t iter = 0;
    double gap = std::numeric_limits<double>::infinity();
    for (;; ++iter) {
        // i: maximal -y_t G_t over I_up.
        double g_max = -std::numeric_limits<double>::infinity();
        std::size_t i = n;
        for (std::size_t t = 0; t < n; ++t) {
            if (!in_up(t)) continue;
            const double v = -static_cast<double>(y[t]) * grad[t];
            if (v >= g_max) {
                g_max = v;
                i = t;
            }
        }
        // j: best second-order objective decrease over I_low with a violation.
        double g_max2 = -std::numeric_limits<double>::infinity();
        double best_obj = std::numeric_limits<double>::infinity();
        std::size_t j = n;
        for (std::size_t t = 0; t < n && i < n; ++t) {
            if (!in_low(t)) continue;
            const double v = static_cast<double>(y[t]) * grad[t];  // = -(-y_t G_t)
            g_max2 = std::max(g_max2, v);
            const double grad_diff = g_max + v;
            if (grad_diff > 0.0) {
                double quad = K[i * n + i] + K[t * n + t] - 2.0 * K[i * n + t];
                if (quad <= 0.0) quad = kTau;
                const double obj = -(grad_diff * grad_diff) / quad;
                if (obj <= best_obj) {
                    best_obj = obj;
                    j = t;
                }
            }
        }
        gap = g_max + g_max2;
        if (i == n || j == n || gap < opt.tol) break;
        if (iter >= max_iter) {
            std::ostringstream msg;
            msg << "SMO did not converge after " << iter << " iterations (KKT gap " << gap << ", tol " << opt.tol
                << ", n " << n << ", C " << C << ", gamma " << opt.gamma << ")";
            throw Error(msg.str());
        }

        const double old_i = alpha[i], old_j = alpha[j];
        if (y[i] != y[j]) {
            double quad = K[i * n + i] + K[j * n + j] + 2.0 * q(i, j);
            if (quad <= 0.0) quad = kTau;
            const double delta = (-grad[i] - grad[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0.0) {
                if (alpha[j] < 0.0) {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if (alpha[i] < 0.0) {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if (diff > 0.0) {
                if (alpha[i] > C) {
                    alpha[i] = C;
                    alpha[j] = C - diff;
                }
            } else if (alpha[j] > C) {
                alpha[j] = C;
                alpha[i] = C + diff;
            }
        } else {
            double quad = K[i * n + i] + K[j * n + j] - 2.0 * q(i, j);
            if (quad <= 0.0) quad = kTau;
            const double delta = (grad[i] - grad[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > C) {
                if (alpha[i] > C) {
                    alpha[i] = C;
                    alpha[j] = sum - C;
                }
            } else if (alpha[j] < 0.0) {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if (sum > C) {
                if (alpha[j] > C) {
                    alpha[j] = C;
                    alpha[i] = sum - C;
                }
            } else if (alpha[i] < 0.0) {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        const double d_i = alpha[i] - old_i, d_j = alpha[j] - old_j;
        for (std::size_t t = 0; t < n; ++t) grad[t] += q(t, i) * d_i + q(t, j) * d_j;
    }

    // rho from free vectors, or the midpoint of the feasible interval when none are free.
    double upper = std::numeric_limits<double>::infinity();
    double lower = -std::numeric_limits<double>::infinity();
    double free_sum = 0.0;
    std::size_t n_free = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = static_cast<double>(y[t]) * grad[t];
        if (alpha[t] >= C) {
            if (y[t] == -1) upper = std::min(upper, yg);
            else lower = std::max(lower, yg);
        } else if (alpha[t] <= 0.0) {
            if (y[t] == 1) upper = std::min(upper, yg);
            else lower = std::max(lower, yg);
        } else {
            free_sum += yg;
            ++n_free;
        }
    }
    const double rho = n_free > 0 ? free_sum / static_cast<double>(n_free) : (upper + lower) / 2.0;

    SmoSolution sol;
    sol.bias = -rho;
    sol.iterations = iter;
    sol.final_gap = gap;
    // W(alpha) = sum alpha - 1/2 alpha'Q alpha = -1/2 sum alpha_i (G_i - 1)
    double w = 0.0;
    for (std::size_t t = 0; t < n; ++t) w -= 0.5 * alpha[t] * (grad[t] - 1.0);
    sol.dual_objective = w;
    sol.alpha = std::move(alpha);
    return sol;
}

inline BinarySvm make_binary_svm(std::span<const Point> x, std::span<const int> y, const SmoSolution& sol, double gamma) {
    BinarySvm m;
    m.gamma = gamma;
    m.bias = sol.bias;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (sol.alpha[i] > 0.0) {
            m.support_vectors.push_back(x[i]);
            m.coef.push_back(sol.alpha[i] * static_cast<double>(y[i]));
        }
    }
    return m;
}

/// One-vs-one machine separating `positive` (+1) from `negative` (-1).
struct PairwiseMachine {
    ActivityClass positive;
    ActivityClass negative;
    BinarySvm svm;
};

struct SvmModel {
    double C = 1.0;
    double gamma = 0.5;
    std::vector<ActivityClass> classes;  // classes present at training time, in class order
    std::vector<PairwiseMachine> machines;
};

/// Trains one machine per pair of classes present in `labels`.
inline SvmModel train_svm(std::span<const Point> points, std::span<const ActivityClass> labels, const SmoOptions& opt,
                          std::size_t threads = 1) {
    if (points.size() != labels.size()) throw Error("SVM points/labels size mismatch");
    std::array<std::vector<std::size_t>, kNumClasses> members;
    for (std::size_t i = 0; i < labels.size(); ++i) members[class_index(labels[i])].push_back(i);

    SvmModel model;
    model.C = opt.C;
    model.gamma = opt.gamma;
    for (ActivityClass c : kAllClasses) {
        if (!members[class_index(c)].empty()) model.classes.push_back(c);
    }
    if (model.classes.size() < 2) throw Error("SVM needs at least two classes in the training data");

    std::vector<std::pair<ActivityClass, ActivityClass>> pairs;
    for (std::size_t a = 0; a < model.classes.size(); ++a) {
        for (std::size_t b = a + 1; b < model.classes.size(); ++b) pairs.emplace_back(model.classes[a], model.classes[b]);
    }
    model.machines.resize(pairs.size());
    parallel_for(pairs.size(), threads, [&](std::size_t p) {
        const auto [pos, neg] = pairs[p];
        std::vector<Point> x;
        std::vector<int> y;
        for (std::size_t i : members[class_index(pos)]) {
            x.push_back(points[i]);
            y.push_back(1);
        }
        for (std::size_t i : members[class_index(neg)]) {
            x.push_back(points[i]);
            y.push_back(-1);
        }
        const auto sol = smo_train(x, y, opt);
        model.machines[p] = PairwiseMachine{pos, neg, make_binary_svm(x, y, sol, opt.gamma)};
    });
    return model;
}

/// One-vs-one voting. Vote ties go to the larger summed pairwise decision value,
/// then to the earlier class.
inline Prediction svm_predict(const SvmModel& model, const Point& x) {
    if (model.machines.empty()) throw Error("SVM model is not trained");
    std::array<std::size_t, kNumClasses> votes{};
    ClassScores margin{};
    for (const auto& m : model.machines) {
        const double f = m.svm.decision(x);
        margin[class_index(m.positive)] += f;
        margin[class_index(m.negative)] -= f;
        ++votes[class_index(f > 0.0 ? m.positive : m.negative)];
    }
    Prediction out;
    std::size_t best = class_index(model.classes.front());
    for (ActivityClass c : model.classes) {
        const auto i = class_index(c);
        if (votes[i] > votes[best] || (votes[i] == votes[best] && margin[i] > margin[best])) best = i;
    }
    const double per_class = static_cast<double>(model.classes.size() - 1);
    for (ActivityClass c : model.classes) {
        const auto i = class_index(c);
        out.scores[i] = static_cast<double>(votes[i]) / per_class;
        // Votes first; the margin only orders items with equal vote counts.
        out.ranking[i] = (static_cast<double>(votes[i]) + 0.4995 * (1.0 + std::tanh(margin[i] / per_class))) /
                         static_cast<double>(model.classes.size());
    }
    out.label = class_from_index(best);
    return out;
}

}  // namespace retrace
