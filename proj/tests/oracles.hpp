#pragma once

// Independent reference computations used only by the tests. Nothing here
// calls into the library's numeric code paths.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

/// Entropy (bits) of a multiset of keys via sort-and-count in long double,
/// using H = log2 N - (1/N) sum n log2 n.
template <typename T>
long double entropy_of_multiset(std::vector<T> values) {
    if (values.empty()) return 0.0L;
    std::sort(values.begin(), values.end());
    const long double n = static_cast<long double>(values.size());
    long double acc = 0.0L;
    for (std::size_t lo = 0; lo < values.size();) {
        std::size_t hi = lo;
        while (hi < values.size() && values[hi] == values[lo]) ++hi;
        const long double c = static_cast<long double>(hi - lo);
        acc += c * std::log2(c);
        lo = hi;
    }
    const long double h = std::log2(n) - acc / n;
    return h < 0.0L ? 0.0L : h;
}

/// Gap histogram by brute force: for every candidate gap, count matches.
inline std::map<std::int64_t, std::size_t> gap_histogram(const std::vector<std::int64_t>& sorted_ts) {
    std::vector<std::int64_t> gaps;
    for (std::size_t i = 1; i < sorted_ts.size(); ++i) gaps.push_back(sorted_ts[i] - sorted_ts[i - 1]);
    std::map<std::int64_t, std::size_t> hist;
    for (std::int64_t g : gaps) {
        if (hist.contains(g)) continue;
        hist[g] = static_cast<std::size_t>(std::count(gaps.begin(), gaps.end(), g));
    }
    return hist;
}

/// All training indices sorted fully by (squared distance, index); first k returned.
inline std::vector<std::size_t> nearest(const std::vector<std::vector<double>>& train, const std::vector<double>& q,
                                        std::size_t k) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t i = 0; i < train.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < q.size(); ++j) s += (train[i][j] - q[j]) * (train[i][j] - q[j]);
        d.emplace_back(s, i);
    }
    std::sort(d.begin(), d.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < k && i < d.size(); ++i) out.push_back(d[i].second);
    return out;
}

/// O(n^2) AUC: fraction of (positive, negative) pairs ordered correctly, ties 1/2.
inline double auc_all_pairs(const std::vector<double>& s, const std::vector<bool>& pos) {
    double wins = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!pos[i]) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (pos[j]) continue;
            ++pairs;
            if (s[i] > s[j]) wins += 1.0;
            else if (s[i] == s[j]) wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

/// Direct (non-log) diagonal Gaussian density.
inline double gaussian_density(const std::vector<double>& x, const std::vector<double>& mean,
                               const std::vector<double>& var) {
    double p = 1.0;
    for (std::size_t d = 0; d < x.size(); ++d) {
        const double z = x[d] - mean[d];
        p *= std::exp(-z * z / (2.0 * var[d])) / std::sqrt(2.0 * std::numbers::pi * var[d]);
    }
    return p;
}

/// Dense linear solve by Gaussian elimination with partial pivoting.
/// Returns false when the system is (numerically) singular.
inline bool solve(std::vector<std::vector<double>> a, std::vector<double> b, std::vector<double>& x) {
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r) {
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        }
        if (std::abs(a[piv][c]) < 1e-12) return false;
        std::swap(a[piv], a[c]);
        std::swap(b[piv], b[c]);
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
            b[r] -= f * b[c];
        }
    }
    x.assign(n, 0.0);
    for (std::size_t r = n; r-- > 0;) {
        double s = b[r];
        for (std::size_t k = r + 1; k < n; ++k) s -= a[r][k] * x[k];
        x[r] = s / a[r][r];
    }
    return true;
}

/// Exhaustive active-set search for the SVM dual
///   max W(a) = sum a - 1/2 a'Qa  s.t. y'a = 0, 0 <= a <= C.
/// Every split of indices into {at 0, at C, free} is tried; the free block is
/// solved from its stationarity + equality system and kept if feasible. The
/// convex optimum's own split is among them, so the best feasible value is the
/// optimum. Intended for n <= 8 (3^8 = 6561 splits).
inline double svm_dual_optimum(const std::vector<std::vector<double>>& x, const std::vector<int>& y, double C,
                               double gamma) {
    const std::size_t n = x.size();
    std::vector<std::vector<double>> q(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double d2 = 0.0;
            for (std::size_t t = 0; t < x[i].size(); ++t) d2 += (x[i][t] - x[j][t]) * (x[i][t] - x[j][t]);
            q[i][j] = y[i] * y[j] * std::exp(-gamma * d2);
        }
    }
    const auto objective = [&](const std::vector<double>& a) {
        double w = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            w += a[i];
            for (std::size_t j = 0; j < n; ++j) w -= 0.5 * a[i] * a[j] * q[i][j];
        }
        return w;
    };
    std::size_t splits = 1;
    for (std::size_t i = 0; i < n; ++i) splits *= 3;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t code = 0; code < splits; ++code) {
        std::vector<int> state(n);  // 0: at zero, 1: at C, 2: free
        std::size_t c = code;
        for (std::size_t i = 0; i < n; ++i) {
            state[i] = static_cast<int>(c % 3);
            c /= 3;
        }
        std::vector<double> a(n, 0.0);
        std::vector<std::size_t> fr;
        for (std::size_t i = 0; i < n; ++i) {
            if (state[i] == 1) a[i] = C;
            if (state[i] == 2) fr.push_back(i);
        }
        if (fr.empty()) {
            double eq = 0.0;
            for (std::size_t i = 0; i < n; ++i) eq += y[i] * a[i];
            if (std::abs(eq) < 1e-9) best = std::max(best, objective(a));
            continue;
        }
        // [Q_FF  y_F] [a_F]   [1 - Q_FB a_B]
        // [y_F'   0 ] [ nu] = [  -y_B' a_B ]
        const std::size_t m = fr.size();
        std::vector<std::vector<double>> sys(m + 1, std::vector<double>(m + 1, 0.0));
        std::vector<double> rhs(m + 1, 0.0);
        for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t s = 0; s < m; ++s) sys[r][s] = q[fr[r]][fr[s]];
            sys[r][m] = y[fr[r]];
            sys[m][r] = y[fr[r]];
            rhs[r] = 1.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (state[j] == 1) rhs[r] -= q[fr[r]][j] * a[j];
            }
        }
        for (std::size_t j = 0; j < n; ++j) {
            if (state[j] == 1) rhs[m] -= y[j] * a[j];
        }
        std::vector<double> sol;
        if (!solve(sys, rhs, sol)) continue;
        bool feasible = true;
        for (std::size_t r = 0; r < m; ++r) {
            if (sol[r] < -1e-10 || sol[r] > C + 1e-10) feasible = false;
            a[fr[r]] = std::clamp(sol[r], 0.0, C);
        }
        if (feasible) best = std::max(best, objective(a));
    }
    return best;
}

}  // namespace oracle
