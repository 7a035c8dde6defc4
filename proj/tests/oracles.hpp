#pragma once

// Brute-force reference implementations used by the unit tests and the
// acceptance runner. They deliberately avoid the library's helpers.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "harsel/activity.hpp"
#include "harsel/knowledge.hpp"
#include "harsel/matrix.hpp"

namespace harsel::oracle {

using Rows = std::vector<std::vector<double>>;

inline Rows to_rows(const Matrix& m) {
    Rows out(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) out[r].assign(m.row(r).begin(), m.row(r).end());
    return out;
}

inline double cos_sim(const std::vector<double>& a, const std::vector<double>& b) {
    long double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += static_cast<long double>(a[i]) * b[i];
        aa += static_cast<long double>(a[i]) * a[i];
        bb += static_cast<long double>(b[i]) * b[i];
    }
    if (aa == 0 || bb == 0) return 0.0;
    return static_cast<double>(ab / std::sqrt(aa * bb));
}

/// T = w_y.x - max_{y' != y} c[y][y'] (w_y'.x), reading the prior maps directly.
inline double semantic_score(const std::vector<double>& x, Activity y, const KnowledgePrior& k,
                             const std::vector<std::string>& columns) {
    auto proj = [&](Activity l) {
        double s = 0.0;
        auto it = k.label_feature_weights.find(l);
        if (it == k.label_feature_weights.end()) return 0.0;
        for (std::size_t i = 0; i < columns.size(); ++i) {
            auto f = it->second.find(columns[i]);
            if (f != it->second.end()) s += f->second * x[i];
        }
        return s;
    };
    double best = -1e300;
    for (Activity o : kAllActivities) {
        if (o == y) continue;
        double c = 0.0;
        if (auto r = k.confusability.find(y); r != k.confusability.end())
            if (auto e = r->second.find(o); e != r->second.end()) c = e->second;
        best = std::max(best, c * proj(o));
    }
    return proj(y) - best;
}

/// Mean cosine to same-label validation rows minus mean cosine to the rest.
inline double margin(const std::vector<double>& x, const Rows& val, const std::vector<Activity>& labels,
                     Activity y) {
    double pos = 0, neg = 0;
    int np = 0, nn = 0;
    for (std::size_t j = 0; j < val.size(); ++j) {
        const double s = cos_sim(x, val[j]);
        if (labels[j] == y) {
            pos += s;
            ++np;
        } else {
            neg += s;
            ++nn;
        }
    }
    if (np == 0) return -neg / nn;
    if (nn == 0) return pos / np;
    return pos / np - neg / nn;
}

/// F(S) = sum_x max_{s in S} sim(x, s); F(empty) = 0.
inline double facility(const Rows& rows, const std::vector<std::size_t>& s) {
    if (s.empty()) return 0.0;
    double total = 0.0;
    for (const auto& x : rows) {
        double best = -1e300;
        for (std::size_t j : s) {
            best = std::max(best, std::clamp(cos_sim(x, rows[j]), -1.0, 1.0));
        }
        total += best;
    }
    return total;
}

/// Best F over all subsets of size exactly `budget`.
inline double facility_optimum(const Rows& rows, std::size_t budget) {
    const std::size_t n = rows.size();
    double best = -1e300;
    std::vector<std::size_t> pick;
    std::function<void(std::size_t)> rec = [&](std::size_t start) {
        if (pick.size() == budget) {
            best = std::max(best, facility(rows, pick));
            return;
        }
        for (std::size_t i = start; i < n; ++i) {
            pick.push_back(i);
            rec(i + 1);
            pick.pop_back();
        }
    };
    rec(0);
    return best;
}

/// Per-class precision/recall F1, 0 where undefined, averaged over six labels.
inline double macro_f1(const std::vector<Activity>& t, const std::vector<Activity>& p) {
    double sum = 0.0;
    for (Activity a : kAllActivities) {
        double tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (p[i] == a && t[i] == a) tp += 1;
            else if (p[i] == a) fp += 1;
            else if (t[i] == a) fn += 1;
        }
        const double prec = tp + fp > 0 ? tp / (tp + fp) : 0.0;
        const double rec = tp + fn > 0 ? tp / (tp + fn) : 0.0;
        sum += prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
    }
    return sum / 6.0;
}

/// Directed kNN lists by full sort (desc similarity, asc index), skipping
/// zero rows.
inline std::vector<std::vector<std::size_t>> knn_lists(const Rows& rows, std::size_t k) {
    const std::size_t n = rows.size();
    const std::size_t kk = n > 1 ? std::min(k, n - 1) : 0;
    auto zero = [&](std::size_t i) {
        double s = 0;
        for (double v : rows[i]) s += v * v;
        return std::sqrt(s) < 1e-12;
    };
    std::vector<std::vector<std::size_t>> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (zero(i)) continue;
        std::vector<std::pair<double, std::size_t>> c;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i && !zero(j)) c.push_back({std::clamp(cos_sim(rows[i], rows[j]), -1.0, 1.0), j});
        std::sort(c.begin(), c.end(), [](auto& a, auto& b) {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        for (std::size_t m = 0; m < std::min(kk, c.size()); ++m) out[i].push_back(c[m].second);
    }
    return out;
}

inline std::vector<double> hubness(const Rows& rows, std::size_t k) {
    std::vector<double> h(rows.size(), 0.0);
    for (const auto& l : knn_lists(rows, k))
        for (std::size_t j : l) h[j] += 1;
    return h;
}

/// Solves x = d * M^T x + (1 - d)/n by Gaussian elimination, where M is the
/// row-normalized nonnegative weight matrix with dangling rows uniform.
inline std::vector<double> pagerank_dense(const std::vector<std::vector<double>>& w, double d) {
    const std::size_t n = w.size();
    std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
    for (std::size_t u = 0; u < n; ++u) {
        double s = 0;
        for (std::size_t v = 0; v < n; ++v) s += std::max(0.0, w[u][v]);
        for (std::size_t v = 0; v < n; ++v) m[u][v] = s > 0 ? std::max(0.0, w[u][v]) / s : 1.0 / n;
    }
    // A = I - d M^T, b = (1-d)/n
    std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) a[i][j] = (i == j ? 1.0 : 0.0) - d * m[j][i];
        a[i][n] = (1.0 - d) / n;
    }
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        std::swap(a[c], a[piv]);
        for (std::size_t r = 0; r < n; ++r) {
            if (r == c) continue;
            const double f = a[r][c] / a[c][c];
            for (std::size_t j = c; j <= n; ++j) a[r][j] -= f * a[c][j];
        }
    }
    std::vector<double> x(n);
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = a[i][n] / a[i][i];
        s += x[i];
    }
    for (double& v : x) v /= s;
    return x;
}

/// Naive O(N^2) DFT.
inline std::vector<std::complex<double>> dft(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> s = 0;
        for (std::size_t t = 0; t < n; ++t)
            s += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * t) / n);
        out[k] = s;
    }
    return out;
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix, sorted descending.
inline std::vector<double> jacobi_eigenvalues(std::vector<std::vector<double>> a) {
    const std::size_t n = a.size();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a[i][j] * a[i][j];
        if (off < 1e-24) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a[p][q]) < 1e-300) continue;
                const double theta = (a[q][q] - a[p][p]) / (2 * a[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
                const double c = 1 / std::sqrt(t * t + 1), s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
    }
    std::vector<double> ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = a[i][i];
    std::sort(ev.rbegin(), ev.rend());
    return ev;
}

}  // namespace harsel::oracle
