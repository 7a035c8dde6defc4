#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <ostream>
#include <vector>

#include "harsel/error.hpp"
#include "harsel/matrix.hpp"

namespace harsel {

struct Neighbor {
    std::size_t index;
    double similarity;

    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Directed kNN lists plus their reciprocated (mutual) subset, over the rows
/// of one class. Neighbour lists are ordered by descending similarity, ties
/// by ascending index. Zero-norm rows neither have nor are neighbours.
struct SimilarityGraph {
    std::size_t k = 0;
    std::vector<std::vector<Neighbor>> knn;
    std::vector<std::vector<Neighbor>> mutual;

    std::size_t size() const noexcept { return knn.size(); }

    bool has_knn_edge(std::size_t from, std::size_t to) const {
        for (const auto& n : knn[from])
            if (n.index == to) return true;
        return false;
    }

    std::size_t mutual_edge_count() const {
        std::size_t e = 0;
        for (const auto& adj : mutual) e += adj.size();
        return e / 2;
    }
};

/// Builds the cosine kNN graph over the rows of `rows` and keeps an
/// undirected edge (u, v) iff each endpoint lists the other. The effective
/// neighbour count is min(k, n - 1).
inline SimilarityGraph build_mutual_knn(const Matrix& rows, std::size_t k = 10) {
    if (k < 1) throw ArgumentError("build_mutual_knn: k must be >= 1");
    const std::size_t n = rows.rows();
    SimilarityGraph g;
    g.k = n > 1 ? std::min(k, n - 1) : 0;
    g.knn.assign(n, {});
    g.mutual.assign(n, {});
    if (n < 2) return g;

    std::vector<bool> nonzero;
    const Matrix unit = normalize_rows(rows, &nonzero);
    std::vector<Neighbor> cand;
    for (std::size_t i = 0; i < n; ++i) {
        if (!nonzero[i]) continue;
        cand.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i || !nonzero[j]) continue;
            cand.push_back({j, std::clamp(dot(unit.row(i), unit.row(j)), -1.0, 1.0)});
        }
        const std::size_t take = std::min(g.k, cand.size());
        auto better = [](const Neighbor& a, const Neighbor& b) {
            if (a.similarity != b.similarity) return a.similarity > b.similarity;
            return a.index < b.index;
        };
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take),
                          cand.end(), better);
        g.knn[i].assign(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take));
    }
    for (std::size_t u = 0; u < n; ++u) {
        for (const auto& nb : g.knn[u]) {
            if (nb.index > u && g.has_knn_edge(nb.index, u)) {
                g.mutual[u].push_back(nb);
                g.mutual[nb.index].push_back({u, nb.similarity});
            }
        }
    }
    for (auto& adj : g.mutual)
        std::sort(adj.begin(), adj.end(),
                  [](const Neighbor& a, const Neighbor& b) { return a.index < b.index; });
    return g;
}

struct PageRankOptions {
    double damping = 0.85;
    double tol = 1e-10;
    int max_iter = 200;
};

struct PageRankResult {
    std::vector<double> scores;
    int iterations = 0;
    /// False when max_iter was reached before the L1 change fell below tol.
    bool converged = true;
};

/// Weighted PageRank on the mutual graph. Transition weights are the edge
/// similarities floored at 0 and row-normalized; nodes with no positive
/// out-weight are dangling and redistribute uniformly; teleport is uniform.
inline PageRankResult pagerank(const SimilarityGraph& g, const PageRankOptions& opt = {}) {
    const std::size_t n = g.size();
    PageRankResult res;
    if (n == 0) return res;
    const double nd = static_cast<double>(n);

    std::vector<double> out_weight(n, 0.0);
    for (std::size_t u = 0; u < n; ++u)
        for (const auto& e : g.mutual[u]) out_weight[u] += std::max(0.0, e.similarity);

    std::vector<double> x(n, 1.0 / nd), next(n);
    res.converged = false;
    for (int it = 1; it <= opt.max_iter; ++it) {
        double dangling = 0.0;
        for (std::size_t u = 0; u < n; ++u)
            if (out_weight[u] <= 0.0) dangling += x[u];
        const double base = (1.0 - opt.damping) / nd + opt.damping * dangling / nd;
        std::fill(next.begin(), next.end(), base);
        for (std::size_t u = 0; u < n; ++u) {
            if (out_weight[u] <= 0.0) continue;
            const double share = opt.damping * x[u] / out_weight[u];
            for (const auto& e : g.mutual[u])
                if (e.similarity > 0.0) next[e.index] += share * e.similarity;
        }
        double delta = 0.0;
        for (std::size_t i = 0; i < n; ++i) delta += std::abs(next[i] - x[i]);
        x.swap(next);
        res.iterations = it;
        if (delta < opt.tol) {
            res.converged = true;
            break;
        }
    }
    // Remove accumulated rounding drift so the vector sums to 1.
    const double total = std::accumulate(x.begin(), x.end(), 0.0);
    for (double& v : x) v /= total;
    res.scores = std::move(x);
    return res;
}

/// H(i) = number of directed kNN lists containing i.
inline std::vector<double> hubness(const SimilarityGraph& g) {
    std::vector<double> h(g.size(), 0.0);
    for (const auto& list : g.knn)
        for (const auto& nb : list) h[nb.index] += 1.0;
    return h;
}

/// Mutual edges as `src,dst,weight` (each undirected edge once, src < dst).
inline void write_edges_csv(std::ostream& os, const SimilarityGraph& g) {
    os << "src,dst,weight\n";
    for (std::size_t u = 0; u < g.size(); ++u)
        for (const auto& e : g.mutual[u])
            if (u < e.index) os << u << ',' << e.index << ',' << e.similarity << '\n';
}

}  // namespace harsel
