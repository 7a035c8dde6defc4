#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "harsel/simgraph.hpp"
#include "harsel/util.hpp"
#include "oracles.hpp"

using namespace harsel;

namespace {

Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    Matrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
    return m;
}

Matrix random_rows(std::size_t n, std::size_t d, Rng& rng) {
    Matrix m(n, d);
    for (double& v : m.data()) v = rng.normal(0.0, 1.0);
    return m;
}

SimilarityGraph hand_graph(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                           double w = 1.0) {
    SimilarityGraph g;
    g.k = 1;
    g.knn.assign(n, {});
    g.mutual.assign(n, {});
    for (auto [a, b] : edges) {
        g.mutual[a].push_back({b, w});
        g.mutual[b].push_back({a, w});
    }
    return g;
}

std::vector<std::vector<double>> dense_weights(const SimilarityGraph& g) {
    std::vector<std::vector<double>> w(g.size(), std::vector<double>(g.size(), 0.0));
    for (std::size_t u = 0; u < g.size(); ++u)
        for (const auto& e : g.mutual[u]) w[u][e.index] = e.similarity;
    return w;
}

}  // namespace

TEST(MutualKnn, IdenticalVectorsTieByIndex) {
    const auto g = build_mutual_knn(from_rows({{1, 0}, {1, 0}, {1, 0}}), 1);
    EXPECT_EQ(g.knn[0][0].index, 1u);
    EXPECT_EQ(g.knn[1][0].index, 0u);
    EXPECT_EQ(g.knn[2][0].index, 0u);
    EXPECT_GE(g.mutual_edge_count(), 1u);
    ASSERT_EQ(g.mutual[0].size(), 1u);
    EXPECT_EQ(g.mutual[0][0].index, 1u);
}

TEST(MutualKnn, TwoTightPairs) {
    const auto g =
        build_mutual_knn(from_rows({{1, 0.01}, {1, -0.01}, {-0.01, 1}, {0.01, 1}}), 1);
    EXPECT_EQ(g.mutual_edge_count(), 2u);
    ASSERT_EQ(g.mutual[0].size(), 1u);
    EXPECT_EQ(g.mutual[0][0].index, 1u);
    ASSERT_EQ(g.mutual[2].size(), 1u);
    EXPECT_EQ(g.mutual[2][0].index, 3u);
}

TEST(MutualKnn, SaturatedKGivesCompleteGraph) {
    Rng rng(1);
    Matrix m = random_rows(7, 4, rng);
    for (std::size_t c = 0; c < 4; ++c) m(3, c) = 0.0;
    const auto g = build_mutual_knn(m, 50);
    EXPECT_EQ(g.k, 6u);
    EXPECT_EQ(g.mutual_edge_count(), 15u);  // complete on the 6 nonzero rows
    EXPECT_TRUE(g.mutual[3].empty());
    EXPECT_TRUE(g.knn[3].empty());
}

TEST(MutualKnn, DegenerateSizes) {
    EXPECT_EQ(build_mutual_knn(Matrix(0, 3)).size(), 0u);
    const auto one = build_mutual_knn(from_rows({{1, 2}}));
    EXPECT_EQ(one.size(), 1u);
    EXPECT_TRUE(one.knn[0].empty());
    EXPECT_THROW(build_mutual_knn(from_rows({{1}, {2}}), 0), ArgumentError);
}

TEST(MutualKnn, RandomGraphsMatchOracleAndInvariants) {
    Rng rng(7);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 2 + rng.below(19);
        const std::size_t k = 1 + rng.below(6);
        const Matrix m = random_rows(n, 3 + rng.below(4), rng);
        const auto g = build_mutual_knn(m, k);
        const auto oracle = oracle::knn_lists(oracle::to_rows(m), k);
        std::size_t directed = 0;
        for (std::size_t i = 0; i < n; ++i) {
            ASSERT_EQ(g.knn[i].size(), oracle[i].size());
            for (std::size_t j = 0; j < oracle[i].size(); ++j) {
                EXPECT_EQ(g.knn[i][j].index, oracle[i][j]);
                EXPECT_GE(g.knn[i][j].similarity, -1.0);
                EXPECT_LE(g.knn[i][j].similarity, 1.0);
                EXPECT_NE(g.knn[i][j].index, i);
            }
            directed += g.knn[i].size();
            for (const auto& e : g.mutual[i]) {
                EXPECT_TRUE(g.has_knn_edge(i, e.index));
                EXPECT_TRUE(g.has_knn_edge(e.index, i));
            }
            for (const auto& e : g.knn[i])
                if (g.has_knn_edge(e.index, i)) {
                    bool found = false;
                    for (const auto& m2 : g.mutual[i]) found |= m2.index == e.index;
                    EXPECT_TRUE(found);
                }
        }
        const auto h = hubness(g);
        EXPECT_EQ(h, oracle::hubness(oracle::to_rows(m), k));
        EXPECT_DOUBLE_EQ(std::accumulate(h.begin(), h.end(), 0.0), static_cast<double>(directed));
    }
}

TEST(PageRank, CompleteGraphIsUniform) {
    const auto g = hand_graph(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});
    const auto r = pagerank(g);
    EXPECT_TRUE(r.converged);
    for (double v : r.scores) EXPECT_NEAR(v, 0.25, 1e-12);
}

TEST(PageRank, TwoNodeEdge) {
    const auto r = pagerank(hand_graph(2, {{0, 1}}));
    EXPECT_NEAR(r.scores[0], 0.5, 1e-12);
    EXPECT_NEAR(r.scores[1], 0.5, 1e-12);
}

TEST(PageRank, PathMatchesDenseOracle) {
    const auto g = hand_graph(3, {{0, 1}, {1, 2}});
    const auto r = pagerank(g);
    const auto o = oracle::pagerank_dense(dense_weights(g), 0.85);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(r.scores[i], o[i], 1e-9);
    EXPECT_GT(r.scores[1], r.scores[0]);
    EXPECT_NEAR(r.scores[0], r.scores[2], 1e-12);
}

TEST(PageRank, DanglingAndNegativeWeights) {
    auto g = hand_graph(4, {{0, 1}});
    g.mutual[2].push_back({3, -0.4});
    g.mutual[3].push_back({2, -0.4});
    const auto r = pagerank(g);
    const auto o = oracle::pagerank_dense(dense_weights(g), 0.85);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(r.scores[i], o[i], 1e-9);
    EXPECT_NEAR(std::accumulate(r.scores.begin(), r.scores.end(), 0.0), 1.0, 1e-9);
}

TEST(PageRank, NonConvergenceFlagged) {
    PageRankOptions opt;
    opt.max_iter = 1;
    opt.tol = 0.0;
    const auto r = pagerank(hand_graph(3, {{0, 1}, {1, 2}}), opt);
    EXPECT_FALSE(r.converged);
    EXPECT_EQ(r.iterations, 1);
    EXPECT_EQ(r.scores.size(), 3u);
}

TEST(PageRank, RandomGraphsMatchOracleAndRelabeling) {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + rng.below(19);
        const Matrix m = random_rows(n, 4, rng);
        const auto g = build_mutual_knn(m, 1 + rng.below(5));
        const auto r = pagerank(g);
        const auto o = oracle::pagerank_dense(dense_weights(g), 0.85);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            EXPECT_NEAR(r.scores[i], o[i], 1e-8);
            EXPECT_GE(r.scores[i], 0.0);
            sum += r.scores[i];
        }
        EXPECT_NEAR(sum, 1.0, 1e-9);

        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
        const Matrix pm = m.select_rows(perm);
        const auto pg = build_mutual_knn(pm, g.k);
        const auto pr = pagerank(pg);
        const auto ph = hubness(pg);
        const auto h = hubness(g);
        for (std::size_t i = 0; i < n; ++i) {
            EXPECT_NEAR(pr.scores[i], r.scores[perm[i]], 1e-9);
            EXPECT_EQ(ph[i], h[perm[i]]);
        }
    }
}

TEST(Hubness, BentLineMiddleCollectsBothEnds) {
    const double a = std::numbers::pi / 6.0;
    const auto g = build_mutual_knn(
        from_rows({{1, 0}, {std::cos(a), std::sin(a)}, {std::cos(2 * a), std::sin(2 * a)}}), 1);
    const auto h = hubness(g);
    EXPECT_EQ(h[1], 2.0);
    // The middle point must also name a neighbour; the tie goes to index 0.
    EXPECT_EQ(h[0], 1.0);
    EXPECT_EQ(h[2], 0.0);
}

TEST(Hubness, SimplexAndPair) {
    const auto g = build_mutual_knn(
        from_rows({{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}}), 3);
    for (double v : hubness(g)) EXPECT_EQ(v, 3.0);
    EXPECT_EQ(hubness(build_mutual_knn(from_rows({{1, 0}, {0, 1}}), 1)),
              (std::vector<double>{1.0, 1.0}));
}

TEST(EdgesCsv, EachEdgeOnce) {
    std::ostringstream os;
    write_edges_csv(os, hand_graph(3, {{0, 1}, {1, 2}}, 0.5));
    EXPECT_EQ(os.str(), "src,dst,weight\n0,1,0.5\n1,2,0.5\n");
}
