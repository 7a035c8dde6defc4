#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "harsel/activity.hpp"
#include "harsel/error.hpp"
#include "harsel/featurizer.hpp"
#include "harsel/knowledge.hpp"
#include "harsel/matrix.hpp"
#include "harsel/simgraph.hpp"
#include "harsel/util.hpp"

namespace harsel {

/// Weights of the hybrid score S = alpha*M + mu*P - tau*H + beta*T, applied
/// to per-class z-normalized components.
struct ScoreCoefficients {
    double alpha = 1.0;
    double mu = 0.10;
    double tau = 0.10;
    double beta = 0.15;

    friend bool operator==(const ScoreCoefficients&, const ScoreCoefficients&) = default;
};

// ---------------------------------------------------------------------------
// Validation margin

struct MarginResult {
    double value = 0.0;
    /// One of V+ / V- was empty and only the other term was used.
    bool degenerate = false;
};

/// Unit-normalized validation rows, split by label once and reused for every
/// candidate.
class ValidationIndex {
public:
    explicit ValidationIndex(const FeatureMatrix& val)
        : unit_(normalize_rows(val.values)), labels_(val.labels) {
        if (val.rows() == 0) throw ArgumentError("margin: validation matrix is empty");
    }

    MarginResult margin(std::span<const double> candidate, Activity label) const {
        const double n = norm(candidate);
        double pos = 0.0, neg = 0.0;
        std::size_t n_pos = 0, n_neg = 0;
        for (std::size_t j = 0; j < unit_.rows(); ++j) {
            const double s = n < kZeroNorm ? 0.0 : dot(candidate, unit_.row(j)) / n;
            if (labels_[j] == label) {
                pos += s;
                ++n_pos;
            } else {
                neg += s;
                ++n_neg;
            }
        }
        MarginResult r;
        if (n_pos == 0 && n_neg == 0) throw ArgumentError("margin: V+ and V- are both empty");
        if (n_pos == 0) {
            r.value = -neg / static_cast<double>(n_neg);
            r.degenerate = true;
        } else if (n_neg == 0) {
            r.value = pos / static_cast<double>(n_pos);
            r.degenerate = true;
        } else {
            r.value = pos / static_cast<double>(n_pos) - neg / static_cast<double>(n_neg);
        }
        return r;
    }

private:
    Matrix unit_;
    std::vector<Activity> labels_;
};

/// M = mean cosine to same-label validation rows - mean cosine to the rest.
inline MarginResult margin(std::span<const double> candidate, const FeatureMatrix& val,
                           Activity candidate_label) {
    return ValidationIndex(val).margin(candidate, candidate_label);
}

// ---------------------------------------------------------------------------
// Semantic prior

/// T(x, y) = w_y.x - max_{y' != y} c[y][y'] * (w_y'.x), with the label
/// weight vectors materialized once for a fixed column layout.
class SemanticScorer {
public:
    SemanticScorer(const KnowledgePrior& prior, std::span<const std::string> feature_columns)
        : prior_(prior) {
        for (Activity a : kAllActivities)
            weights_[index_of(a)] = weight_vector(prior, a, feature_columns);
    }

    double score(std::span<const double> x, Activity label) const {
        std::array<double, kNumActivities> proj{};
        for (Activity a : kAllActivities) proj[index_of(a)] = dot(weights_[index_of(a)], x);
        double competitor = -std::numeric_limits<double>::infinity();
        for (Activity other : kAllActivities) {
            if (other == label) continue;
            competitor = std::max(competitor, prior_.confusion(label, other) * proj[index_of(other)]);
        }
        return proj[index_of(label)] - competitor;
    }

private:
    KnowledgePrior prior_;
    std::array<std::vector<double>, kNumActivities> weights_;
};

inline double semantic_score(std::span<const double> candidate, Activity label,
                             const KnowledgePrior& prior,
                             std::span<const std::string> feature_columns) {
    return SemanticScorer(prior, feature_columns).score(candidate, label);
}

// ---------------------------------------------------------------------------
// Combination

/// Raw components for the candidates of one class.
struct ClassComponents {
    Activity label = Activity::Walking;
    std::vector<std::size_t> indices;  // row indices into the training matrix
    std::vector<double> margin;
    std::vector<double> pagerank;
    std::vector<double> hubness;
    std::vector<double> semantic;
};

struct ScoreRecord {
    std::size_t index = 0;
    Activity label = Activity::Walking;
    double m = 0, p = 0, h = 0, t = 0;
    double m_hat = 0, p_hat = 0, h_hat = 0, t_hat = 0;
    double s = 0;
};

struct ScoreTable {
    /// Sorted by row index.
    std::vector<ScoreRecord> records;
    ScoreCoefficients coefficients;

    const ScoreRecord& at(std::size_t row_index) const {
        auto it = std::lower_bound(records.begin(), records.end(), row_index,
                                   [](const ScoreRecord& r, std::size_t i) { return r.index < i; });
        if (it == records.end() || it->index != row_index)
            throw ArgumentError("score table: no record for row " + std::to_string(row_index));
        return *it;
    }

    /// S for the given rows, in the given order.
    std::vector<double> scores_for(std::span<const std::size_t> rows) const {
        std::vector<double> out;
        out.reserve(rows.size());
        for (std::size_t r : rows) out.push_back(at(r).s);
        return out;
    }
};

/// Within-class z-score (population std); a constant component maps to 0.
inline std::vector<double> z_normalize(std::span<const double> v) {
    const auto mom = moments(v);
    std::vector<double> out(v.size(), 0.0);
    if (mom.std <= 1e-12 * std::max(1.0, std::abs(mom.mean))) return out;
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - mom.mean) / mom.std;
    return out;
}

inline double combine_score(const ScoreRecord& r, const ScoreCoefficients& c) {
    return c.alpha * r.m_hat + c.mu * r.p_hat - c.tau * r.h_hat + c.beta * r.t_hat;
}

inline ScoreTable combine(const std::vector<ClassComponents>& classes,
                          const ScoreCoefficients& coef) {
    ScoreTable table;
    table.coefficients = coef;
    for (const auto& cc : classes) {
        const std::size_t n = cc.indices.size();
        if (cc.margin.size() != n || cc.pagerank.size() != n || cc.hubness.size() != n ||
            cc.semantic.size() != n)
            throw ArgumentError("combine: component lengths differ");
        const auto mh = z_normalize(cc.margin);
        const auto ph = z_normalize(cc.pagerank);
        const auto hh = z_normalize(cc.hubness);
        const auto th = z_normalize(cc.semantic);
        for (std::size_t i = 0; i < n; ++i) {
            ScoreRecord r;
            r.index = cc.indices[i];
            r.label = cc.label;
            r.m = cc.margin[i];
            r.p = cc.pagerank[i];
            r.h = cc.hubness[i];
            r.t = cc.semantic[i];
            r.m_hat = mh[i];
            r.p_hat = ph[i];
            r.h_hat = hh[i];
            r.t_hat = th[i];
            r.s = combine_score(r, coef);
            table.records.push_back(r);
        }
    }
    std::sort(table.records.begin(), table.records.end(),
              [](const ScoreRecord& a, const ScoreRecord& b) { return a.index < b.index; });
    for (std::size_t i = 1; i < table.records.size(); ++i)
        if (table.records[i].index == table.records[i - 1].index)
            throw ArgumentError("combine: candidate listed twice");
    return table;
}

// ---------------------------------------------------------------------------
// End-to-end scoring of a training matrix

struct ScoringConfig {
    ScoreCoefficients coefficients;
    std::size_t k_graph = 10;
    PageRankOptions pagerank;
    /// Add same-class validation rows as extra graph nodes (P and H are still
    /// reported for training rows only).
    bool graph_include_val = false;
};

struct ScoringResult {
    ScoreTable table;
    std::vector<ClassComponents> components;
    std::map<Activity, SimilarityGraph> graphs;
    std::vector<std::string> warnings;
};

/// Computes M, P, H, T for every training row, one class-conditional graph per
/// class, then combines them.
inline ScoringResult score_candidates(const FeatureMatrix& train, const FeatureMatrix& val,
                                      const KnowledgePrior& prior, const ScoringConfig& cfg,
                                      unsigned threads = 1) {
    const ValidationIndex vindex(val);
    const SemanticScorer sem(prior, train.column_names);

    std::vector<Activity> present;
    for (Activity a : kAllActivities)
        if (!train.rows_of(a).empty()) present.push_back(a);

    std::vector<ClassComponents> comps(present.size());
    std::vector<SimilarityGraph> graphs(present.size());
    std::vector<std::string> warns(present.size());
    parallel_for(present.size(), threads, [&](std::size_t ci) {
        const Activity a = present[ci];
        ClassComponents& cc = comps[ci];
        cc.label = a;
        cc.indices = train.rows_of(a);
        Matrix nodes = train.values.select_rows(cc.indices);
        if (cfg.graph_include_val) {
            const auto vrows = val.rows_of(a);
            for (std::size_t r : vrows) nodes.append_row(val.values.row(r));
        }
        graphs[ci] = build_mutual_knn(nodes, cfg.k_graph);
        const auto pr = pagerank(graphs[ci], cfg.pagerank);
        if (!pr.converged)
            warns[ci] = std::string("pagerank did not converge for ") + std::string(activity_name(a));
        const auto hub = hubness(graphs[ci]);
        const std::size_t n = cc.indices.size();
        cc.pagerank.assign(pr.scores.begin(), pr.scores.begin() + static_cast<std::ptrdiff_t>(n));
        cc.hubness.assign(hub.begin(), hub.begin() + static_cast<std::ptrdiff_t>(n));
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = train.values.row(cc.indices[i]);
            cc.margin.push_back(vindex.margin(row, a).value);
            cc.semantic.push_back(sem.score(row, a));
        }
    });

    ScoringResult out;
    out.table = combine(comps, cfg.coefficients);
    for (std::size_t ci = 0; ci < present.size(); ++ci) {
        out.graphs.emplace(present[ci], std::move(graphs[ci]));
        if (!warns[ci].empty()) out.warnings.push_back(warns[ci]);
    }
    out.components = std::move(comps);
    return out;
}

/// `index,label,M,P,H,T,S`.
inline void write_score_csv(std::ostream& os, const ScoreTable& t) {
    os << "index,label,M,P,H,T,S\n";
    for (const auto& r : t.records)
        os << r.index << ',' << activity_name(r.label) << ',' << format_double(r.m) << ','
           << format_double(r.p) << ',' << format_double(r.h) << ',' << format_double(r.t) << ','
           << format_double(r.s) << '\n';
}

}  // namespace harsel
