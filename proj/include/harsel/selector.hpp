#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "harsel/activity.hpp"
#include "harsel/error.hpp"
#include "harsel/featurizer.hpp"
#include "harsel/matrix.hpp"
#include "harsel/scorer.hpp"
#include "harsel/util.hpp"

namespace harsel {

enum class Strategy { LlmGuided, Random, Herding, KCenter, TopScore };

inline std::string_view strategy_name(Strategy s) {
    switch (s) {
        case Strategy::LlmGuided: return "llm_guided";
        case Strategy::Random: return "random";
        case Strategy::Herding: return "herding";
        case Strategy::KCenter: return "kcenter";
        case Strategy::TopScore: return "top_score";
    }
    return "llm_guided";
}

inline Strategy parse_strategy(std::string_view s) {
    for (Strategy st : {Strategy::LlmGuided, Strategy::Random, Strategy::Herding,
                        Strategy::KCenter, Strategy::TopScore})
        if (strategy_name(st) == s) return st;
    throw ConfigError("unknown strategy '" + std::string(s) +
                      "' (llm_guided|random|herding|kcenter|top_score)");
}

struct TraceStep {
    std::size_t row = 0;      // class-local position or global row, see context
    double gain = 0.0;        // facility gain F(E+j) - F(E) of the chosen item
    double objective = 0.0;   // value the strategy maximized/minimized at this step
};

/// Result of one class-local selection; positions index the class rows.
struct LocalSelection {
    std::vector<std::size_t> positions;
    std::vector<TraceStep> trace;
};

// ---------------------------------------------------------------------------
// Facility location

/// Incremental F(S) = sum_x max_{s in S} sim(x, s) over a fixed class, with
/// F(empty) = 0 and raw (possibly negative) cosine similarity.
class FacilityState {
public:
    explicit FacilityState(const Matrix& rows) : sim_(cosine_matrix(rows)), best_(rows.rows(), 0.0) {}

    std::size_t size() const noexcept { return best_.size(); }
    bool empty_selection() const noexcept { return selected_ == 0; }
    const Matrix& similarity() const noexcept { return sim_; }

    double gain(std::size_t j) const {
        double g = 0.0;
        const std::size_t n = size();
        if (selected_ == 0) {
            for (std::size_t x = 0; x < n; ++x) g += sim_(x, j);
        } else {
            for (std::size_t x = 0; x < n; ++x) g += std::max(0.0, sim_(x, j) - best_[x]);
        }
        return g;
    }

    void add(std::size_t j) {
        const std::size_t n = size();
        for (std::size_t x = 0; x < n; ++x)
            best_[x] = selected_ == 0 ? sim_(x, j) : std::max(best_[x], sim_(x, j));
        ++selected_;
        value_ = std::accumulate(best_.begin(), best_.end(), 0.0);
    }

    double value() const noexcept { return selected_ == 0 ? 0.0 : value_; }

private:
    Matrix sim_;
    std::vector<double> best_;
    std::size_t selected_ = 0;
    double value_ = 0.0;
};

inline double facility_value(const Matrix& rows, std::span<const std::size_t> selected) {
    if (selected.empty()) return 0.0;
    const Matrix unit = normalize_rows(rows);
    double f = 0.0;
    for (std::size_t x = 0; x < rows.rows(); ++x) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t s : selected) {
            if (s >= rows.rows()) throw ArgumentError("facility_value: index out of range");
            best = std::max(best, std::clamp(dot(unit.row(x), unit.row(s)), -1.0, 1.0));
        }
        f += best;
    }
    return f;
}

/// Greedy facility location blended with hybrid scores: each step takes
/// argmax_j [F(E+j) - F(E)] + blend_alpha * S(j); ties prefer higher S(j),
/// then the lower position.
inline LocalSelection select_facility(const Matrix& rows, std::span<const double> scores,
                                      std::size_t budget, double blend_alpha = 0.20) {
    if (scores.size() != rows.rows()) throw ArgumentError("select_facility: one score per row");
    LocalSelection out;
    const std::size_t n = rows.rows();
    if (n == 0 || budget == 0) return out;
    FacilityState state(rows);
    std::vector<bool> taken(n, false);
    while (out.positions.size() < std::min(budget, n)) {
        std::size_t best = n;
        double best_obj = 0.0, best_gain = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (taken[j]) continue;
            const double g = state.gain(j);
            const double obj = g + blend_alpha * scores[j];
            if (best == n || obj > best_obj || (obj == best_obj && scores[j] > scores[best])) {
                best = j;
                best_obj = obj;
                best_gain = g;
            }
        }
        taken[best] = true;
        state.add(best);
        out.positions.push_back(best);
        out.trace.push_back({best, best_gain, best_obj});
    }
    return out;
}

/// Facility gains of a fixed pick order (used to trace non-facility strategies).
inline std::vector<double> facility_gains(const Matrix& rows, std::span<const std::size_t> order) {
    std::vector<double> gains;
    if (rows.rows() == 0) return gains;
    FacilityState state(rows);
    for (std::size_t j : order) {
        gains.push_back(state.gain(j));
        state.add(j);
    }
    return gains;
}

/// Highest S first, ties by lower position; no coverage term.
inline LocalSelection select_top_score(const Matrix& rows, std::span<const double> scores,
                                       std::size_t budget) {
    if (scores.size() != rows.rows()) throw ArgumentError("select_top_score: one score per row");
    std::vector<std::size_t> order(rows.rows());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    order.resize(std::min(budget, order.size()));
    LocalSelection out;
    out.positions = order;
    const auto gains = facility_gains(rows, order);
    for (std::size_t i = 0; i < order.size(); ++i)
        out.trace.push_back({order[i], gains[i], scores[order[i]]});
    return out;
}

// ---------------------------------------------------------------------------
// Baselines

/// Uniform sample without replacement.
inline LocalSelection select_random(const Matrix& rows, std::size_t budget, std::uint64_t seed) {
    std::vector<std::size_t> order(rows.rows());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);
    order.resize(std::min(budget, order.size()));
    LocalSelection out;
    out.positions = order;
    const auto gains = facility_gains(rows, order);
    for (std::size_t i = 0; i < order.size(); ++i) out.trace.push_back({order[i], gains[i], 0.0});
    return out;
}

/// Mean-matching herding: each step adds the row that brings the running
/// mean of the selection closest (Euclidean) to the class mean.
inline LocalSelection select_herding(const Matrix& rows, std::size_t budget) {
    const std::size_t n = rows.rows();
    const std::size_t d = rows.cols();
    LocalSelection out;
    if (n == 0) return out;
    std::vector<double> mu(d, 0.0), sum(d, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) mu[c] += rows(r, c);
    for (double& v : mu) v /= static_cast<double>(n);

    std::vector<bool> taken(n, false);
    std::vector<std::size_t> order;
    while (order.size() < std::min(budget, n)) {
        const double t = static_cast<double>(order.size() + 1);
        std::size_t best = n;
        double best_dist = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            if (taken[j]) continue;
            double dist = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = mu[c] - (sum[c] + rows(j, c)) / t;
                dist += diff * diff;
            }
            if (dist < best_dist) {
                best = j;
                best_dist = dist;
            }
        }
        taken[best] = true;
        for (std::size_t c = 0; c < d; ++c) sum[c] += rows(best, c);
        order.push_back(best);
        out.trace.push_back({best, 0.0, std::sqrt(best_dist)});
    }
    out.positions = order;
    const auto gains = facility_gains(rows, order);
    for (std::size_t i = 0; i < order.size(); ++i) out.trace[i].gain = gains[i];
    return out;
}

/// Greedy max-min in cosine distance. The first center is the row farthest
/// (in cosine distance) from the class mean; ties go to the lower position.
inline LocalSelection select_kcenter(const Matrix& rows, std::size_t budget) {
    const std::size_t n = rows.rows();
    const std::size_t d = rows.cols();
    LocalSelection out;
    if (n == 0 || budget == 0) return out;
    std::vector<double> mu(d, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) mu[c] += rows(r, c);
    for (double& v : mu) v /= static_cast<double>(n);

    std::size_t first = 0;
    double first_dist = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
        const double dist = 1.0 - cosine(rows.row(j), mu);
        if (dist > first_dist) {
            first = j;
            first_dist = dist;
        }
    }
    const Matrix sim = cosine_matrix(rows);
    std::vector<bool> taken(n, false);
    std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> order;
    auto take = [&](std::size_t j, double objective) {
        taken[j] = true;
        order.push_back(j);
        out.trace.push_back({j, 0.0, objective});
        for (std::size_t x = 0; x < n; ++x) min_dist[x] = std::min(min_dist[x], 1.0 - sim(x, j));
    };
    take(first, first_dist);
    while (order.size() < std::min(budget, n)) {
        std::size_t best = n;
        double best_dist = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            if (taken[j]) continue;
            if (min_dist[j] > best_dist) {
                best = j;
                best_dist = min_dist[j];
            }
        }
        take(best, best_dist);
    }
    out.positions = order;
    const auto gains = facility_gains(rows, order);
    for (std::size_t i = 0; i < order.size(); ++i) out.trace[i].gain = gains[i];
    return out;
}

// ---------------------------------------------------------------------------
// Per-class orchestration

struct ClassSelection {
    Activity label = Activity::Walking;
    int budget = 0;
    /// Global training-row indices, in pick order.
    std::vector<std::size_t> rows;
    /// Trace with global row indices.
    std::vector<TraceStep> trace;
};

struct ExemplarSet {
    Strategy strategy = Strategy::LlmGuided;
    std::vector<ClassSelection> classes;  // activity order, present classes only
    std::vector<std::string> warnings;

    std::vector<std::size_t> all_rows() const {
        std::vector<std::size_t> out;
        for (const auto& c : classes) out.insert(out.end(), c.rows.begin(), c.rows.end());
        return out;
    }
};

struct SelectionConfig {
    double blend_alpha = 0.20;
};

/// Seed for the random baseline of one class, independent of scheduling.
inline std::uint64_t class_seed(std::uint64_t seed, Activity a) {
    return seed ^ (0x9e3779b97f4a7c15ULL * (index_of(a) + 1));
}

/// Runs `strategy` independently for each class of `train`. Score-driven
/// strategies need `scores`; budgets missing from the map default to 1.
inline ExemplarSet select_exemplars(Strategy strategy, const FeatureMatrix& train,
                                    const ScoreTable* scores,
                                    const std::map<Activity, int>& budgets,
                                    const SelectionConfig& cfg, std::uint64_t seed,
                                    unsigned threads = 1) {
    if ((strategy == Strategy::LlmGuided || strategy == Strategy::TopScore) && !scores)
        throw ArgumentError("select_exemplars: strategy needs a score table");
    ExemplarSet set;
    set.strategy = strategy;
    std::vector<ClassSelection> classes(kNumActivities);
    parallel_for(kNumActivities, threads, [&](std::size_t ci) {
        const Activity a = activity_at(ci);
        ClassSelection& cs = classes[ci];
        cs.label = a;
        auto it = budgets.find(a);
        cs.budget = it == budgets.end() ? 1 : it->second;
        if (cs.budget < 1) throw ArgumentError("select_exemplars: budget must be >= 1");
        const auto rows = train.rows_of(a);
        if (rows.empty()) return;
        const Matrix x = train.values.select_rows(rows);
        const std::size_t b = static_cast<std::size_t>(cs.budget);
        LocalSelection local;
        switch (strategy) {
            case Strategy::LlmGuided:
                local = select_facility(x, scores->scores_for(rows), b, cfg.blend_alpha);
                break;
            case Strategy::TopScore: local = select_top_score(x, scores->scores_for(rows), b); break;
            case Strategy::Random: local = select_random(x, b, class_seed(seed, a)); break;
            case Strategy::Herding: local = select_herding(x, b); break;
            case Strategy::KCenter: local = select_kcenter(x, b); break;
        }
        for (std::size_t i = 0; i < local.positions.size(); ++i) {
            cs.rows.push_back(rows[local.positions[i]]);
            TraceStep step = local.trace[i];
            step.row = rows[step.row];
            cs.trace.push_back(step);
        }
    });
    for (auto& cs : classes) {
        if (cs.rows.empty()) {
            set.warnings.push_back(std::string("no training rows for ") +
                                   std::string(activity_name(cs.label)));
            continue;
        }
        set.classes.push_back(std::move(cs));
    }
    return set;
}

/// Steps whose facility gain exceeds the previous step's (beyond `tol`).
inline std::size_t gain_violations(const ClassSelection& cs, double tol = 1e-9) {
    std::size_t v = 0;
    for (std::size_t i = 1; i < cs.trace.size(); ++i)
        if (cs.trace[i].gain > cs.trace[i - 1].gain + tol) ++v;
    return v;
}

/// `label,rank,row_index,gain,objective`.
inline void write_exemplar_csv(std::ostream& os, const ExemplarSet& set) {
    os << "label,rank,row_index,gain,objective\n";
    for (const auto& cs : set.classes)
        for (std::size_t i = 0; i < cs.trace.size(); ++i)
            os << activity_name(cs.label) << ',' << i << ',' << cs.trace[i].row << ','
               << format_double(cs.trace[i].gain) << ',' << format_double(cs.trace[i].objective)
               << '\n';
}

}  // namespace harsel
