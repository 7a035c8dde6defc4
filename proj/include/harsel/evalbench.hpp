#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "harsel/activity.hpp"
#include "harsel/config.hpp"
#include "harsel/datastore.hpp"
#include "harsel/error.hpp"
#include "harsel/featurizer.hpp"
#include "harsel/knowledge.hpp"
#include "harsel/llm_bridge.hpp"
#include "harsel/models.hpp"
#include "harsel/scorer.hpp"
#include "harsel/selector.hpp"
#include "harsel/util.hpp"

namespace harsel {

// ---------------------------------------------------------------------------
// Metrics

/// counts[true][pred] over the six activities.
struct ConfusionMatrix {
    std::array<std::array<std::size_t, kNumActivities>, kNumActivities> counts{};

    std::size_t row_sum(Activity a) const {
        std::size_t s = 0;
        for (std::size_t v : counts[index_of(a)]) s += v;
        return s;
    }

    std::size_t total() const {
        std::size_t s = 0;
        for (Activity a : kAllActivities) s += row_sum(a);
        return s;
    }
};

inline ConfusionMatrix confusion_matrix(std::span<const Activity> y_true,
                                        std::span<const Activity> y_pred) {
    if (y_true.size() != y_pred.size()) throw ArgumentError("confusion_matrix: length mismatch");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < y_true.size(); ++i) ++cm.counts[index_of(y_true[i])][index_of(y_pred[i])];
    return cm;
}

/// Unweighted mean of per-class F1 over `labels`; a class without true or
/// predicted instances contributes 0.
inline double macro_f1(std::span<const Activity> y_true, std::span<const Activity> y_pred,
                       std::span<const Activity> labels = kAllActivities) {
    if (y_true.size() != y_pred.size()) throw ArgumentError("macro_f1: length mismatch");
    if (y_true.empty()) throw ArgumentError("macro_f1: empty input");
    if (labels.empty()) throw ArgumentError("macro_f1: no labels");
    const auto cm = confusion_matrix(y_true, y_pred);
    double sum = 0.0;
    for (Activity a : labels) {
        const std::size_t i = index_of(a);
        const double tp = static_cast<double>(cm.counts[i][i]);
        double pred = 0.0;
        for (Activity b : kAllActivities) pred += static_cast<double>(cm.counts[index_of(b)][i]);
        const double truth = static_cast<double>(cm.row_sum(a));
        const double denom = pred + truth;
        sum += denom > 0.0 ? 2.0 * tp / denom : 0.0;
    }
    return sum / static_cast<double>(labels.size());
}

inline double accuracy(std::span<const Activity> y_true, std::span<const Activity> y_pred) {
    if (y_true.size() != y_pred.size() || y_true.empty())
        throw ArgumentError("accuracy: empty or mismatched input");
    std::size_t ok = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) ok += y_true[i] == y_pred[i];
    return static_cast<double>(ok) / static_cast<double>(y_true.size());
}

inline void write_confusion_csv(std::ostream& os, const ConfusionMatrix& cm) {
    os << "true\\pred";
    for (Activity a : kAllActivities) os << ',' << activity_name(a);
    os << '\n';
    for (Activity t : kAllActivities) {
        os << activity_name(t);
        for (Activity p : kAllActivities) os << ',' << cm.counts[index_of(t)][index_of(p)];
        os << '\n';
    }
}

// ---------------------------------------------------------------------------
// Pipeline stages shared by every experiment

/// Runs `fn`, rethrowing any failure as a StageError naming `stage`.
template <class F>
auto run_stage(const char* stage, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

inline Dataset load_dataset(const RunConfig& cfg) {
    return run_stage("datastore", [&] {
        if (cfg.dataset.kind == "ucihar") {
            if (cfg.dataset.path.empty()) throw LoadError("ucihar dataset requires dataset.path");
            return load_ucihar(cfg.dataset.path, cfg.split, cfg.dataset.acc);
        }
        SynthesisOptions opt;
        opt.subject_pool = cfg.dataset.subject_pool;
        opt.atypical_fraction = cfg.dataset.atypical_fraction;
        return apply_split(synthesize(cfg.seed, cfg.dataset.windows_per_class, opt), cfg.split);
    });
}

struct KnowledgeArtifacts {
    PromptBundle semantic_prompt;
    PromptBundle knowledge_prompt;
    std::string semantic_raw;
    std::string knowledge_raw;
    std::vector<SemanticFeatureSpec> semantic;
    KnowledgePrior prior;
    std::vector<std::string> warnings;
};

struct Prepared {
    RunConfig config;
    Dataset data;
    std::string dataset_digest;
    KnowledgeArtifacts knowledge;
    FeatureSpace features;
    ScoringResult scoring;
    std::map<Activity, int> budgets;
    std::optional<GateModel> gate;
    std::vector<std::string> warnings;
};

/// Ingest, features, both LLM steps, scoring and the gate. The semantic
/// prompt sees standardized train-only base statistics; the knowledge prompt
/// sees train-only means of the base and semantic columns.
inline Prepared prepare(const RunConfig& cfg, LlmClient& llm) {
    cfg.validate();
    Prepared p;
    p.config = cfg;
    p.data = load_dataset(cfg);
    run_stage("datastore", [&] {
        if (p.data.train.empty() || p.data.val.empty() || p.data.test.empty())
            throw LoadError("train, validation and test subsets must all be non-empty");
        std::vector<SensorWindow> all = p.data.train;
        all.insert(all.end(), p.data.val.begin(), p.data.val.end());
        all.insert(all.end(), p.data.test.begin(), p.data.test.end());
        p.dataset_digest = dataset_digest(all);
    });

    const auto& base_names = base_stat_names();
    const FeatureMatrix base_train = run_stage("featurizer", [&] {
        const FeatureMatrix raw = base_feature_matrix(p.data.train, Subset::Train);
        return fit_standardizer(raw).apply(raw);
    });

    auto& k = p.knowledge;
    if (cfg.features.semantic) {
        run_stage("llm_bridge", [&] {
            k.semantic_prompt = build_semantic_prompt(class_means(base_train), cfg.llm.model);
            k.semantic_raw = llm.complete(k.semantic_prompt);
        });
        k.semantic = run_stage("knowledge", [&] { return parse_semantic_specs(k.semantic_raw); });
    }

    p.features = run_stage("featurizer", [&] {
        return build_feature_space(p.data.train, p.data.val, p.data.test, k.semantic, cfg.features);
    });

    std::vector<std::string> prior_features(base_names.begin(), base_names.end());
    for (const auto& s : k.semantic) prior_features.push_back(s.name);
    run_stage("llm_bridge", [&] {
        const auto means = class_means(p.features.train, prior_features);
        std::vector<Activity> labels(kAllActivities.begin(), kAllActivities.end());
        k.knowledge_prompt = build_knowledge_prompt(labels, prior_features, means, cfg.llm.model);
        for (const auto* bundle : {&k.semantic_prompt, &k.knowledge_prompt}) {
            if (bundle->user_text.empty()) continue;
            const auto leaks =
                audit_prompt_leakage(*bundle, means,
                                     {held_out_class_means(p.features.val, prior_features),
                                      held_out_class_means(p.features.test, prior_features)});
            if (!leaks.empty()) throw ValidationError("prompt leakage: " + leaks.front());
        }
        k.knowledge_raw = llm.complete(k.knowledge_prompt);
    });
    k.prior = run_stage("knowledge", [&] {
        return parse_and_validate(k.knowledge_raw, kAllActivities, prior_features);
    });
    k.warnings = k.prior.warnings;

    p.scoring = run_stage("scorer", [&] {
        return score_candidates(p.features.train, p.features.val, k.prior, cfg.scoring, cfg.threads);
    });
    p.budgets = class_budgets(k.prior, cfg.budgets);
    if (cfg.gate.enabled)
        p.gate = run_stage("models", [&] {
            return fit_gate(p.features.train, cfg.hyperparams.logistic, cfg.gate.threshold);
        });

    p.warnings = k.warnings;
    p.warnings.insert(p.warnings.end(), p.scoring.warnings.begin(), p.scoring.warnings.end());
    return p;
}

// ---------------------------------------------------------------------------
// Experiments

struct CellResult {
    Strategy strategy = Strategy::LlmGuided;
    ClassifierKind classifier = ClassifierKind::Logistic;
    /// Headline score: gated when the gate is enabled, ungated otherwise.
    double macro_f1 = 0.0;
    double macro_f1_gated = 0.0;
    double macro_f1_ungated = 0.0;
    ConfusionMatrix confusion;
    std::size_t exemplars = 0;
};

struct TrainedCell {
    CellResult result;
    Classifier classifier;
};

inline TrainedCell evaluate_cell(const Prepared& p, const ExemplarSet& set, ClassifierKind kind) {
    return run_stage("models", [&] {
        const auto rows = set.all_rows();
        const FeatureMatrix ex = p.features.train.select_rows(rows);
        TrainedCell tc;
        tc.classifier = Classifier::fit(kind, ex.values, ex.labels, p.config.hyperparams);
        const auto& test = p.features.test;
        const auto ungated = ungated_predict(tc.classifier, test.values);
        auto& r = tc.result;
        r.strategy = set.strategy;
        r.classifier = kind;
        r.exemplars = rows.size();
        r.macro_f1_ungated = macro_f1(test.labels, ungated);
        if (p.gate) {
            const auto gated = gated_predict(tc.classifier, *p.gate, test.values);
            r.macro_f1_gated = macro_f1(test.labels, gated);
            r.macro_f1 = r.macro_f1_gated;
            r.confusion = confusion_matrix(test.labels, gated);
        } else {
            r.macro_f1_gated = r.macro_f1_ungated;
            r.macro_f1 = r.macro_f1_ungated;
            r.confusion = confusion_matrix(test.labels, ungated);
        }
        return tc;
    });
}

inline ExemplarSet select_for(const Prepared& p, Strategy s, const ScoreTable& table) {
    return run_stage("selector", [&] {
        return select_exemplars(s, p.features.train, &table, p.budgets, p.config.selection,
                                p.config.seed, p.config.threads);
    });
}

struct Comparison {
    std::vector<CellResult> cells;  // strategy-major, config order
    std::map<Strategy, ExemplarSet> selections;
    std::vector<Classifier> models;  // aligned with cells
};

inline Comparison run_comparison(const Prepared& p) {
    Comparison out;
    for (Strategy s : p.config.strategies) {
        auto set = select_for(p, s, p.scoring.table);
        std::vector<TrainedCell> cells(p.config.classifiers.size());
        parallel_for(cells.size(), p.config.threads, [&](std::size_t i) {
            cells[i] = evaluate_cell(p, set, p.config.classifiers[i]);
        });
        for (auto& c : cells) {
            out.cells.push_back(c.result);
            out.models.push_back(std::move(c.classifier));
        }
        out.selections.emplace(s, std::move(set));
    }
    return out;
}

inline double mean_f1(std::span<const CellResult> cells, Strategy s) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& c : cells)
        if (c.strategy == s) {
            sum += c.macro_f1;
            ++n;
        }
    return n ? sum / static_cast<double>(n) : 0.0;
}

inline const CellResult* find_cell(std::span<const CellResult> cells, Strategy s, ClassifierKind k) {
    for (const auto& c : cells)
        if (c.strategy == s && c.classifier == k) return &c;
    return nullptr;
}

struct AblationRow {
    std::string name;
    std::vector<CellResult> cells;  // one per classifier, config order
    double mean = 0.0;
    double delta = 0.0;  // mean - full-system mean
};

struct Ablation {
    std::vector<AblationRow> rows;  // "full" first
};

/// Full system plus the four single-component removals.
inline Ablation run_ablation(const Prepared& p) {
    struct Variant {
        const char* name;
        std::function<void(ScoreCoefficients&)> edit;
        Strategy strategy;
    };
    const std::vector<Variant> variants = {
        {"full", [](ScoreCoefficients&) {}, Strategy::LlmGuided},
        {"no_semantic_prior", [](ScoreCoefficients& c) { c.beta = 0.0; }, Strategy::LlmGuided},
        {"no_pagerank", [](ScoreCoefficients& c) { c.mu = 0.0; }, Strategy::LlmGuided},
        {"no_hubness_penalty", [](ScoreCoefficients& c) { c.tau = 0.0; }, Strategy::LlmGuided},
        {"no_facility_location", [](ScoreCoefficients&) {}, Strategy::TopScore},
    };
    Ablation out;
    for (const auto& v : variants) {
        ScoreCoefficients coef = p.scoring.table.coefficients;
        v.edit(coef);
        const ScoreTable table =
            coef == p.scoring.table.coefficients ? p.scoring.table : combine(p.scoring.components, coef);
        const auto set = select_for(p, v.strategy, table);
        AblationRow row;
        row.name = v.name;
        row.cells.resize(p.config.classifiers.size());
        parallel_for(row.cells.size(), p.config.threads, [&](std::size_t i) {
            row.cells[i] = evaluate_cell(p, set, p.config.classifiers[i]).result;
        });
        double sum = 0.0;
        for (const auto& c : row.cells) sum += c.macro_f1;
        row.mean = sum / static_cast<double>(row.cells.size());
        out.rows.push_back(std::move(row));
    }
    for (auto& r : out.rows) r.delta = r.mean - out.rows.front().mean;
    return out;
}

struct GateStudy {
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    /// LLM-guided exemplars, per classifier in config order.
    std::vector<ClassifierKind> classifiers;
    std::vector<double> gated;
    std::vector<double> ungated;
};

inline double gate_accuracy(const GateModel& g, const FeatureMatrix& m) {
    std::size_t ok = 0;
    for (std::size_t r = 0; r < m.rows(); ++r) ok += g.route(m.values.row(r)) == domain_of(m.labels[r]);
    return m.rows() ? static_cast<double>(ok) / static_cast<double>(m.rows()) : 0.0;
}

/// Gate on/off for LLM-guided exemplars. A disabled config gate is trained
/// here so both arms are always reported.
inline GateStudy run_gate_study(const Prepared& p) {
    Prepared local = p;
    if (!local.gate) local.gate = fit_gate(p.features.train, p.config.hyperparams.logistic, p.config.gate.threshold);
    GateStudy g;
    g.train_accuracy = gate_accuracy(*local.gate, p.features.train);
    g.test_accuracy = gate_accuracy(*local.gate, p.features.test);
    const auto set = select_for(local, Strategy::LlmGuided, local.scoring.table);
    for (ClassifierKind k : p.config.classifiers) {
        const auto r = evaluate_cell(local, set, k).result;
        g.classifiers.push_back(k);
        g.gated.push_back(r.macro_f1_gated);
        g.ungated.push_back(r.macro_f1_ungated);
    }
    return g;
}

/// Median wall-clock prediction time per sample in milliseconds over
/// `repeats` passes (prediction only; features are precomputed).
inline double time_inference(const Classifier& c, const GateModel* gate, const Matrix& x, int repeats) {
    if (x.rows() == 0) throw ArgumentError("time_inference: empty input");
    if (repeats < 1) throw ArgumentError("time_inference: repeats must be >= 1");
    std::vector<double> per_sample;
    std::size_t sink = 0;
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto pred = gate ? gated_predict(c, *gate, x) : ungated_predict(c, x);
        const auto t1 = std::chrono::steady_clock::now();
        sink += index_of(pred.front());
        per_sample.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count() /
                             static_cast<double>(x.rows()));
    }
    static_cast<void>(sink);
    return median(per_sample);
}

// ---------------------------------------------------------------------------
// Reports

inline nlohmann::ordered_json to_json(const CellResult& c) {
    nlohmann::ordered_json cm = nlohmann::ordered_json::array();
    for (const auto& row : c.confusion.counts) cm.push_back(row);
    return {{"strategy", std::string(strategy_name(c.strategy))},
            {"classifier", std::string(classifier_name(c.classifier))},
            {"macro_f1", c.macro_f1},
            {"macro_f1_gated", c.macro_f1_gated},
            {"macro_f1_ungated", c.macro_f1_ungated},
            {"exemplars", c.exemplars},
            {"confusion", cm}};
}

inline nlohmann::ordered_json prepared_json(const Prepared& p) {
    nlohmann::ordered_json j;
    j["config"] = to_json(p.config);
    j["config_hash"] = config_hash(p.config);
    j["dataset_digest"] = p.dataset_digest;
    j["sizes"] = {{"train", p.features.train.rows()},
                  {"val", p.features.val.rows()},
                  {"test", p.features.test.rows()},
                  {"features", p.features.train.cols()}};
    nlohmann::ordered_json budgets;
    for (const auto& [a, b] : p.budgets) budgets[std::string(activity_name(a))] = b;
    j["budgets"] = budgets;
    j["columns"] = p.features.train.column_names;
    j["warnings"] = p.warnings;
    return j;
}

inline nlohmann::ordered_json to_json(const Comparison& c) {
    nlohmann::ordered_json j;
    auto cells = nlohmann::ordered_json::array();
    for (const auto& cell : c.cells) cells.push_back(to_json(cell));
    j["cells"] = cells;
    nlohmann::ordered_json viol;
    for (const auto& [s, set] : c.selections) {
        std::size_t v = 0;
        for (const auto& cs : set.classes) v += gain_violations(cs);
        viol[std::string(strategy_name(s))] = v;
    }
    j["gain_violations"] = viol;
    return j;
}

inline nlohmann::ordered_json to_json(const Ablation& a) {
    auto rows = nlohmann::ordered_json::array();
    for (const auto& r : a.rows) {
        auto cells = nlohmann::ordered_json::array();
        for (const auto& c : r.cells)
            cells.push_back({{"classifier", std::string(classifier_name(c.classifier))},
                             {"macro_f1", c.macro_f1}});
        rows.push_back({{"variant", r.name}, {"mean", r.mean}, {"delta", r.delta}, {"cells", cells}});
    }
    return rows;
}

inline nlohmann::ordered_json to_json(const GateStudy& g) {
    auto rows = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < g.classifiers.size(); ++i)
        rows.push_back({{"classifier", std::string(classifier_name(g.classifiers[i]))},
                        {"gated", g.gated[i]},
                        {"ungated", g.ungated[i]},
                        {"delta", g.gated[i] - g.ungated[i]}});
    return {{"train_accuracy", g.train_accuracy}, {"test_accuracy", g.test_accuracy}, {"rows", rows}};
}

inline std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%6.2f", 100.0 * v);
    return buf;
}

/// Strategy rows x classifier columns, macro-F1 in percent.
inline std::string comparison_text(const Comparison& c, std::span<const Strategy> strategies,
                                   std::span<const ClassifierKind> classifiers) {
    std::ostringstream os;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-12s", "strategy");
    os << buf;
    for (auto k : classifiers) {
        std::snprintf(buf, sizeof buf, " %12s", std::string(classifier_name(k)).c_str());
        os << buf;
    }
    os << "         mean\n";
    for (auto s : strategies) {
        std::snprintf(buf, sizeof buf, "%-12s", std::string(strategy_name(s)).c_str());
        os << buf;
        for (auto k : classifiers) {
            const auto* cell = find_cell(c.cells, s, k);
            os << "       " << (cell ? pct(cell->macro_f1) : std::string("     -"));
        }
        os << "       " << pct(mean_f1(c.cells, s)) << '\n';
    }
    return os.str();
}

inline std::string ablation_text(const Ablation& a) {
    std::ostringstream os;
    char buf[96];
    std::snprintf(buf, sizeof buf, "%-22s %8s %8s\n", "variant", "mean", "delta");
    os << buf;
    for (const auto& r : a.rows) {
        std::snprintf(buf, sizeof buf, "%-22s %8.2f %+8.2f\n", r.name.c_str(), 100.0 * r.mean,
                      100.0 * r.delta);
        os << buf;
    }
    return os.str();
}

inline std::string gate_text(const GateStudy& g) {
    std::ostringstream os;
    char buf[96];
    std::snprintf(buf, sizeof buf, "gate accuracy: train %.4f, test %.4f\n", g.train_accuracy,
                  g.test_accuracy);
    os << buf;
    std::snprintf(buf, sizeof buf, "%-12s %8s %8s %8s\n", "classifier", "gated", "ungated", "delta");
    os << buf;
    for (std::size_t i = 0; i < g.classifiers.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%-12s %8.2f %8.2f %+8.2f\n",
                      std::string(classifier_name(g.classifiers[i])).c_str(), 100.0 * g.gated[i],
                      100.0 * g.ungated[i], 100.0 * (g.gated[i] - g.ungated[i]));
        os << buf;
    }
    return os.str();
}

}  // namespace harsel
