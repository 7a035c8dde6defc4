#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "harsel/datastore.hpp"
#include "harsel/error.hpp"
#include "harsel/featurizer.hpp"
#include "harsel/llm_bridge.hpp"
#include "harsel/models.hpp"
#include "harsel/scorer.hpp"
#include "harsel/selector.hpp"
#include "harsel/util.hpp"

namespace harsel {

struct DatasetConfig {
    /// "synthetic" or "ucihar".
    std::string kind = "synthetic";
    std::string path;
    int windows_per_class = 120;
    int subject_pool = kMaxSubject;
    double atypical_fraction = 0.2;
    AccSource acc = AccSource::Total;
};

struct BudgetConfig {
    int k_dyn = 8;
    int k_stat = 2;
};

struct GateConfig {
    bool enabled = true;
    double threshold = 0.5;
};

struct EvalConfig {
    int timing_repeats = 5;
};

struct RunConfig {
    DatasetConfig dataset;
    DataSplit split = DataSplit::standard();
    FeatureSpaceConfig features;
    ScoringConfig scoring;
    /// Reserved redundancy penalty; parsed and reported, not used.
    double lambda_red = 0.0;
    SelectionConfig selection;
    BudgetConfig budgets;
    std::vector<Strategy> strategies = {Strategy::LlmGuided, Strategy::Random, Strategy::Herding,
                                        Strategy::KCenter};
    std::vector<ClassifierKind> classifiers = {ClassifierKind::KnnCosine, ClassifierKind::Logistic,
                                               ClassifierKind::GaussianNb};
    Hyperparams hyperparams;
    GateConfig gate;
    LlmSettings llm;
    EvalConfig eval;
    std::uint64_t seed = 42;
    unsigned threads = 1;

    void validate() const;
};

namespace detail {

inline void require_finite(double v, const char* name) {
    if (!std::isfinite(v)) throw ConfigError(std::string("config: ") + name + " must be finite");
}

/// Rejects keys of `j` outside `allowed`, so typos do not silently fall back
/// to defaults.
inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                       const std::string& where) {
    if (!j.is_object()) throw ConfigError("config: '" + where + "' must be an object");
    for (const auto& [k, _] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || k == a;
        if (!ok) throw ConfigError("config: unknown key '" + where + "." + k + "'");
    }
}

template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end()) out = it->template get<T>();
}

}  // namespace detail

inline void RunConfig::validate() const {
    if (dataset.kind != "synthetic" && dataset.kind != "ucihar")
        throw ConfigError("config: dataset.kind must be 'synthetic' or 'ucihar'");
    if (dataset.windows_per_class < 1) throw ConfigError("config: windows_per_class must be >= 1");
    if (dataset.subject_pool < 1 || dataset.subject_pool > kMaxSubject)
        throw ConfigError("config: subject_pool must be in 1..30");
    split.validate();
    const auto& c = scoring.coefficients;
    detail::require_finite(c.alpha, "alpha");
    detail::require_finite(c.mu, "mu");
    detail::require_finite(c.tau, "tau");
    detail::require_finite(c.beta, "beta");
    detail::require_finite(selection.blend_alpha, "blend_alpha");
    detail::require_finite(lambda_red, "lambda_red");
    detail::require_finite(scoring.pagerank.damping, "pagerank.damping");
    if (scoring.k_graph < 1) throw ConfigError("config: k_graph must be >= 1");
    if (budgets.k_dyn < 1 || budgets.k_stat < 1) throw ConfigError("config: budgets must be >= 1");
    if (strategies.empty()) throw ConfigError("config: no strategies");
    if (classifiers.empty()) throw ConfigError("config: no classifiers");
    if (hyperparams.knn_k < 1) throw ConfigError("config: knn_k must be >= 1");
    if (features.pca_components < 1) throw ConfigError("config: pca_components must be >= 1");
    if (!(features.spectral_variance > 0.0 && features.spectral_variance <= 1.0))
        throw ConfigError("config: spectral_variance must be in (0, 1]");
    if (eval.timing_repeats < 1) throw ConfigError("config: timing_repeats must be >= 1");
}

inline nlohmann::ordered_json to_json(const RunConfig& c) {
    using oj = nlohmann::ordered_json;
    oj j;
    j["dataset"] = {{"kind", c.dataset.kind},
                    {"path", c.dataset.path},
                    {"windows_per_class", c.dataset.windows_per_class},
                    {"subject_pool", c.dataset.subject_pool},
                    {"atypical_fraction", c.dataset.atypical_fraction},
                    {"acc_source", c.dataset.acc == AccSource::Total ? "total" : "body"}};
    j["split"] = {{"train", c.split.train}, {"val", c.split.val}, {"test", c.split.test}};
    j["features"] = {{"semantic", c.features.semantic},
                     {"pca_components", c.features.pca_components},
                     {"spectral_variance", c.features.spectral_variance}};
    const auto& k = c.scoring.coefficients;
    j["scoring"] = {{"alpha", k.alpha},
                    {"mu", k.mu},
                    {"tau", k.tau},
                    {"beta", k.beta},
                    {"k_graph", c.scoring.k_graph},
                    {"pagerank_damping", c.scoring.pagerank.damping},
                    {"pagerank_tol", c.scoring.pagerank.tol},
                    {"pagerank_max_iter", c.scoring.pagerank.max_iter},
                    {"graph_include_val", c.scoring.graph_include_val},
                    {"lambda_red", c.lambda_red}};
    j["selection"] = {{"blend_alpha", c.selection.blend_alpha},
                      {"k_dyn", c.budgets.k_dyn},
                      {"k_stat", c.budgets.k_stat}};
    auto strategies = oj::array();
    for (Strategy s : c.strategies) strategies.push_back(std::string(strategy_name(s)));
    j["strategies"] = strategies;
    auto classifiers = oj::array();
    for (ClassifierKind m : c.classifiers) classifiers.push_back(std::string(classifier_name(m)));
    j["models"] = {{"classifiers", classifiers},
                   {"knn_k", c.hyperparams.knn_k},
                   {"l2", c.hyperparams.logistic.l2},
                   {"max_iter", c.hyperparams.logistic.max_iter},
                   {"grad_tol", c.hyperparams.logistic.grad_tol},
                   {"var_floor", c.hyperparams.var_floor}};
    j["gate"] = {{"enabled", c.gate.enabled}, {"threshold", c.gate.threshold}};
    j["llm"] = {{"mode", std::string(llm_mode_name(c.llm.mode))},
                {"endpoint", c.llm.endpoint},
                {"api_key_env", c.llm.api_key_env},
                {"model", c.llm.model},
                {"cache_dir", c.llm.cache_dir},
                {"fixture_dir", c.llm.fixture_dir}};
    j["eval"] = {{"timing_repeats", c.eval.timing_repeats}};
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    return j;
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline RunConfig config_from_json(const nlohmann::json& j) {
    using detail::check_keys;
    using detail::read_opt;
    RunConfig c;
    try {
        check_keys(j, {"dataset", "split", "features", "scoring", "selection", "strategies", "models",
                       "gate", "llm", "eval", "seed", "threads"},
                   "root");
        if (auto it = j.find("dataset"); it != j.end()) {
            check_keys(*it, {"kind", "path", "windows_per_class", "subject_pool", "atypical_fraction",
                             "acc_source"},
                       "dataset");
            read_opt(*it, "kind", c.dataset.kind);
            read_opt(*it, "path", c.dataset.path);
            read_opt(*it, "windows_per_class", c.dataset.windows_per_class);
            read_opt(*it, "subject_pool", c.dataset.subject_pool);
            read_opt(*it, "atypical_fraction", c.dataset.atypical_fraction);
            std::string acc = "total";
            read_opt(*it, "acc_source", acc);
            if (acc != "total" && acc != "body")
                throw ConfigError("config: dataset.acc_source must be 'total' or 'body'");
            c.dataset.acc = acc == "total" ? AccSource::Total : AccSource::Body;
        }
        if (auto it = j.find("split"); it != j.end()) {
            check_keys(*it, {"train", "val", "test"}, "split");
            read_opt(*it, "train", c.split.train);
            read_opt(*it, "val", c.split.val);
            read_opt(*it, "test", c.split.test);
        }
        if (auto it = j.find("features"); it != j.end()) {
            check_keys(*it, {"semantic", "pca_components", "spectral_variance"}, "features");
            read_opt(*it, "semantic", c.features.semantic);
            read_opt(*it, "pca_components", c.features.pca_components);
            read_opt(*it, "spectral_variance", c.features.spectral_variance);
        }
        if (auto it = j.find("scoring"); it != j.end()) {
            check_keys(*it, {"alpha", "mu", "tau", "beta", "k_graph", "pagerank_damping", "pagerank_tol",
                             "pagerank_max_iter", "graph_include_val", "lambda_red"},
                       "scoring");
            auto& k = c.scoring.coefficients;
            read_opt(*it, "alpha", k.alpha);
            read_opt(*it, "mu", k.mu);
            read_opt(*it, "tau", k.tau);
            read_opt(*it, "beta", k.beta);
            read_opt(*it, "k_graph", c.scoring.k_graph);
            read_opt(*it, "pagerank_damping", c.scoring.pagerank.damping);
            read_opt(*it, "pagerank_tol", c.scoring.pagerank.tol);
            read_opt(*it, "pagerank_max_iter", c.scoring.pagerank.max_iter);
            read_opt(*it, "graph_include_val", c.scoring.graph_include_val);
            read_opt(*it, "lambda_red", c.lambda_red);
        }
        if (auto it = j.find("selection"); it != j.end()) {
            check_keys(*it, {"blend_alpha", "k_dyn", "k_stat"}, "selection");
            read_opt(*it, "blend_alpha", c.selection.blend_alpha);
            read_opt(*it, "k_dyn", c.budgets.k_dyn);
            read_opt(*it, "k_stat", c.budgets.k_stat);
        }
        if (auto it = j.find("strategies"); it != j.end()) {
            c.strategies.clear();
            for (const auto& s : *it) c.strategies.push_back(parse_strategy(s.get<std::string>()));
        }
        if (auto it = j.find("models"); it != j.end()) {
            check_keys(*it, {"classifiers", "knn_k", "l2", "max_iter", "grad_tol", "var_floor"}, "models");
            if (auto cl = it->find("classifiers"); cl != it->end()) {
                c.classifiers.clear();
                for (const auto& s : *cl) c.classifiers.push_back(parse_classifier(s.get<std::string>()));
            }
            read_opt(*it, "knn_k", c.hyperparams.knn_k);
            read_opt(*it, "l2", c.hyperparams.logistic.l2);
            read_opt(*it, "max_iter", c.hyperparams.logistic.max_iter);
            read_opt(*it, "grad_tol", c.hyperparams.logistic.grad_tol);
            read_opt(*it, "var_floor", c.hyperparams.var_floor);
        }
        if (auto it = j.find("gate"); it != j.end()) {
            check_keys(*it, {"enabled", "threshold"}, "gate");
            read_opt(*it, "enabled", c.gate.enabled);
            read_opt(*it, "threshold", c.gate.threshold);
        }
        if (auto it = j.find("llm"); it != j.end()) {
            check_keys(*it, {"mode", "endpoint", "api_key_env", "model", "cache_dir", "fixture_dir"}, "llm");
            std::string mode(llm_mode_name(c.llm.mode));
            read_opt(*it, "mode", mode);
            c.llm.mode = parse_llm_mode(mode);
            read_opt(*it, "endpoint", c.llm.endpoint);
            read_opt(*it, "api_key_env", c.llm.api_key_env);
            read_opt(*it, "model", c.llm.model);
            read_opt(*it, "cache_dir", c.llm.cache_dir);
            read_opt(*it, "fixture_dir", c.llm.fixture_dir);
        }
        if (auto it = j.find("eval"); it != j.end()) {
            check_keys(*it, {"timing_repeats"}, "eval");
            read_opt(*it, "timing_repeats", c.eval.timing_repeats);
        }
        read_opt(j, "seed", c.seed);
        read_opt(j, "threads", c.threads);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    const auto j = nlohmann::json::parse(ss.str(), nullptr, false);
    if (j.is_discarded()) throw ConfigError("config: " + path.string() + " is not valid JSON");
    return config_from_json(j);
}

/// Stable 16-hex-digit hash of the resolved configuration.
inline std::string config_hash(const RunConfig& c) {
    return hex64(fnv1a64(to_json(c).dump()));
}

inline std::map<Activity, int> class_budgets(const KnowledgePrior& prior, const BudgetConfig& b) {
    std::map<Activity, int> out;
    for (Activity a : kAllActivities) out[a] = budget(prior, a, is_dynamic(a) ? b.k_dyn : b.k_stat);
    return out;
}

}  // namespace harsel
