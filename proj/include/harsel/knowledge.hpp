#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "harsel/activity.hpp"
#include "harsel/error.hpp"
#include "harsel/featurizer.hpp"
#include "harsel/fixtures.hpp"

namespace harsel {

/// Acceptance ranges enforced by clamping, and the narrower ranges the
/// knowledge prompt asks for. Values outside the prompt range but inside the
/// clamp range are kept and reported as warnings.
struct KnowledgeRanges {
    static constexpr double kWeightMin = -2.0, kWeightMax = 2.0;
    static constexpr double kConfusabilityMin = 0.0, kConfusabilityMax = 1.5;
    static constexpr double kMultiplierMin = 0.8, kMultiplierMax = 1.3;
    static constexpr double kPromptWeightAbs = 1.5;
    static constexpr double kPromptConfusabilityMax = 1.2;
};

/// Validated knowledge object: per-label feature weights, asymmetric
/// confusability (row = true label) and per-label budget multipliers.
/// Entries missing from the maps read as their defaults (0, 0, 1.0).
struct KnowledgePrior {
    std::map<Activity, std::map<std::string, double>> label_feature_weights;
    std::map<Activity, std::map<Activity, double>> confusability;
    std::map<Activity, double> label_budget_multiplier;
    /// Non-fatal notes produced during validation; not part of equality.
    std::vector<std::string> warnings;

    double weight(Activity label, const std::string& feature) const {
        auto it = label_feature_weights.find(label);
        if (it == label_feature_weights.end()) return 0.0;
        auto jt = it->second.find(feature);
        return jt == it->second.end() ? 0.0 : jt->second;
    }

    double confusion(Activity true_label, Activity other) const {
        auto it = confusability.find(true_label);
        if (it == confusability.end()) return 0.0;
        auto jt = it->second.find(other);
        return jt == it->second.end() ? 0.0 : jt->second;
    }

    double multiplier(Activity label) const {
        auto it = label_budget_multiplier.find(label);
        return it == label_budget_multiplier.end() ? 1.0 : it->second;
    }

    friend bool operator==(const KnowledgePrior& a, const KnowledgePrior& b) {
        return a.label_feature_weights == b.label_feature_weights &&
               a.confusability == b.confusability &&
               a.label_budget_multiplier == b.label_budget_multiplier;
    }
};

namespace detail {

inline nlohmann::json parse_single_object(std::string_view raw, std::string_view what) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(raw.begin(), raw.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(std::string(what) + ": not a single JSON object (" + e.what() + ")");
    }
    if (!j.is_object()) throw SchemaError(std::string(what) + ": top level must be a JSON object");
    return j;
}

inline Activity require_label(const std::string& key, const std::set<Activity>& allowed,
                              std::string_view where) {
    auto label = parse_activity(key);
    if (!label || !allowed.count(*label))
        throw ValidationError(std::string(where) + ": unknown label '" + key + "'");
    return *label;
}

}  // namespace detail

/// Parses a raw knowledge response, coerces missing or malformed entries to
/// defaults, clamps values into range and rejects unknown labels/features.
inline KnowledgePrior parse_and_validate(std::string_view raw_text,
                                         std::span<const Activity> allowed_labels,
                                         std::span<const std::string> allowed_features) {
    using R = KnowledgeRanges;
    const auto j = detail::parse_single_object(raw_text, "knowledge");
    const std::set<Activity> labels(allowed_labels.begin(), allowed_labels.end());
    const std::set<std::string> features(allowed_features.begin(), allowed_features.end());
    KnowledgePrior k;

    for (const auto& [key, _] : j.items()) {
        if (key != "label_feature_weights" && key != "confusability" &&
            key != "label_budget_multiplier")
            k.warnings.push_back("knowledge: ignoring unexpected key '" + key + "'");
    }

    auto section = [&](const char* name) -> const nlohmann::json* {
        auto it = j.find(name);
        if (it == j.end()) {
            k.warnings.push_back(std::string("knowledge: missing '") + name + "', using defaults");
            return nullptr;
        }
        if (!it->is_object()) {
            k.warnings.push_back(std::string("knowledge: '") + name +
                                 "' is not an object, using defaults");
            return nullptr;
        }
        return &*it;
    };

    if (const auto* w = section("label_feature_weights")) {
        for (const auto& [label_key, fmap] : w->items()) {
            const Activity label = detail::require_label(label_key, labels, "label_feature_weights");
            auto& dst = k.label_feature_weights[label];
            if (!fmap.is_object()) {
                k.warnings.push_back("label_feature_weights[" + label_key + "] is not an object");
                continue;
            }
            for (const auto& [feature, value] : fmap.items()) {
                if (!features.count(feature))
                    throw ValidationError("label_feature_weights[" + label_key +
                                          "]: unknown feature '" + feature + "'");
                if (!value.is_number()) {
                    k.warnings.push_back("label_feature_weights[" + label_key + "][" + feature +
                                         "] is not a number, using 0");
                    continue;
                }
                const double raw = value.get<double>();
                if (std::abs(raw) > R::kPromptWeightAbs && std::abs(raw) <= R::kWeightMax)
                    k.warnings.push_back("label_feature_weights[" + label_key + "][" + feature +
                                         "] outside the prompt range [-1.5, 1.5]");
                dst[feature] = std::clamp(raw, R::kWeightMin, R::kWeightMax);
            }
        }
    }

    if (const auto* c = section("confusability")) {
        for (const auto& [a_key, row] : c->items()) {
            const Activity a = detail::require_label(a_key, labels, "confusability");
            auto& dst = k.confusability[a];
            if (!row.is_object()) {
                k.warnings.push_back("confusability[" + a_key + "] is not an object");
                continue;
            }
            for (const auto& [b_key, value] : row.items()) {
                const Activity b = detail::require_label(b_key, labels, "confusability");
                if (a == b) {
                    k.warnings.push_back("confusability: dropping self pair " + a_key);
                    continue;
                }
                if (!value.is_number()) {
                    k.warnings.push_back("confusability[" + a_key + "][" + b_key +
                                         "] is not a number, using 0");
                    continue;
                }
                const double raw = value.get<double>();
                if (raw > R::kPromptConfusabilityMax && raw <= R::kConfusabilityMax)
                    k.warnings.push_back("confusability[" + a_key + "][" + b_key +
                                         "] outside the prompt range [0, 1.2]");
                dst[b] = std::clamp(raw, R::kConfusabilityMin, R::kConfusabilityMax);
            }
        }
    }

    for (Activity a : labels) k.label_budget_multiplier[a] = 1.0;
    if (const auto* m = section("label_budget_multiplier")) {
        for (const auto& [label_key, value] : m->items()) {
            const Activity label =
                detail::require_label(label_key, labels, "label_budget_multiplier");
            if (!value.is_number()) {
                k.warnings.push_back("label_budget_multiplier[" + label_key +
                                     "] is not a number, using 1.0");
                continue;
            }
            k.label_budget_multiplier[label] =
                std::clamp(value.get<double>(), R::kMultiplierMin, R::kMultiplierMax);
        }
    }
    return k;
}

inline KnowledgePrior parse_and_validate(std::string_view raw_text,
                                         std::span<const std::string> allowed_features) {
    return parse_and_validate(raw_text, kAllActivities, allowed_features);
}

inline nlohmann::ordered_json to_json(const KnowledgePrior& k) {
    nlohmann::ordered_json j;
    auto& w = j["label_feature_weights"] = nlohmann::ordered_json::object();
    for (const auto& [label, fmap] : k.label_feature_weights) {
        auto& row = w[std::string(activity_name(label))] = nlohmann::ordered_json::object();
        for (const auto& [f, v] : fmap) row[f] = v;
    }
    auto& c = j["confusability"] = nlohmann::ordered_json::object();
    for (const auto& [a, row] : k.confusability) {
        auto& dst = c[std::string(activity_name(a))] = nlohmann::ordered_json::object();
        for (const auto& [b, v] : row) dst[std::string(activity_name(b))] = v;
    }
    auto& m = j["label_budget_multiplier"] = nlohmann::ordered_json::object();
    for (const auto& [a, v] : k.label_budget_multiplier) m[std::string(activity_name(a))] = v;
    return j;
}

/// w_label aligned to `feature_columns`; features the prior does not weight get 0.
inline std::vector<double> weight_vector(const KnowledgePrior& k, Activity label,
                                         std::span<const std::string> feature_columns) {
    std::vector<double> w;
    w.reserve(feature_columns.size());
    for (const auto& f : feature_columns) w.push_back(k.weight(label, f));
    return w;
}

/// Per-class exemplar budget: round-half-up(base_k * multiplier), at least 1.
inline int budget(const KnowledgePrior& k, Activity label, int base_k) {
    if (base_k < 1) throw ArgumentError("budget: base_k must be >= 1");
    const double scaled = static_cast<double>(base_k) * k.multiplier(label);
    // Nudge so products like 2 * 1.25 stored as 2.4999999… still round up.
    const int rounded = static_cast<int>(std::floor(scaled + 0.5 + 1e-9));
    return std::max(1, rounded);
}

// ---------------------------------------------------------------------------
// Semantic feature specs

inline bool is_lowercase_identifier(std::string_view s) {
    if (s.empty() || !(s[0] >= 'a' && s[0] <= 'z')) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
    });
}

inline constexpr double kSemanticWeightAbs = 2.0;

/// Parses `{"features":[{"name":..., "weights":{base_stat: coef}}]}`.
inline std::vector<SemanticFeatureSpec> parse_semantic_specs(std::string_view raw_text) {
    const auto j = detail::parse_single_object(raw_text, "semantic features");
    auto it = j.find("features");
    if (it == j.end() || !it->is_array())
        throw SchemaError("semantic features: missing 'features' array");
    std::vector<SemanticFeatureSpec> out;
    std::set<std::string> names;
    for (const auto& f : *it) {
        if (!f.is_object() || !f.contains("name") || !f["name"].is_string() ||
            !f.contains("weights") || !f["weights"].is_object())
            throw SchemaError("semantic features: each entry needs a string 'name' and object 'weights'");
        SemanticFeatureSpec spec;
        spec.name = f["name"].get<std::string>();
        if (!is_lowercase_identifier(spec.name))
            throw ValidationError("semantic feature name '" + spec.name +
                                  "' is not a lowercase identifier");
        if (base_stat_index(spec.name))
            throw ValidationError("semantic feature name '" + spec.name +
                                  "' shadows a base statistic");
        if (!names.insert(spec.name).second)
            throw ValidationError("semantic feature name '" + spec.name + "' is duplicated");
        for (const auto& [key, value] : f["weights"].items()) {
            if (!base_stat_index(key))
                throw ValidationError("semantic feature '" + spec.name +
                                      "': unknown base statistic '" + key + "'");
            if (!value.is_number())
                throw ValidationError("semantic feature '" + spec.name + "': weight for '" + key +
                                      "' is not a number");
            const double v = value.get<double>();
            if (std::abs(v) > kSemanticWeightAbs)
                throw ValidationError("semantic feature '" + spec.name + "': weight for '" + key +
                                      "' outside [-2, 2]");
            spec.weights.emplace_back(key, v);
        }
        out.push_back(std::move(spec));
    }
    if (out.empty()) throw ValidationError("semantic features: empty feature list");
    return out;
}

inline nlohmann::ordered_json to_json(const std::vector<SemanticFeatureSpec>& specs) {
    nlohmann::ordered_json features = nlohmann::ordered_json::array();
    for (const auto& s : specs) {
        nlohmann::ordered_json w = nlohmann::ordered_json::object();
        for (const auto& [k, v] : s.weights) w[k] = v;
        features.push_back({{"name", s.name}, {"weights", w}});
    }
    return {{"features", features}};
}

}  // namespace harsel
