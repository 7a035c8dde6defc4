#pragma once

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "harsel/activity.hpp"
#include "harsel/error.hpp"
#include "harsel/featurizer.hpp"
#include "harsel/fixtures.hpp"
#include "harsel/util.hpp"

namespace harsel {

enum class PromptKind { SemanticFeatures, Knowledge };

inline std::string_view prompt_kind_name(PromptKind k) {
    return k == PromptKind::SemanticFeatures ? "semantic_features" : "knowledge";
}

inline constexpr std::string_view kDefaultModel = "gpt-4o-mini";
inline constexpr int kMaxTokens = 1200;

struct PromptBundle {
    PromptKind kind = PromptKind::Knowledge;
    std::string system_text;
    std::string user_text;
    std::string model_name{kDefaultModel};
    double temperature = 0.0;
    int max_tokens = kMaxTokens;

    /// Stable content hash over (system_text, user_text, model_name).
    std::string hash() const {
        std::uint64_t h = fnv1a64(system_text);
        h = fnv1a64(std::string_view("\x1f", 1), h);
        h = fnv1a64(user_text, h);
        h = fnv1a64(std::string_view("\x1f", 1), h);
        h = fnv1a64(model_name, h);
        return hex64(h);
    }
};

// ---------------------------------------------------------------------------
// Prompt construction

/// Class-wise means rendered as a JSON object, 4 decimals per value.
inline std::string render_means_table(const ClassMeans& means) {
    std::ostringstream os;
    os << '{';
    bool first_row = true;
    for (const auto& [label, values] : means.rows) {
        if (!first_row) os << ", ";
        first_row = false;
        os << '"' << activity_name(label) << "\": {";
        for (std::size_t j = 0; j < values.size(); ++j) {
            char buf[48];
            std::snprintf(buf, sizeof buf, "%.4f", values[j]);
            os << (j ? ", " : "") << '"' << means.columns[j] << "\": " << buf;
        }
        os << '}';
    }
    os << '}';
    return os.str();
}

inline std::string join(std::span<const std::string> items, std::string_view sep = ", ") {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += sep;
        out += items[i];
    }
    return out;
}

/// Semantic-feature design prompt. `means` must come from class_means() over
/// the standardized training base statistics.
inline PromptBundle build_semantic_prompt(const ClassMeans& means,
                                          std::string model = std::string(kDefaultModel)) {
    PromptBundle b;
    b.kind = PromptKind::SemanticFeatures;
    b.model_name = std::move(model);
    b.system_text =
        "You are a sensor-HAR feature designer. Propose compact semantic features as linear "
        "combinations of the provided base channels. Return STRICT JSON only.";
    const auto& names = base_stat_names();
    const std::vector<std::string> base(names.begin(), names.end());
    std::ostringstream u;
    u << "Base channels (standardized): " << join(base) << ".\n"
      << "Class-wise mean table (train only): " << render_means_table(means) << ".\n"
      << "Design 6 discriminative SEMANTIC features (short lowercase names).\n"
      << "Each feature must be a LINEAR combination of the base channels with weights in [-2,2].\n"
      << "Return JSON ONLY like:\n"
      << "{\n"
      << "  \"features\": [\n"
      << "    {\"name\": \"verticality\", \"weights\": {\"acc_z_mean\": 0.8, \"acc_z_std\": 0.6}},\n"
      << "    {\"name\": \"hip_rotation\", \"weights\": {\"gyr_y_std\": 1.1, \"gyr_x_std\": 0.3}},\n"
      << "    ...\n"
      << "  ]}";
    b.user_text = u.str();
    return b;
}

/// Knowledge-induction prompt over the allowed labels and features.
inline PromptBundle build_knowledge_prompt(std::span<const Activity> labels,
                                           std::span<const std::string> features,
                                           const ClassMeans& means,
                                           std::string model = std::string(kDefaultModel)) {
    if (features.empty()) throw ArgumentError("knowledge prompt: feature list is empty");
    if (labels.empty()) throw ArgumentError("knowledge prompt: label list is empty");
    PromptBundle b;
    b.kind = PromptKind::Knowledge;
    b.model_name = std::move(model);
    b.system_text =
        "You are a careful scientific assistant for smartphone inertial HAR. Return a SINGLE "
        "valid JSON object and nothing else. Do not use any test-set information. Use only the "
        "provided labels and features.";
    std::vector<std::string> label_names;
    for (Activity a : labels) label_names.emplace_back(activity_name(a));
    std::ostringstream u;
    u << "We need domain knowledge to guide exemplar selection.\n"
      << "Allowed labels: " << join(label_names) << ".\n"
      << "Allowed features (standardized): " << join(features) << ".\n"
      << "Class-wise means over TRAIN (for context only): " << render_means_table(means) << ".\n"
      << "Return a JSON with keys:\n"
      << "- \"label_feature_weights\": map label->map feature->weight in [-1.5, 1.5]\n"
      << "- \"confusability\": map labelA->map labelB->weight in [0, 1.2]\n"
      << "- \"label_budget_multiplier\": map label->multiplier in [0.8, 1.3]\n"
      << "Rules:\n"
      << "- Use ONLY the allowed labels and features.\n"
      << "- Keep JSON minimal. No comments, no trailing commas, no extra text.";
    b.user_text = u.str();
    return b;
}

/// Leakage audit: returns every number of the val/test class-mean tables
/// (rendered exactly as a prompt would render them) that appears in the
/// prompt but not in the training table. Empty means no leak.
inline std::vector<std::string> audit_prompt_leakage(const PromptBundle& bundle,
                                                     const ClassMeans& train_means,
                                                     const std::vector<ClassMeans>& held_out) {
    auto tokens = [](const ClassMeans& m) {
        std::set<std::string> out;
        for (const auto& [_, values] : m.rows)
            for (double v : values) {
                char buf[48];
                std::snprintf(buf, sizeof buf, "%.4f", v);
                out.insert(buf);
            }
        return out;
    };
    const auto train_tokens = tokens(train_means);
    std::set<std::string> prompt_tokens;
    const std::string& text = bundle.user_text;
    for (std::size_t i = 0; i < text.size();) {
        const bool starts = std::isdigit(static_cast<unsigned char>(text[i])) ||
                            (text[i] == '-' && i + 1 < text.size() &&
                             std::isdigit(static_cast<unsigned char>(text[i + 1])));
        if (!starts) {
            ++i;
            continue;
        }
        std::size_t j = i + 1;
        while (j < text.size() && (std::isdigit(static_cast<unsigned char>(text[j])) || text[j] == '.'))
            ++j;
        prompt_tokens.insert(text.substr(i, j - i));
        i = j;
    }
    std::vector<std::string> leaks;
    for (const auto& m : held_out)
        for (const auto& t : tokens(m))
            if (!train_tokens.count(t) && prompt_tokens.count(t)) leaks.push_back(t);
    return leaks;
}

/// Same summary as class_means() but for held-out subsets, used only by the
/// leakage audit.
inline ClassMeans held_out_class_means(const FeatureMatrix& m,
                                       std::span<const std::string> columns) {
    FeatureMatrix copy = m;
    copy.subset = Subset::Train;
    return class_means(copy, columns);
}

// ---------------------------------------------------------------------------
// Response cache

/// On-disk map from prompt hash to raw response text.
class LlmResponseCache {
public:
    explicit LlmResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

    std::optional<std::string> get(const PromptBundle& b) const {
        std::lock_guard lock(mutex_);
        const auto path = file_for(b);
        std::ifstream in(path);
        if (!in) return std::nullopt;
        try {
            const auto j = nlohmann::json::parse(in);
            return j.at("response").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            return std::nullopt;
        }
    }

    void put(const PromptBundle& b, const std::string& response) {
        std::lock_guard lock(mutex_);
        std::filesystem::create_directories(dir_);
        const nlohmann::ordered_json j = {
            {"kind", prompt_kind_name(b.kind)}, {"model", b.model_name},
            {"system", b.system_text},          {"user", b.user_text},
            {"response", response},
        };
        const auto path = file_for(b);
        const auto tmp = path.string() + ".tmp";
        {
            std::ofstream out(tmp, std::ios::trunc);
            if (!out) throw LoadError("cannot write cache file " + tmp);
            out << j.dump(2) << '\n';
        }
        std::filesystem::rename(tmp, path);
    }

    const std::filesystem::path& dir() const noexcept { return dir_; }

private:
    std::filesystem::path file_for(const PromptBundle& b) const { return dir_ / (b.hash() + ".json"); }

    std::filesystem::path dir_;
    mutable std::mutex mutex_;
};

// ---------------------------------------------------------------------------
// Transport

/// Sends one chat request and returns the assistant message content.
class ChatTransport {
public:
    virtual ~ChatTransport() = default;
    virtual std::string chat(const PromptBundle& bundle) = 0;
};

inline nlohmann::json chat_request_body(const PromptBundle& b) {
    return {
        {"model", b.model_name},
        {"messages",
         nlohmann::json::array({{{"role", "system"}, {"content", b.system_text}},
                                {{"role", "user"}, {"content", b.user_text}}})},
        {"temperature", b.temperature},
        {"max_tokens", b.max_tokens},
    };
}

inline std::string chat_response_content(std::string_view body) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body.begin(), body.end());
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw TransportError(200, std::string("malformed chat-completions response: ") + e.what());
    }
}

/// Minimal OpenAI-compatible client: POST {endpoint}/v1/chat/completions.
class HttpChatTransport final : public ChatTransport {
public:
    HttpChatTransport(std::string endpoint, std::string api_key, int timeout_seconds = 120)
        : api_key_(std::move(api_key)), timeout_(timeout_seconds) {
        // Split "scheme://host[:port]" from any base path.
        const auto scheme_end = endpoint.find("://");
        if (scheme_end == std::string::npos)
            throw ConfigError("llm endpoint must include a scheme: " + endpoint);
        const auto path_start = endpoint.find('/', scheme_end + 3);
        origin_ = endpoint.substr(0, path_start);
        std::string base = path_start == std::string::npos ? "" : endpoint.substr(path_start);
        while (!base.empty() && base.back() == '/') base.pop_back();
        if (base.size() >= 17 && base.ends_with("/chat/completions"))
            path_ = base;
        else if (base.ends_with("/v1"))
            path_ = base + "/chat/completions";
        else
            path_ = base + "/v1/chat/completions";
    }

    std::string chat(const PromptBundle& b) override {
        httplib::Client client(origin_);
        client.set_connection_timeout(timeout_);
        client.set_read_timeout(timeout_);
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
        auto res = client.Post(path_, headers, chat_request_body(b).dump(), "application/json");
        if (!res)
            throw TransportError(-1, "llm request to " + origin_ + path_ + " failed: " +
                                         httplib::to_string(res.error()));
        if (res->status != 200)
            throw TransportError(res->status, "llm endpoint returned HTTP " +
                                                  std::to_string(res->status) + ": " +
                                                  res->body.substr(0, 300));
        return chat_response_content(res->body);
    }

    const std::string& path() const noexcept { return path_; }
    const std::string& origin() const noexcept { return origin_; }

private:
    std::string origin_;
    std::string path_;
    std::string api_key_;
    int timeout_;
};

// ---------------------------------------------------------------------------
// Client

enum class LlmMode { Fixture, Live, CacheFirst };

inline LlmMode parse_llm_mode(std::string_view s) {
    if (s == "fixture") return LlmMode::Fixture;
    if (s == "live") return LlmMode::Live;
    if (s == "cache-first") return LlmMode::CacheFirst;
    throw ConfigError("unknown llm mode '" + std::string(s) + "' (fixture|live|cache-first)");
}

inline std::string_view llm_mode_name(LlmMode m) {
    switch (m) {
        case LlmMode::Fixture: return "fixture";
        case LlmMode::Live: return "live";
        case LlmMode::CacheFirst: return "cache-first";
    }
    return "fixture";
}

struct LlmSettings {
    LlmMode mode = LlmMode::Fixture;
    std::string endpoint;
    /// Name of the environment variable holding the API key.
    std::string api_key_env = "OPENAI_API_KEY";
    std::string model{kDefaultModel};
    std::string cache_dir = ".harsel_cache";
    /// Directory with semantic_features.json / knowledge_prior.json
    /// overriding the bundled fixtures; empty uses the bundled text.
    std::string fixture_dir;
};

inline std::string fixture_file_name(PromptKind k) {
    return k == PromptKind::SemanticFeatures ? "semantic_features.json" : "knowledge_prior.json";
}

class LlmClient {
public:
    explicit LlmClient(LlmSettings settings, std::shared_ptr<ChatTransport> transport = nullptr)
        : settings_(std::move(settings)),
          transport_(std::move(transport)),
          cache_(settings_.cache_dir) {}

    const LlmSettings& settings() const noexcept { return settings_; }
    LlmResponseCache& cache() noexcept { return cache_; }

    std::string complete(const PromptBundle& b) { return complete(b, settings_.mode); }

    std::string complete(const PromptBundle& b, LlmMode mode) {
        switch (mode) {
            case LlmMode::Fixture: return fixture_text(b.kind);
            case LlmMode::CacheFirst:
                if (auto hit = cache_.get(b)) return *hit;
                [[fallthrough]];
            case LlmMode::Live: {
                std::string response = live_transport().chat(b);
                cache_.put(b, response);
                return response;
            }
        }
        throw ConfigError("unreachable llm mode");
    }

    std::string fixture_text(PromptKind kind) const {
        if (settings_.fixture_dir.empty())
            return std::string(kind == PromptKind::SemanticFeatures ? fixtures::kSemanticFeatures
                                                                    : fixtures::kKnowledgePrior);
        const auto path = std::filesystem::path(settings_.fixture_dir) / fixture_file_name(kind);
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw ConfigError("no fixture for prompt kind '" + std::string(prompt_kind_name(kind)) +
                              "' at " + path.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

private:
    ChatTransport& live_transport() {
        std::lock_guard lock(transport_mutex_);
        if (!transport_) {
            if (settings_.endpoint.empty())
                throw ConfigError("live llm mode requires an endpoint URL");
            const char* key = std::getenv(settings_.api_key_env.c_str());
            if (!key || !*key)
                throw ConfigError("live llm mode requires the API key in $" +
                                  settings_.api_key_env);
            transport_ = std::make_shared<HttpChatTransport>(settings_.endpoint, key);
        }
        return *transport_;
    }

    LlmSettings settings_;
    std::shared_ptr<ChatTransport> transport_;
    std::mutex transport_mutex_;
    LlmResponseCache cache_;
};

}  // namespace harsel
