#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "harsel/activity.hpp"
#include "harsel/error.hpp"
#include "harsel/featurizer.hpp"
#include "harsel/matrix.hpp"
#include "harsel/util.hpp"

namespace harsel {

// ---------------------------------------------------------------------------
// Multinomial logistic regression core

struct LogisticOptions {
    double l2 = 1e-3;
    int max_iter = 800;
    double grad_tol = 1e-6;
};

/// Softmax model over `classes` outputs. Parameters are laid out as the
/// row-major weight matrix (classes x dim) followed by the biases.
struct SoftmaxModel {
    std::size_t classes = 0;
    std::size_t dim = 0;
    std::vector<double> params;
    int iterations = 0;
    bool converged = false;

    std::size_t param_count() const noexcept { return classes * (dim + 1); }

    void probabilities(std::span<const double> x, std::span<double> out) const {
        softmax_row(params, classes, dim, x, out);
    }

    static void softmax_row(std::span<const double> params, std::size_t classes, std::size_t dim,
                            std::span<const double> x, std::span<double> out) {
        double max_logit = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < classes; ++c) {
            double z = params[classes * dim + c];
            const double* w = params.data() + c * dim;
            for (std::size_t i = 0; i < dim; ++i) z += w[i] * x[i];
            out[c] = z;
            max_logit = std::max(max_logit, z);
        }
        double sum = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
            out[c] = std::exp(out[c] - max_logit);
            sum += out[c];
        }
        for (std::size_t c = 0; c < classes; ++c) out[c] /= sum;
    }
};

struct LossAndGradient {
    double loss = 0.0;
    std::vector<double> gradient;
};

/// Weighted mean cross-entropy, normalized by the total sample weight, plus
/// (l2 / 2) * ||W||^2 (biases unpenalized).
inline LossAndGradient softmax_loss(std::span<const double> params, std::size_t classes,
                                    const Matrix& x, std::span<const std::size_t> y,
                                    std::span<const double> weights, double l2,
                                    bool with_gradient = true) {
    const std::size_t dim = x.cols();
    LossAndGradient out;
    if (with_gradient) out.gradient.assign(classes * (dim + 1), 0.0);
    const double total_w = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<double> p(classes);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto row = x.row(r);
        SoftmaxModel::softmax_row(params, classes, dim, row, p);
        const double w = weights[r] / total_w;
        out.loss -= w * std::log(std::max(p[y[r]], std::numeric_limits<double>::min()));
        if (!with_gradient) continue;
        for (std::size_t c = 0; c < classes; ++c) {
            const double coeff = w * (p[c] - (c == y[r] ? 1.0 : 0.0));
            double* g = out.gradient.data() + c * dim;
            for (std::size_t i = 0; i < dim; ++i) g[i] += coeff * row[i];
            out.gradient[classes * dim + c] += coeff;
        }
    }
    double reg = 0.0;
    for (std::size_t i = 0; i < classes * dim; ++i) {
        reg += params[i] * params[i];
        if (with_gradient) out.gradient[i] += l2 * params[i];
    }
    out.loss += 0.5 * l2 * reg;
    return out;
}

/// Full-batch gradient descent with Armijo backtracking from zero init.
inline SoftmaxModel fit_softmax(const Matrix& x, std::span<const std::size_t> y,
                                std::span<const double> weights, std::size_t classes,
                                const LogisticOptions& opt) {
    if (x.rows() == 0) throw ArgumentError("logistic: no training rows");
    SoftmaxModel m;
    m.classes = classes;
    m.dim = x.cols();
    m.params.assign(m.param_count(), 0.0);
    double step = 1.0;
    auto cur = softmax_loss(m.params, classes, x, y, weights, opt.l2);
    std::vector<double> trial(m.params.size());
    for (int it = 0; it < opt.max_iter; ++it) {
        const double gnorm2 = dot(cur.gradient, cur.gradient);
        if (std::sqrt(gnorm2) < opt.grad_tol) {
            m.converged = true;
            break;
        }
        step = std::min(step * 2.0, 1e6);
        double trial_loss = 0.0;
        while (true) {
            for (std::size_t i = 0; i < trial.size(); ++i)
                trial[i] = m.params[i] - step * cur.gradient[i];
            trial_loss = softmax_loss(trial, classes, x, y, weights, opt.l2, false).loss;
            if (trial_loss <= cur.loss - 1e-4 * step * gnorm2 || step < 1e-20) break;
            step *= 0.5;
        }
        m.params.swap(trial);
        cur = softmax_loss(m.params, classes, x, y, weights, opt.l2);
        m.iterations = it + 1;
    }
    if (!m.converged && std::sqrt(dot(cur.gradient, cur.gradient)) < opt.grad_tol) m.converged = true;
    return m;
}

// ---------------------------------------------------------------------------
// Classifiers

enum class ClassifierKind { KnnCosine, Logistic, GaussianNb };

inline std::string_view classifier_name(ClassifierKind k) {
    switch (k) {
        case ClassifierKind::KnnCosine: return "knn_cosine";
        case ClassifierKind::Logistic: return "logistic";
        case ClassifierKind::GaussianNb: return "gaussian_nb";
    }
    return "logistic";
}

inline ClassifierKind parse_classifier(std::string_view s) {
    for (auto k : {ClassifierKind::KnnCosine, ClassifierKind::Logistic, ClassifierKind::GaussianNb})
        if (classifier_name(k) == s) return k;
    throw ConfigError("unknown classifier '" + std::string(s) +
                      "' (knn_cosine|logistic|gaussian_nb)");
}

struct Hyperparams {
    std::size_t knn_k = 5;
    LogisticOptions logistic;
    double var_floor = 1e-9;
};

/// Row-stochastic over the six activities; absent classes get probability 0.
using ProbaRow = std::array<double, kNumActivities>;

class Classifier {
public:
    Classifier() = default;

    static Classifier fit(ClassifierKind kind, const Matrix& x, std::span<const Activity> y,
                          const Hyperparams& hp = {}) {
        if (x.rows() != y.size()) throw ArgumentError("fit: label count does not match rows");
        if (x.rows() == 0) throw ArgumentError("fit: no training rows");
        Classifier c;
        c.kind_ = kind;
        c.hp_ = hp;
        c.dim_ = x.cols();
        for (Activity a : kAllActivities)
            if (std::find(y.begin(), y.end(), a) != y.end()) c.classes_.push_back(a);

        switch (kind) {
            case ClassifierKind::KnnCosine:
                c.exemplars_ = normalize_rows(x);
                c.exemplar_labels_.assign(y.begin(), y.end());
                break;
            case ClassifierKind::Logistic: {
                if (c.classes_.size() < 2)
                    throw ArgumentError("logistic: need at least two classes");
                std::vector<std::size_t> yi;
                for (Activity a : y) yi.push_back(c.class_position(a));
                const std::vector<double> w(y.size(), 1.0);
                c.softmax_ = fit_softmax(x, yi, w, c.classes_.size(), hp.logistic);
                break;
            }
            case ClassifierKind::GaussianNb: {
                const std::size_t k = c.classes_.size();
                c.means_ = Matrix(k, c.dim_);
                c.vars_ = Matrix(k, c.dim_);
                std::vector<double> counts(k, 0.0);
                for (std::size_t r = 0; r < x.rows(); ++r) {
                    const std::size_t ci = c.class_position(y[r]);
                    counts[ci] += 1.0;
                    for (std::size_t i = 0; i < c.dim_; ++i) c.means_(ci, i) += x(r, i);
                }
                for (std::size_t ci = 0; ci < k; ++ci)
                    for (std::size_t i = 0; i < c.dim_; ++i) c.means_(ci, i) /= counts[ci];
                for (std::size_t r = 0; r < x.rows(); ++r) {
                    const std::size_t ci = c.class_position(y[r]);
                    for (std::size_t i = 0; i < c.dim_; ++i) {
                        const double d = x(r, i) - c.means_(ci, i);
                        c.vars_(ci, i) += d * d;
                    }
                }
                for (std::size_t ci = 0; ci < k; ++ci)
                    for (std::size_t i = 0; i < c.dim_; ++i)
                        c.vars_(ci, i) = std::max(c.vars_(ci, i) / counts[ci], hp.var_floor);
                for (double n : counts)
                    c.log_priors_.push_back(std::log(n / static_cast<double>(x.rows())));
                break;
            }
        }
        c.fitted_ = true;
        return c;
    }

    bool fitted() const noexcept { return fitted_; }
    ClassifierKind kind() const noexcept { return kind_; }
    const Hyperparams& hyperparams() const noexcept { return hp_; }
    const std::vector<Activity>& classes() const noexcept { return classes_; }
    std::size_t dim() const noexcept { return dim_; }
    const SoftmaxModel& softmax() const noexcept { return softmax_; }

    ProbaRow predict_proba_row(std::span<const double> x) const {
        if (!fitted_) throw ArgumentError("predict_proba: classifier is not fitted");
        if (x.size() != dim_) throw ArgumentError("predict_proba: width mismatch");
        ProbaRow out{};
        switch (kind_) {
            case ClassifierKind::KnnCosine: knn_row(x, out); break;
            case ClassifierKind::Logistic: {
                std::vector<double> p(classes_.size());
                softmax_.probabilities(x, p);
                for (std::size_t c = 0; c < classes_.size(); ++c) out[index_of(classes_[c])] = p[c];
                break;
            }
            case ClassifierKind::GaussianNb: gnb_row(x, out); break;
        }
        return out;
    }

    Matrix predict_proba(const Matrix& x) const {
        Matrix out(x.rows(), kNumActivities);
        for (std::size_t r = 0; r < x.rows(); ++r) {
            const auto p = predict_proba_row(x.row(r));
            std::copy(p.begin(), p.end(), out.row(r).begin());
        }
        return out;
    }

    nlohmann::ordered_json to_json() const;
    static Classifier from_json(const nlohmann::json& j);

private:
    std::size_t class_position(Activity a) const {
        for (std::size_t i = 0; i < classes_.size(); ++i)
            if (classes_[i] == a) return i;
        throw ArgumentError("classifier: unknown class");
    }

    /// Similarity-weighted vote over the k most similar exemplars (ties by
    /// lower index); weights floored at 0, falling back to plain counts when
    /// every weight is 0.
    void knn_row(std::span<const double> x, ProbaRow& out) const {
        const std::size_t n = exemplars_.rows();
        const double xn = norm(x);
        std::vector<std::pair<double, std::size_t>> sims(n);
        for (std::size_t j = 0; j < n; ++j)
            sims[j] = {xn < kZeroNorm ? 0.0 : dot(x, exemplars_.row(j)) / xn, j};
        const std::size_t k = std::min(hp_.knn_k, n);
        std::partial_sort(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(k), sims.end(),
                          [](const auto& a, const auto& b) {
                              if (a.first != b.first) return a.first > b.first;
                              return a.second < b.second;
                          });
        double total = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            const double w = std::max(0.0, sims[i].first);
            out[index_of(exemplar_labels_[sims[i].second])] += w;
            total += w;
        }
        if (total <= 0.0) {
            out.fill(0.0);
            for (std::size_t i = 0; i < k; ++i) out[index_of(exemplar_labels_[sims[i].second])] += 1.0;
            total = static_cast<double>(k);
        }
        for (double& v : out) v /= total;
    }

    void gnb_row(std::span<const double> x, ProbaRow& out) const {
        const std::size_t k = classes_.size();
        std::vector<double> logp(k);
        double max_lp = -std::numeric_limits<double>::infinity();
        for (std::size_t ci = 0; ci < k; ++ci) {
            double lp = log_priors_[ci];
            for (std::size_t i = 0; i < dim_; ++i) {
                const double v = vars_(ci, i);
                const double d = x[i] - means_(ci, i);
                lp -= 0.5 * std::log(2.0 * std::numbers::pi * v) + d * d / (2.0 * v);
            }
            logp[ci] = lp;
            max_lp = std::max(max_lp, lp);
        }
        double sum = 0.0;
        for (double& lp : logp) {
            lp = std::exp(lp - max_lp);
            sum += lp;
        }
        for (std::size_t ci = 0; ci < k; ++ci) out[index_of(classes_[ci])] = logp[ci] / sum;
    }

    ClassifierKind kind_ = ClassifierKind::Logistic;
    Hyperparams hp_;
    bool fitted_ = false;
    std::size_t dim_ = 0;
    std::vector<Activity> classes_;
    // knn
    Matrix exemplars_;
    std::vector<Activity> exemplar_labels_;
    // logistic
    SoftmaxModel softmax_;
    // gaussian nb
    Matrix means_;
    Matrix vars_;
    std::vector<double> log_priors_;
};

// ---------------------------------------------------------------------------
// Gate

/// Binary STATIC-vs-DYNAMIC logistic model; p_dyn >= threshold routes to DYNAMIC.
struct GateModel {
    SoftmaxModel model;
    double threshold = 0.5;

    double p_dynamic(std::span<const double> x) const {
        std::array<double, 2> p{};
        model.probabilities(x, p);
        return p[1];
    }

    Domain route(std::span<const double> x) const {
        return p_dynamic(x) >= threshold ? Domain::Dynamic : Domain::Static;
    }
};

/// Trained on all training rows with class-balanced weights n / (2 n_side).
inline GateModel fit_gate(const FeatureMatrix& train, const LogisticOptions& opt = {},
                          double threshold = 0.5) {
    std::vector<std::size_t> y;
    std::size_t n_dyn = 0;
    for (Activity a : train.labels) {
        const bool d = is_dynamic(a);
        y.push_back(d ? 1 : 0);
        n_dyn += d;
    }
    const std::size_t n = y.size();
    const std::size_t n_stat = n - n_dyn;
    if (n_dyn == 0 || n_stat == 0)
        throw ArgumentError("fit_gate: need both static and dynamic training rows");
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i)
        w[i] = static_cast<double>(n) / (2.0 * static_cast<double>(y[i] ? n_dyn : n_stat));
    GateModel g;
    g.model = fit_softmax(train.values, y, w, 2, opt);
    g.threshold = threshold;
    return g;
}

/// Balanced gate sample weights, exposed for gradient checks.
inline std::vector<double> balanced_gate_weights(std::span<const Activity> labels) {
    std::size_t n_dyn = 0;
    for (Activity a : labels) n_dyn += is_dynamic(a);
    const std::size_t n = labels.size();
    std::vector<double> w;
    for (Activity a : labels)
        w.push_back(static_cast<double>(n) /
                    (2.0 * static_cast<double>(is_dynamic(a) ? n_dyn : n - n_dyn)));
    return w;
}

/// Masks q to the activities of `allowed` and renormalizes; uniform over the
/// allowed set when the masked mass is not positive.
inline ProbaRow gated_distribution(const ProbaRow& q, Domain allowed) {
    ProbaRow d{};
    double s = 0.0;
    for (Activity a : kAllActivities)
        if (domain_of(a) == allowed) {
            d[index_of(a)] = q[index_of(a)];
            s += q[index_of(a)];
        }
    if (s <= 0.0) {
        for (Activity a : kAllActivities) d[index_of(a)] = domain_of(a) == allowed ? 1.0 / 3.0 : 0.0;
        return d;
    }
    for (double& v : d) v /= s;
    return d;
}

/// Argmax with the lowest label index winning ties; only entries with
/// `domain` (when given) are eligible.
inline Activity argmax_label(const ProbaRow& p, std::optional<Domain> domain = std::nullopt) {
    std::optional<Activity> best;
    for (Activity a : kAllActivities) {
        if (domain && domain_of(a) != *domain) continue;
        if (!best || p[index_of(a)] > p[index_of(*best)]) best = a;
    }
    return *best;
}

inline std::vector<Activity> gated_predict(const Classifier& c, const GateModel& g,
                                           const Matrix& x) {
    std::vector<Activity> out;
    out.reserve(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const Domain dom = g.route(x.row(r));
        out.push_back(argmax_label(gated_distribution(c.predict_proba_row(x.row(r)), dom), dom));
    }
    return out;
}

inline std::vector<Activity> ungated_predict(const Classifier& c, const Matrix& x) {
    std::vector<Activity> out;
    out.reserve(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) out.push_back(argmax_label(c.predict_proba_row(x.row(r))));
    return out;
}

// ---------------------------------------------------------------------------
// Persistence: versioned JSON, parameters as decimal strings

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline nlohmann::ordered_json encode(std::span<const double> v) {
    auto a = nlohmann::ordered_json::array();
    for (double x : v) a.push_back(format_double(x));
    return a;
}

inline std::vector<double> decode(const nlohmann::json& a) {
    std::vector<double> out;
    for (const auto& s : a) out.push_back(std::stod(s.get<std::string>()));
    return out;
}

inline nlohmann::ordered_json encode(const Matrix& m) {
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", encode(m.data())}};
}

inline Matrix decode_matrix(const nlohmann::json& j) {
    Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    const auto v = decode(j.at("data"));
    if (v.size() != m.rows() * m.cols()) throw FormatError("model json: matrix size mismatch");
    std::copy(v.begin(), v.end(), m.data().begin());
    return m;
}

inline nlohmann::ordered_json encode(const SoftmaxModel& s) {
    return {{"classes", s.classes}, {"dim", s.dim}, {"params", encode(s.params)}};
}

inline SoftmaxModel decode_softmax(const nlohmann::json& j) {
    SoftmaxModel s;
    s.classes = j.at("classes").get<std::size_t>();
    s.dim = j.at("dim").get<std::size_t>();
    s.params = decode(j.at("params"));
    if (s.params.size() != s.param_count()) throw FormatError("model json: parameter count mismatch");
    s.converged = true;
    return s;
}

inline nlohmann::ordered_json encode_labels(std::span<const Activity> labels) {
    auto a = nlohmann::ordered_json::array();
    for (Activity l : labels) a.push_back(std::string(activity_name(l)));
    return a;
}

inline std::vector<Activity> decode_labels(const nlohmann::json& a) {
    std::vector<Activity> out;
    for (const auto& s : a) {
        auto l = parse_activity(s.get<std::string>());
        if (!l) throw FormatError("model json: unknown label");
        out.push_back(*l);
    }
    return out;
}

}  // namespace detail

inline nlohmann::ordered_json Classifier::to_json() const {
    if (!fitted_) throw ArgumentError("to_json: classifier is not fitted");
    nlohmann::ordered_json j;
    j["format"] = "harsel.classifier";
    j["version"] = kModelFormatVersion;
    j["kind"] = std::string(classifier_name(kind_));
    j["hyperparams"] = {{"knn_k", hp_.knn_k},
                        {"l2", format_double(hp_.logistic.l2)},
                        {"max_iter", hp_.logistic.max_iter},
                        {"grad_tol", format_double(hp_.logistic.grad_tol)},
                        {"var_floor", format_double(hp_.var_floor)}};
    j["dim"] = dim_;
    j["classes"] = detail::encode_labels(classes_);
    switch (kind_) {
        case ClassifierKind::KnnCosine:
            j["exemplars"] = detail::encode(exemplars_);
            j["exemplar_labels"] = detail::encode_labels(exemplar_labels_);
            break;
        case ClassifierKind::Logistic: j["softmax"] = detail::encode(softmax_); break;
        case ClassifierKind::GaussianNb:
            j["means"] = detail::encode(means_);
            j["vars"] = detail::encode(vars_);
            j["log_priors"] = detail::encode(log_priors_);
            break;
    }
    return j;
}

inline Classifier Classifier::from_json(const nlohmann::json& j) {
    try {
        if (j.at("format") != "harsel.classifier") throw FormatError("not a classifier document");
        if (j.at("version").get<int>() != kModelFormatVersion)
            throw FormatError("unsupported classifier format version");
        Classifier c;
        c.kind_ = parse_classifier(j.at("kind").get<std::string>());
        const auto& hp = j.at("hyperparams");
        c.hp_.knn_k = hp.at("knn_k").get<std::size_t>();
        c.hp_.logistic.l2 = std::stod(hp.at("l2").get<std::string>());
        c.hp_.logistic.max_iter = hp.at("max_iter").get<int>();
        c.hp_.logistic.grad_tol = std::stod(hp.at("grad_tol").get<std::string>());
        c.hp_.var_floor = std::stod(hp.at("var_floor").get<std::string>());
        c.dim_ = j.at("dim").get<std::size_t>();
        c.classes_ = detail::decode_labels(j.at("classes"));
        switch (c.kind_) {
            case ClassifierKind::KnnCosine:
                c.exemplars_ = detail::decode_matrix(j.at("exemplars"));
                c.exemplar_labels_ = detail::decode_labels(j.at("exemplar_labels"));
                break;
            case ClassifierKind::Logistic: c.softmax_ = detail::decode_softmax(j.at("softmax")); break;
            case ClassifierKind::GaussianNb:
                c.means_ = detail::decode_matrix(j.at("means"));
                c.vars_ = detail::decode_matrix(j.at("vars"));
                c.log_priors_ = detail::decode(j.at("log_priors"));
                break;
        }
        c.fitted_ = true;
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("classifier json: ") + e.what());
    }
}

inline nlohmann::ordered_json to_json(const GateModel& g) {
    nlohmann::ordered_json j;
    j["format"] = "harsel.gate";
    j["version"] = kModelFormatVersion;
    j["threshold"] = format_double(g.threshold);
    j["softmax"] = detail::encode(g.model);
    return j;
}

inline GateModel gate_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format") != "harsel.gate") throw FormatError("not a gate document");
        if (j.at("version").get<int>() != kModelFormatVersion)
            throw FormatError("unsupported gate format version");
        GateModel g;
        g.threshold = std::stod(j.at("threshold").get<std::string>());
        g.model = detail::decode_softmax(j.at("softmax"));
        return g;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("gate json: ") + e.what());
    }
}

}  // namespace harsel
