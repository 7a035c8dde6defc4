#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "harsel/datastore.hpp"
#include "harsel/featurizer.hpp"
#include "harsel/fixtures.hpp"
#include "harsel/knowledge.hpp"
#include "harsel/models.hpp"
#include "harsel/util.hpp"

using namespace harsel;

namespace {

struct Labeled {
    Matrix x;
    std::vector<Activity> y;
};

Labeled blobs(const std::vector<std::pair<Activity, std::vector<double>>>& centers,
              std::size_t per, double sd, std::uint64_t seed) {
    Rng rng(seed);
    Labeled out;
    const std::size_t d = centers[0].second.size();
    out.x = Matrix(centers.size() * per, d);
    std::size_t r = 0;
    for (const auto& [label, c] : centers)
        for (std::size_t i = 0; i < per; ++i, ++r) {
            for (std::size_t j = 0; j < d; ++j) out.x(r, j) = c[j] + rng.normal(0.0, sd);
            out.y.push_back(label);
        }
    return out;
}

FeatureMatrix as_features(const Labeled& l) {
    FeatureMatrix m;
    m.values = l.x;
    for (std::size_t c = 0; c < l.x.cols(); ++c) m.column_names.push_back("f" + std::to_string(c));
    m.labels = l.y;
    m.subject_ids.assign(l.y.size(), 1);
    m.subset = Subset::Train;
    return m;
}

double accuracy_of(const std::vector<Activity>& t, const std::vector<Activity>& p) {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < t.size(); ++i) ok += t[i] == p[i];
    return static_cast<double>(ok) / static_cast<double>(t.size());
}

}  // namespace

TEST(Logistic, SeparableBlobsPerfectTrainingAccuracy) {
    const auto d = blobs({{Activity::Walking, {3, 3}}, {Activity::Laying, {-3, -3}}}, 50, 0.5, 1);
    const auto c = Classifier::fit(ClassifierKind::Logistic, d.x, d.y);
    EXPECT_EQ(accuracy_of(d.y, ungated_predict(c, d.x)), 1.0);
}

TEST(Logistic, SymmetricBoundaryIsHalf) {
    Matrix x(2, 2);
    x(0, 0) = 1;
    x(1, 0) = -1;
    const std::vector<Activity> y = {Activity::Sitting, Activity::Standing};
    const auto c = Classifier::fit(ClassifierKind::Logistic, x, y);
    const std::vector<double> mid = {0.0, 0.7};
    const auto p = c.predict_proba_row(mid);
    EXPECT_NEAR(p[index_of(Activity::Sitting)], 0.5, 1e-6);
    EXPECT_NEAR(p[index_of(Activity::Standing)], 0.5, 1e-6);
}

TEST(Logistic, SingleClassIsError) {
    const Matrix x(3, 2, 1.0);
    const std::vector<Activity> y(3, Activity::Walking);
    EXPECT_THROW(Classifier::fit(ClassifierKind::Logistic, x, y), ArgumentError);
}

TEST(Logistic, ConvergesOrHitsIterationCap) {
    const auto d = blobs({{Activity::Walking, {1, 0}}, {Activity::Sitting, {0, 1}},
                          {Activity::Laying, {-1, -1}}},
                         30, 0.8, 2);
    std::vector<std::size_t> yi;
    for (Activity a : d.y) yi.push_back(a == Activity::Walking ? 0 : a == Activity::Sitting ? 1 : 2);
    const std::vector<double> w(d.y.size(), 1.0);
    const auto m = fit_softmax(d.x, yi, w, 3, LogisticOptions{});
    const auto lg = softmax_loss(m.params, 3, d.x, yi, w, 1e-3);
    const double gnorm = std::sqrt(std::inner_product(lg.gradient.begin(), lg.gradient.end(),
                                                      lg.gradient.begin(), 0.0));
    EXPECT_TRUE(m.converged ? gnorm < 1e-6 : m.iterations == 800);
    const auto again = fit_softmax(d.x, yi, w, 3, LogisticOptions{});
    EXPECT_EQ(again.params, m.params);
}

TEST(Logistic, GradientMatchesCentralDifferences) {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 15, dim = 4, k = 3;
        Matrix x(n, dim);
        for (double& v : x.data()) v = rng.normal(0.0, 1.0);
        std::vector<std::size_t> y(n);
        std::vector<double> w(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = rng.below(k);
            w[i] = rng.uniform(0.2, 3.0);
        }
        std::vector<double> p(k * (dim + 1));
        for (double& v : p) v = rng.normal(0.0, 1.0);
        const auto lg = softmax_loss(p, k, x, y, w, 0.05);
        for (std::size_t i = 0; i < p.size(); ++i) {
            auto hi = p, lo = p;
            hi[i] += 1e-5;
            lo[i] -= 1e-5;
            const double fd = (softmax_loss(hi, k, x, y, w, 0.05, false).loss -
                               softmax_loss(lo, k, x, y, w, 0.05, false).loss) /
                              2e-5;
            EXPECT_NEAR(lg.gradient[i], fd, 1e-4 * std::max(1.0, std::abs(fd)));
        }
    }
}

TEST(Knn, OneNeighbourMemorizesTraining) {
    const auto d = blobs({{Activity::Walking, {1, 0, 0}}, {Activity::Sitting, {0, 1, 0}},
                          {Activity::Laying, {0, 0, 1}}},
                         20, 0.3, 4);
    Hyperparams hp;
    hp.knn_k = 1;
    const auto c = Classifier::fit(ClassifierKind::KnnCosine, d.x, d.y, hp);
    EXPECT_EQ(ungated_predict(c, d.x), d.y);
}

TEST(Knn, UnanimousVoteAndWeighting) {
    Matrix x(4, 2);
    x(0, 0) = 1;
    x(1, 0) = 1;
    x(1, 1) = 0.1;
    x(2, 0) = 1;
    x(2, 1) = -0.1;
    x(3, 1) = 1;
    const std::vector<Activity> y = {Activity::Walking, Activity::Walking, Activity::Walking,
                                     Activity::Sitting};
    Hyperparams hp;
    hp.knn_k = 3;
    const auto c = Classifier::fit(ClassifierKind::KnnCosine, x, y, hp);
    const std::vector<double> q = {1, 0};
    EXPECT_DOUBLE_EQ(c.predict_proba_row(q)[index_of(Activity::Walking)], 1.0);

    // k = 2 around (0.6, 0.8): neighbours row3 (sim 0.8) and row1.
    hp.knn_k = 2;
    const auto c2 = Classifier::fit(ClassifierKind::KnnCosine, x, y, hp);
    const std::vector<double> q2 = {0.6, 0.8};
    const double s_sit = 0.8;
    const double s_walk = (0.6 + 0.08) / std::sqrt(1.01);
    const auto p = c2.predict_proba_row(q2);
    EXPECT_NEAR(p[index_of(Activity::Sitting)], s_sit / (s_sit + s_walk), 1e-12);
    EXPECT_NEAR(p[index_of(Activity::Walking)], s_walk / (s_sit + s_walk), 1e-12);
}

TEST(Knn, NegativeSimilaritiesFallBackToCounts) {
    Matrix x(2, 1);
    x(0, 0) = 1;
    x(1, 0) = 2;
    const std::vector<Activity> y = {Activity::Walking, Activity::Sitting};
    const auto c = Classifier::fit(ClassifierKind::KnnCosine, x, y);
    const std::vector<double> q = {-1};
    const auto p = c.predict_proba_row(q);
    EXPECT_DOUBLE_EQ(p[index_of(Activity::Walking)], 0.5);
    EXPECT_DOUBLE_EQ(p[index_of(Activity::Sitting)], 0.5);
}

TEST(GaussianNb, BoundaryAtZeroMatchesClosedForm) {
    const auto d = blobs({{Activity::Sitting, {2.0}}, {Activity::Standing, {-2.0}}}, 100, 1.0, 5);
    const auto c = Classifier::fit(ClassifierKind::GaussianNb, d.x, d.y);
    // Fitted parameters, recomputed independently.
    double m[2] = {0, 0}, v[2] = {0, 0};
    for (std::size_t i = 0; i < 200; ++i) m[i / 100] += d.x(i, 0) / 100.0;
    for (std::size_t i = 0; i < 200; ++i) v[i / 100] += std::pow(d.x(i, 0) - m[i / 100], 2) / 100.0;
    auto posterior_sitting = [&](double x0) {
        auto pdf = [](double x, double mu, double var) {
            return std::exp(-(x - mu) * (x - mu) / (2 * var)) / std::sqrt(2 * std::numbers::pi * var);
        };
        const double a = pdf(x0, m[0], v[0]), b = pdf(x0, m[1], v[1]);
        return a / (a + b);
    };
    double boundary = 0.0;
    for (double lo = -1.0, hi = 1.0; hi - lo > 1e-12;) {
        boundary = 0.5 * (lo + hi);
        const std::vector<double> q = {boundary};
        (c.predict_proba_row(q)[index_of(Activity::Sitting)] < 0.5 ? lo : hi) = boundary;
    }
    EXPECT_NEAR(boundary, 0.0, 0.1);
    for (double x0 : {-1.5, -0.3, 0.0, 0.4, 2.2}) {
        const std::vector<double> q = {x0};
        EXPECT_NEAR(c.predict_proba_row(q)[index_of(Activity::Sitting)], posterior_sitting(x0), 1e-9);
    }
}

TEST(GaussianNb, HandSetOneDimensionalPosterior) {
    // Class A = {0, 2} (mean 1, var 1), class B = {4, 6, 8} (mean 6, var 8/3).
    Matrix x(5, 1);
    const double vals[] = {0, 2, 4, 6, 8};
    for (std::size_t i = 0; i < 5; ++i) x(i, 0) = vals[i];
    const std::vector<Activity> y = {Activity::Walking, Activity::Walking, Activity::Laying,
                                     Activity::Laying, Activity::Laying};
    const auto c = Classifier::fit(ClassifierKind::GaussianNb, x, y);
    const double q0 = 3.0;
    const double va = 1.0, vb = 8.0 / 3.0;
    const double la = 0.4 * std::exp(-(q0 - 1) * (q0 - 1) / (2 * va)) / std::sqrt(va);
    const double lb = 0.6 * std::exp(-(q0 - 6) * (q0 - 6) / (2 * vb)) / std::sqrt(vb);
    const std::vector<double> q = {q0};
    EXPECT_NEAR(c.predict_proba_row(q)[index_of(Activity::Walking)], la / (la + lb), 1e-9);
}

TEST(GaussianNb, ZeroVarianceIsFloored) {
    Matrix x(4, 2);
    x(0, 0) = 1;
    x(1, 0) = 2;
    x(2, 0) = 5;
    x(3, 0) = 6;  // column 1 is constant zero
    const std::vector<Activity> y = {Activity::Sitting, Activity::Sitting, Activity::Laying,
                                     Activity::Laying};
    const auto c = Classifier::fit(ClassifierKind::GaussianNb, x, y);
    const std::vector<double> q = {1.4, 0.0};
    const auto p = c.predict_proba_row(q);
    EXPECT_TRUE(std::isfinite(p[index_of(Activity::Sitting)]));
    EXPECT_GT(p[index_of(Activity::Sitting)], 0.99);
}

TEST(Classifier, RowsAreStochasticForAllKinds) {
    Rng rng(6);
    for (auto kind : {ClassifierKind::KnnCosine, ClassifierKind::Logistic, ClassifierKind::GaussianNb})
        for (int trial = 0; trial < 10; ++trial) {
            const std::size_t n = 12 + rng.below(20), d = 2 + rng.below(5);
            Matrix x(n, d);
            for (double& v : x.data()) v = rng.normal(0.0, 2.0);
            std::vector<Activity> y(n);
            for (std::size_t i = 0; i < n; ++i) y[i] = activity_at(i % (2 + trial % 5));
            const auto c = Classifier::fit(kind, x, y);
            Matrix q(25, d);
            for (double& v : q.data()) v = rng.normal(0.0, 5.0);
            const auto p = c.predict_proba(q);
            ASSERT_EQ(p.cols(), 6u);
            for (std::size_t r = 0; r < p.rows(); ++r) {
                double s = 0.0;
                for (std::size_t j = 0; j < 6; ++j) {
                    EXPECT_GE(p(r, j), 0.0);
                    s += p(r, j);
                    // Classes absent from training get nothing.
                    if (std::find(y.begin(), y.end(), activity_at(j)) == y.end()) {
                        EXPECT_EQ(p(r, j), 0.0);
                    }
                }
                EXPECT_NEAR(s, 1.0, 1e-9);
            }
        }
}

TEST(Classifier, UnfittedIsError) {
    const Classifier c;
    const std::vector<double> q = {1.0};
    EXPECT_THROW(c.predict_proba_row(q), ArgumentError);
}

TEST(Classifier, JsonRoundTripIsExact) {
    const auto d = blobs({{Activity::Walking, {1, 0}}, {Activity::Standing, {0, 1}},
                          {Activity::Laying, {-1, 0}}},
                         15, 0.5, 7);
    for (auto kind : {ClassifierKind::KnnCosine, ClassifierKind::Logistic, ClassifierKind::GaussianNb}) {
        const auto c = Classifier::fit(kind, d.x, d.y);
        const auto back = Classifier::from_json(nlohmann::json::parse(c.to_json().dump()));
        EXPECT_EQ(back.kind(), kind);
        EXPECT_EQ(back.to_json().dump(), c.to_json().dump());
        for (std::size_t r = 0; r < d.x.rows(); ++r)
            EXPECT_EQ(back.predict_proba_row(d.x.row(r)), c.predict_proba_row(d.x.row(r)));
    }
    EXPECT_THROW(Classifier::from_json(nlohmann::json{{"format", "other"}}), Error);
}

TEST(ClassifierNames, RoundTrip) {
    for (auto kind : {ClassifierKind::KnnCosine, ClassifierKind::Logistic, ClassifierKind::GaussianNb})
        EXPECT_EQ(parse_classifier(classifier_name(kind)), kind);
    EXPECT_THROW(parse_classifier("random_forest"), ConfigError);
}

TEST(Gate, SyntheticTrainingAccuracy) {
    const auto ds = apply_split(synthesize(42, 60), DataSplit::standard());
    const auto fs = build_feature_space(ds.train, ds.val, ds.test,
                                        parse_semantic_specs(fixtures::kSemanticFeatures));
    const auto g = fit_gate(fs.train);
    std::size_t ok = 0;
    for (std::size_t r = 0; r < fs.train.rows(); ++r)
        ok += g.route(fs.train.values.row(r)) == domain_of(fs.train.labels[r]);
    EXPECT_GE(static_cast<double>(ok) / static_cast<double>(fs.train.rows()), 0.99);
}

TEST(Gate, ThresholdIsInclusive) {
    GateModel g;
    g.model.classes = 2;
    g.model.dim = 1;
    g.model.params = {0.0, 0.0, 0.0, 0.0};  // equal logits: p_dyn = 0.5 exactly
    const std::vector<double> x = {3.0};
    EXPECT_EQ(g.p_dynamic(x), 0.5);
    EXPECT_EQ(g.route(x), Domain::Dynamic);
    g.threshold = 0.5000001;
    EXPECT_EQ(g.route(x), Domain::Static);
}

TEST(Gate, OneSidedTrainingIsError) {
    const auto d = blobs({{Activity::Sitting, {1}}, {Activity::Laying, {-1}}}, 5, 0.1, 8);
    EXPECT_THROW(fit_gate(as_features(d)), ArgumentError);
}

TEST(Gate, BalancedGradientInvariantToStaticDuplication) {
    const auto d = blobs({{Activity::Walking, {1, 1}}, {Activity::Sitting, {-1, 0}},
                          {Activity::Laying, {0, -1}}},
                         7, 0.6, 9);
    Labeled dup;
    dup.x = Matrix(0, 2);
    for (std::size_t r = 0; r < d.x.rows(); ++r) {
        const int copies = is_dynamic(d.y[r]) ? 1 : 3;
        for (int k = 0; k < copies; ++k) {
            dup.x.append_row(d.x.row(r));
            dup.y.push_back(d.y[r]);
        }
    }
    auto binary = [](const std::vector<Activity>& y) {
        std::vector<std::size_t> out;
        for (Activity a : y) out.push_back(is_dynamic(a) ? 1 : 0);
        return out;
    };
    const std::vector<double> params = {0.3, -0.7, 1.1, 0.2, -0.4, 0.9};
    const auto a = softmax_loss(params, 2, d.x, binary(d.y), balanced_gate_weights(d.y), 1e-3);
    const auto b = softmax_loss(params, 2, dup.x, binary(dup.y), balanced_gate_weights(dup.y), 1e-3);
    for (std::size_t i = 0; i < params.size(); ++i) EXPECT_NEAR(a.gradient[i], b.gradient[i], 1e-12);
    EXPECT_NEAR(a.loss, b.loss, 1e-12);
}

TEST(Gate, JsonRoundTrip) {
    const auto d = blobs({{Activity::Walking, {1, 1}}, {Activity::Sitting, {-1, -1}}}, 10, 0.5, 10);
    const auto g = fit_gate(as_features(d), {}, 0.6);
    const auto back = gate_from_json(nlohmann::json::parse(to_json(g).dump()));
    EXPECT_EQ(back.threshold, 0.6);
    EXPECT_EQ(back.model.params, g.model.params);
}

TEST(Gated, ZeroMassFallsBackToFirstAllowedLabel) {
    ProbaRow q{};
    q[index_of(Activity::Sitting)] = 0.7;
    q[index_of(Activity::Laying)] = 0.3;
    const auto d = gated_distribution(q, Domain::Dynamic);
    for (Activity a : kAllActivities)
        EXPECT_DOUBLE_EQ(d[index_of(a)], is_dynamic(a) ? 1.0 / 3.0 : 0.0);
    EXPECT_EQ(argmax_label(d, Domain::Dynamic), Activity::Walking);
}

TEST(Gated, AllowedArgmaxIsUnchanged) {
    ProbaRow q = {0.1, 0.5, 0.1, 0.2, 0.05, 0.05};
    EXPECT_EQ(argmax_label(gated_distribution(q, Domain::Dynamic), Domain::Dynamic),
              argmax_label(q));
}

TEST(Gated, RenormalizationPreservesRatiosAndStaysInDomain) {
    Rng rng(11);
    for (int trial = 0; trial < 500; ++trial) {
        ProbaRow q{};
        double s = 0.0;
        for (double& v : q) {
            v = rng.uniform() < 0.2 ? 0.0 : rng.uniform();
            s += v;
        }
        if (s > 0)
            for (double& v : q) v /= s;
        const Domain dom = rng.uniform() < 0.5 ? Domain::Static : Domain::Dynamic;
        const auto d = gated_distribution(q, dom);
        EXPECT_NEAR(std::accumulate(d.begin(), d.end(), 0.0), 1.0, 1e-12);
        for (Activity a : kAllActivities)
            for (Activity b : kAllActivities)
                if (domain_of(a) == dom && domain_of(b) == dom && q[index_of(a)] > 0 &&
                    q[index_of(b)] > 0) {
                    EXPECT_NEAR(d[index_of(a)] / d[index_of(b)], q[index_of(a)] / q[index_of(b)],
                                1e-12);
                }
        EXPECT_EQ(domain_of(argmax_label(d, dom)), dom);
    }
}

TEST(Gated, PredictNeverLeavesRoutedDomain) {
    const auto d = blobs({{Activity::Walking, {2, 0}}, {Activity::WalkingUpstairs, {2, 1}},
                          {Activity::Sitting, {-2, 0}}, {Activity::Laying, {-2, -1}}},
                         15, 0.7, 12);
    const auto g = fit_gate(as_features(d));
    for (auto kind : {ClassifierKind::KnnCosine, ClassifierKind::Logistic, ClassifierKind::GaussianNb}) {
        const auto c = Classifier::fit(kind, d.x, d.y);
        Rng rng(13);
        Matrix q(100, 2);
        for (double& v : q.data()) v = rng.normal(0.0, 3.0);
        const auto pred = gated_predict(c, g, q);
        for (std::size_t r = 0; r < q.rows(); ++r)
            EXPECT_EQ(domain_of(pred[r]), g.route(q.row(r)));
    }
}
