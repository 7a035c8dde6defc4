#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "harsel/activity.hpp"
#include "harsel/datastore.hpp"
#include "harsel/error.hpp"
#include "harsel/matrix.hpp"
#include "harsel/util.hpp"

namespace harsel {

inline constexpr std::size_t kBaseStats = 12;
inline constexpr std::size_t kSpectrumBins = kWindowLength / 2 + 1;  // 65
inline constexpr std::size_t kSpectralValues = kSpectrumBins * kChannels;

/// acc_x_mean, acc_x_std, ..., gyr_z_mean, gyr_z_std.
inline const std::array<std::string, kBaseStats>& base_stat_names() {
    static const std::array<std::string, kBaseStats> names = [] {
        std::array<std::string, kBaseStats> n;
        for (std::size_t c = 0; c < kChannels; ++c) {
            n[2 * c] = std::string(kChannelNames[c]) + "_mean";
            n[2 * c + 1] = std::string(kChannelNames[c]) + "_std";
        }
        return n;
    }();
    return names;
}

inline std::optional<std::size_t> base_stat_index(std::string_view name) {
    const auto& names = base_stat_names();
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return i;
    return std::nullopt;
}

/// Which subset a feature matrix was derived from. Fit functions and prompt
/// construction refuse anything but Train.
enum class Subset { Train, Val, Test, Unspecified };

/// Row-per-window feature matrix with column names and annotations.
struct FeatureMatrix {
    Matrix values;
    std::vector<std::string> column_names;
    std::vector<Activity> labels;
    std::vector<int> subject_ids;
    Subset subset = Subset::Unspecified;

    std::size_t rows() const noexcept { return values.rows(); }
    std::size_t cols() const noexcept { return values.cols(); }

    std::optional<std::size_t> column_index(std::string_view name) const {
        for (std::size_t i = 0; i < column_names.size(); ++i)
            if (column_names[i] == name) return i;
        return std::nullopt;
    }

    void validate() const {
        if (column_names.size() != values.cols())
            throw FormatError("feature matrix: column_names length does not match width");
        std::set<std::string> unique(column_names.begin(), column_names.end());
        if (unique.size() != column_names.size())
            throw FormatError("feature matrix: duplicate column names");
        if (labels.size() != values.rows() || subject_ids.size() != values.rows())
            throw FormatError("feature matrix: annotation length does not match row count");
        for (double v : values.data())
            if (!std::isfinite(v)) throw FormatError("feature matrix: non-finite entry");
    }

    FeatureMatrix select_rows(std::span<const std::size_t> idx) const {
        FeatureMatrix out;
        out.values = values.select_rows(idx);
        out.column_names = column_names;
        out.subset = subset;
        for (std::size_t i : idx) {
            out.labels.push_back(labels[i]);
            out.subject_ids.push_back(subject_ids[i]);
        }
        return out;
    }

    /// Row indices carrying label `a`, ascending.
    std::vector<std::size_t> rows_of(Activity a) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == a) out.push_back(i);
        return out;
    }
};

inline void write_feature_csv(std::ostream& os, const FeatureMatrix& m) {
    os << "subject,label";
    for (const auto& c : m.column_names) os << ',' << c;
    os << '\n';
    for (std::size_t r = 0; r < m.rows(); ++r) {
        os << m.subject_ids[r] << ',' << activity_name(m.labels[r]);
        for (double v : m.values.row(r)) os << ',' << format_double(v);
        os << '\n';
    }
}

inline FeatureMatrix read_feature_csv(std::istream& is) {
    FeatureMatrix m;
    std::string line;
    if (!std::getline(is, line)) throw FormatError("feature csv: missing header");
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::string cell;
        std::istringstream ss(s);
        while (std::getline(ss, cell, ',')) out.push_back(cell);
        return out;
    };
    auto header = split(line);
    if (header.size() < 2 || header[0] != "subject" || header[1] != "label")
        throw FormatError("feature csv: header must start with subject,label");
    m.column_names.assign(header.begin() + 2, header.end());
    std::vector<double> row(m.column_names.size());
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto cells = split(line);
        if (cells.size() != header.size()) throw FormatError("feature csv: ragged row");
        m.subject_ids.push_back(std::stoi(cells[0]));
        auto label = parse_activity(cells[1]);
        if (!label) throw FormatError("feature csv: unknown label " + cells[1]);
        m.labels.push_back(*label);
        for (std::size_t i = 0; i < row.size(); ++i) row[i] = std::stod(cells[i + 2]);
        if (m.values.rows() == 0) m.values = Matrix(0, row.size());
        m.values.append_row(row);
    }
    m.validate();
    return m;
}

// ---------------------------------------------------------------------------
// Time-domain statistics

/// Per-channel mean and population standard deviation, ordered
/// (acc_x_mean, acc_x_std, ..., gyr_z_mean, gyr_z_std).
inline std::array<double, kBaseStats> base_stats(const SensorWindow& w) {
    std::array<double, kBaseStats> out{};
    for (std::size_t c = 0; c < kChannels; ++c) {
        const auto ch = w.channel(c);
        const auto mom = moments(ch);
        out[2 * c] = mom.mean;
        out[2 * c + 1] = mom.std;
    }
    return out;
}

inline FeatureMatrix base_feature_matrix(const std::vector<SensorWindow>& windows,
                                         Subset subset) {
    FeatureMatrix m;
    m.values = Matrix(windows.size(), kBaseStats);
    m.column_names.assign(base_stat_names().begin(), base_stat_names().end());
    m.subset = subset;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const auto s = base_stats(windows[i]);
        std::copy(s.begin(), s.end(), m.values.row(i).begin());
        m.labels.push_back(windows[i].label);
        m.subject_ids.push_back(windows[i].subject_id);
    }
    return m;
}

// ---------------------------------------------------------------------------
// Standardization

struct Standardizer {
    std::vector<double> means;
    std::vector<double> stds;
    /// Columns whose training variance was zero; their std is set to 1.
    std::vector<bool> degenerate;

    Matrix apply(const Matrix& m) const {
        if (m.cols() != means.size()) throw ArgumentError("standardizer: width mismatch");
        Matrix out = m;
        for (std::size_t r = 0; r < m.rows(); ++r) {
            auto row = out.row(r);
            for (std::size_t c = 0; c < row.size(); ++c) row[c] = (row[c] - means[c]) / stds[c];
        }
        return out;
    }

    FeatureMatrix apply(const FeatureMatrix& m) const {
        FeatureMatrix out = m;
        out.values = apply(m.values);
        return out;
    }
};

inline constexpr double kDegenerateStd = 1e-12;

inline Standardizer fit_standardizer(const Matrix& train) {
    if (train.rows() == 0) throw ArgumentError("fit_standardizer: empty matrix");
    Standardizer s;
    const std::size_t d = train.cols();
    s.means.assign(d, 0.0);
    s.stds.assign(d, 0.0);
    s.degenerate.assign(d, false);
    std::vector<double> col(train.rows());
    for (std::size_t c = 0; c < d; ++c) {
        for (std::size_t r = 0; r < train.rows(); ++r) col[r] = train(r, c);
        const auto mom = moments(col);
        s.means[c] = mom.mean;
        if (mom.std < kDegenerateStd) {
            s.stds[c] = 1.0;
            s.degenerate[c] = true;
        } else {
            s.stds[c] = mom.std;
        }
    }
    return s;
}

inline Standardizer fit_standardizer(const FeatureMatrix& train) {
    return fit_standardizer(train.values);
}

// ---------------------------------------------------------------------------
// PCA

struct PcaModel {
    /// d_in x k loadings; column j is the j-th principal axis.
    Matrix components;
    std::vector<double> explained_variance;
    std::vector<double> explained_variance_ratio;
    std::vector<double> means;

    std::size_t input_dim() const noexcept { return components.rows(); }
    std::size_t k() const noexcept { return components.cols(); }

    Matrix project(const Matrix& x) const {
        if (x.cols() != input_dim()) throw ArgumentError("pca: width mismatch");
        Matrix out(x.rows(), k());
        for (std::size_t r = 0; r < x.rows(); ++r) {
            for (std::size_t j = 0; j < k(); ++j) {
                double s = 0.0;
                for (std::size_t i = 0; i < input_dim(); ++i)
                    s += (x(r, i) - means[i]) * components(i, j);
                out(r, j) = s;
            }
        }
        return out;
    }

    /// P = V V^T.
    Matrix projector() const {
        const std::size_t d = input_dim();
        Matrix p(d, d);
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < d; ++b) {
                double s = 0.0;
                for (std::size_t j = 0; j < k(); ++j) s += components(a, j) * components(b, j);
                p(a, b) = s;
            }
        return p;
    }
};

namespace detail {

struct EigenSpectrum {
    std::vector<double> values;  // descending, clipped at 0
    Matrix vectors;              // d x d, column j pairs with values[j]
    std::vector<double> means;
    double total = 0.0;
};

inline EigenSpectrum covariance_spectrum(const Matrix& x) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    EigenSpectrum out;
    out.means.assign(d, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) out.means[c] += x(r, c);
    for (double& m : out.means) m /= static_cast<double>(n);

    Eigen::MatrixXd centered(n, d);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) centered(r, c) = x(r, c) - out.means[c];
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw Error("pca: eigendecomposition failed");
    const auto& evals = solver.eigenvalues();  // ascending
    const auto& evecs = solver.eigenvectors();

    out.values.resize(d);
    out.vectors = Matrix(d, d);
    for (std::size_t j = 0; j < d; ++j) {
        const Eigen::Index src = static_cast<Eigen::Index>(d - 1 - j);
        out.values[j] = std::max(0.0, evals(src));
        // Sign convention: first non-negligible loading is nonnegative.
        double sign = 1.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double v = evecs(static_cast<Eigen::Index>(i), src);
            if (std::abs(v) > 1e-12) {
                sign = v < 0 ? -1.0 : 1.0;
                break;
            }
        }
        for (std::size_t i = 0; i < d; ++i)
            out.vectors(i, j) = sign * evecs(static_cast<Eigen::Index>(i), src);
    }
    for (double v : out.values) out.total += v;
    return out;
}

inline PcaModel truncate(const EigenSpectrum& spec, std::size_t k) {
    const std::size_t d = spec.values.size();
    PcaModel m;
    m.means = spec.means;
    m.components = Matrix(d, k);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < k; ++j) m.components(i, j) = spec.vectors(i, j);
    for (std::size_t j = 0; j < k; ++j) {
        m.explained_variance.push_back(spec.values[j]);
        m.explained_variance_ratio.push_back(spec.total > 0 ? spec.values[j] / spec.total : 0.0);
    }
    return m;
}

}  // namespace detail

/// PCA retaining `k` components, via eigendecomposition of the population
/// covariance of the training rows.
inline PcaModel fit_pca(const Matrix& train, std::size_t k) {
    if (k == 0 || k > train.cols() || k >= train.rows())
        throw ArgumentError("fit_pca: need 1 <= k <= d and k < n (k=" + std::to_string(k) +
                            ", n=" + std::to_string(train.rows()) +
                            ", d=" + std::to_string(train.cols()) + ")");
    return detail::truncate(detail::covariance_spectrum(train), k);
}

/// PCA retaining the fewest components whose cumulative explained variance
/// ratio reaches `ratio`.
inline PcaModel fit_pca_by_variance(const Matrix& train, double ratio) {
    if (!(ratio > 0.0 && ratio <= 1.0)) throw ArgumentError("fit_pca_by_variance: ratio in (0,1]");
    if (train.rows() < 2) throw ArgumentError("fit_pca_by_variance: need at least 2 rows");
    const auto spec = detail::covariance_spectrum(train);
    const std::size_t k_max = std::min(train.cols(), train.rows() - 1);
    std::size_t k = 0;
    double cum = 0.0;
    while (k < k_max) {
        cum += spec.total > 0 ? spec.values[k] / spec.total : 1.0;
        ++k;
        if (cum >= ratio - 1e-12) break;
    }
    return detail::truncate(spec, k);
}

// ---------------------------------------------------------------------------
// Spectral features

/// In-place iterative radix-2 FFT; size must be a power of two.
inline void fft(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) throw ArgumentError("fft: size must be a power of two");
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> w = std::polar(1.0, ang * static_cast<double>(k));
                const auto u = a[i + k];
                const auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
            }
        }
    }
}

/// Non-redundant half of the DFT of a real signal: bins 0..n/2.
inline std::vector<std::complex<double>> rfft(std::span<const double> x) {
    std::vector<std::complex<double>> a(x.begin(), x.end());
    fft(a);
    a.resize(x.size() / 2 + 1);
    return a;
}

/// ln(1 + |X_k|) over the 65 rFFT bins of each channel, channels concatenated.
inline std::vector<double> spectral_features(const SensorWindow& w) {
    std::vector<double> out;
    out.reserve(kSpectralValues);
    for (std::size_t c = 0; c < kChannels; ++c) {
        const auto ch = w.channel(c);
        for (const auto& bin : rfft(ch)) out.push_back(std::log1p(std::abs(bin)));
    }
    return out;
}

inline Matrix spectral_matrix(const std::vector<SensorWindow>& windows) {
    Matrix m(windows.size(), kSpectralValues);
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const auto f = spectral_features(windows[i]);
        std::copy(f.begin(), f.end(), m.row(i).begin());
    }
    return m;
}

// ---------------------------------------------------------------------------
// Semantic axes

/// A named linear combination of the 12 standardized base statistics.
struct SemanticFeatureSpec {
    std::string name;
    /// (base stat name, coefficient) in declaration order.
    std::vector<std::pair<std::string, double>> weights;

    /// Coefficients aligned to base_stat_names(); unknown keys are rejected
    /// when the spec is parsed, so they never reach here.
    std::array<double, kBaseStats> coefficients() const {
        std::array<double, kBaseStats> c{};
        for (const auto& [key, value] : weights)
            if (auto i = base_stat_index(key)) c[*i] += value;
        return c;
    }

    friend bool operator==(const SemanticFeatureSpec&, const SemanticFeatureSpec&) = default;
};

inline double apply_semantic(const SemanticFeatureSpec& spec, std::span<const double> base_row) {
    if (base_row.size() < kBaseStats) throw ArgumentError("apply_semantic: need 12 base stats");
    const auto c = spec.coefficients();
    double s = 0.0;
    for (std::size_t j = 0; j < kBaseStats; ++j) s += c[j] * base_row[j];
    return s;
}

// ---------------------------------------------------------------------------
// Unified feature space

struct FeatureSpaceConfig {
    bool semantic = true;
    std::size_t pca_components = 6;
    double spectral_variance = 0.95;
};

/// Transforms fit on the training windows only.
struct FeatureSpaceModel {
    Standardizer base;
    std::vector<SemanticFeatureSpec> semantic;
    PcaModel pca;
    Standardizer spectral;
    PcaModel spectral_pca;
    std::vector<std::string> column_names;

    FeatureMatrix transform(const std::vector<SensorWindow>& windows, Subset subset) const {
        FeatureMatrix base_m = base.apply(base_feature_matrix(windows, subset));
        Matrix values = base_m.values;

        if (!semantic.empty()) {
            Matrix sem(windows.size(), semantic.size());
            for (std::size_t r = 0; r < windows.size(); ++r)
                for (std::size_t j = 0; j < semantic.size(); ++j)
                    sem(r, j) = apply_semantic(semantic[j], base_m.values.row(r));
            values = Matrix::hconcat(values, sem);
        }
        values = Matrix::hconcat(values, pca.project(base_m.values));
        const Matrix spec = spectral.apply(spectral_matrix(windows));
        values = Matrix::hconcat(values, spectral_pca.project(spec));

        FeatureMatrix out;
        out.values = std::move(values);
        out.column_names = column_names;
        out.labels = std::move(base_m.labels);
        out.subject_ids = std::move(base_m.subject_ids);
        out.subset = subset;
        out.validate();
        return out;
    }
};

struct FeatureSpace {
    FeatureSpaceModel model;
    FeatureMatrix train;
    FeatureMatrix val;
    FeatureMatrix test;
};

/// Fits every transform on `train` and composes
/// [12 base | semantic | pca | spectral-pca] for all three subsets.
inline FeatureSpaceModel fit_feature_space(const std::vector<SensorWindow>& train,
                                           const std::vector<SemanticFeatureSpec>& semantic,
                                           const FeatureSpaceConfig& cfg = {}) {
    if (train.empty()) throw ArgumentError("fit_feature_space: no training windows");
    FeatureSpaceModel m;
    const FeatureMatrix raw_base = base_feature_matrix(train, Subset::Train);
    m.base = fit_standardizer(raw_base.values);
    const Matrix base_std = m.base.apply(raw_base.values);

    m.column_names.assign(base_stat_names().begin(), base_stat_names().end());
    if (cfg.semantic) {
        m.semantic = semantic;
        for (const auto& s : semantic) m.column_names.push_back(s.name);
    }

    m.pca = fit_pca(base_std, cfg.pca_components);
    for (std::size_t j = 0; j < m.pca.k(); ++j) m.column_names.push_back("pca_" + std::to_string(j));

    const Matrix raw_spec = spectral_matrix(train);
    m.spectral = fit_standardizer(raw_spec);
    m.spectral_pca = fit_pca_by_variance(m.spectral.apply(raw_spec), cfg.spectral_variance);
    for (std::size_t j = 0; j < m.spectral_pca.k(); ++j)
        m.column_names.push_back("spec_pca_" + std::to_string(j));

    std::set<std::string> unique(m.column_names.begin(), m.column_names.end());
    if (unique.size() != m.column_names.size())
        throw ValidationError("feature space: semantic feature name collides with another column");
    return m;
}

inline FeatureSpace build_feature_space(const std::vector<SensorWindow>& train,
                                        const std::vector<SensorWindow>& val,
                                        const std::vector<SensorWindow>& test,
                                        const std::vector<SemanticFeatureSpec>& semantic,
                                        const FeatureSpaceConfig& cfg = {}) {
    FeatureSpace fs;
    fs.model = fit_feature_space(train, semantic, cfg);
    fs.train = fs.model.transform(train, Subset::Train);
    fs.val = fs.model.transform(val, Subset::Val);
    fs.test = fs.model.transform(test, Subset::Test);
    return fs;
}

/// Per-class column means of a training matrix, in activity order; classes
/// without rows are omitted.
struct ClassMeans {
    std::vector<std::string> columns;
    std::vector<std::pair<Activity, std::vector<double>>> rows;
};

inline ClassMeans class_means(const FeatureMatrix& train,
                              std::span<const std::string> columns = {}) {
    if (train.subset != Subset::Train)
        throw ArgumentError("class_means: only the training subset may be summarized");
    ClassMeans out;
    std::vector<std::size_t> col_idx;
    if (columns.empty()) {
        out.columns = train.column_names;
        for (std::size_t i = 0; i < train.cols(); ++i) col_idx.push_back(i);
    } else {
        for (const auto& c : columns) {
            auto i = train.column_index(c);
            if (!i) throw ArgumentError("class_means: unknown column " + c);
            col_idx.push_back(*i);
            out.columns.push_back(c);
        }
    }
    for (Activity a : kAllActivities) {
        const auto rows = train.rows_of(a);
        if (rows.empty()) continue;
        std::vector<double> mean(col_idx.size(), 0.0);
        for (std::size_t r : rows)
            for (std::size_t j = 0; j < col_idx.size(); ++j) mean[j] += train.values(r, col_idx[j]);
        for (double& v : mean) v /= static_cast<double>(rows.size());
        out.rows.emplace_back(a, std::move(mean));
    }
    return out;
}

}  // namespace harsel
