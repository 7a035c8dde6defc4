#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "harsel/activity.hpp"
#include "harsel/error.hpp"
#include "harsel/util.hpp"

namespace harsel {

inline constexpr std::size_t kWindowLength = 128;
inline constexpr std::size_t kChannels = 6;
inline constexpr std::size_t kWindowValues = kWindowLength * kChannels;

inline constexpr std::array<std::string_view, kChannels> kChannelNames = {
    "acc_x", "acc_y", "acc_z", "gyr_x", "gyr_y", "gyr_z",
};

/// One 128-sample window of six inertial channels, stored row-major
/// ([t][channel]) in the order acc_x, acc_y, acc_z, gyr_x, gyr_y, gyr_z.
struct SensorWindow {
    std::vector<double> samples = std::vector<double>(kWindowValues, 0.0);
    Activity label = Activity::Walking;
    int subject_id = 1;

    double at(std::size_t t, std::size_t channel) const { return samples[t * kChannels + channel]; }
    double& at(std::size_t t, std::size_t channel) { return samples[t * kChannels + channel]; }

    std::array<double, kWindowLength> channel(std::size_t c) const {
        std::array<double, kWindowLength> out{};
        for (std::size_t t = 0; t < kWindowLength; ++t) out[t] = at(t, c);
        return out;
    }

    void validate() const {
        if (samples.size() != kWindowValues)
            throw FormatError("sensor window must hold 128x6 samples");
        if (index_of(label) >= kNumActivities) throw FormatError("invalid activity label");
    }

    friend bool operator==(const SensorWindow&, const SensorWindow&) = default;
};

inline constexpr int kMaxSubject = 30;

/// Subject-wise partition into train/validation/test.
struct DataSplit {
    std::vector<int> train;
    std::vector<int> val;
    std::vector<int> test;

    /// The fixed 17/4/9 subject division.
    static DataSplit standard() {
        return {
            {1, 3, 6, 8, 11, 14, 15, 16, 17, 19, 21, 23, 26, 27, 28, 29, 30},
            {5, 7, 22, 25},
            {2, 4, 9, 10, 12, 13, 18, 20, 24},
        };
    }

    void validate() const {
        std::set<int> seen;
        for (const auto* part : {&train, &val, &test}) {
            for (int s : *part) {
                if (!seen.insert(s).second)
                    throw ConfigError("split: subject " + std::to_string(s) +
                                      " appears in more than one subset");
            }
        }
    }

    enum class Part { Train, Val, Test, None };

    Part part_of(int subject) const {
        auto has = [subject](const std::vector<int>& v) {
            return std::find(v.begin(), v.end(), subject) != v.end();
        };
        if (has(train)) return Part::Train;
        if (has(val)) return Part::Val;
        if (has(test)) return Part::Test;
        return Part::None;
    }

    friend bool operator==(const DataSplit&, const DataSplit&) = default;
};

struct Dataset {
    std::vector<SensorWindow> train;
    std::vector<SensorWindow> val;
    std::vector<SensorWindow> test;
};

/// Assigns pooled windows to subsets by subject, preserving input order.
/// A subject not covered by the split is a format error.
inline Dataset apply_split(std::vector<SensorWindow> windows, const DataSplit& split) {
    split.validate();
    Dataset out;
    for (auto& w : windows) {
        switch (split.part_of(w.subject_id)) {
            case DataSplit::Part::Train: out.train.push_back(std::move(w)); break;
            case DataSplit::Part::Val: out.val.push_back(std::move(w)); break;
            case DataSplit::Part::Test: out.test.push_back(std::move(w)); break;
            case DataSplit::Part::None:
                throw FormatError("subject_id " + std::to_string(w.subject_id) +
                                  " is not assigned by the split");
        }
    }
    return out;
}

/// Source of the three accelerometer channels in the UCI-HAR layout.
enum class AccSource { Total, Body };

namespace detail {

inline std::vector<std::vector<double>> read_value_rows(const std::filesystem::path& path,
                                                        std::size_t expected_width) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::vector<double> values;
        values.reserve(expected_width);
        const char* p = line.data();
        const char* end = p + line.size();
        while (p < end) {
            while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
            if (p >= end) break;
            if (*p == '+') ++p;
            double v = 0.0;
            auto [next, ec] = std::from_chars(p, end, v);
            if (ec != std::errc())
                throw FormatError(path.string() + ":" + std::to_string(line_no) +
                                  ": not a number");
            values.push_back(v);
            p = next;
        }
        if (values.empty()) continue;
        if (values.size() != expected_width)
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(expected_width) + " values, found " +
                              std::to_string(values.size()));
        rows.push_back(std::move(values));
    }
    return rows;
}

inline std::vector<int> read_int_column(const std::filesystem::path& path) {
    std::vector<int> out;
    for (const auto& row : read_value_rows(path, 1)) {
        const double v = row[0];
        if (v != std::floor(v)) throw FormatError(path.string() + ": non-integer entry");
        out.push_back(static_cast<int>(v));
    }
    return out;
}

inline std::vector<SensorWindow> load_ucihar_folder(const std::filesystem::path& root,
                                                    const std::string& part, AccSource acc) {
    const auto dir = root / part;
    const auto inertial = dir / "Inertial Signals";
    const std::string acc_prefix = acc == AccSource::Total ? "total_acc_" : "body_acc_";
    const std::array<std::string, kChannels> files = {
        acc_prefix + "x_" + part + ".txt", acc_prefix + "y_" + part + ".txt",
        acc_prefix + "z_" + part + ".txt", "body_gyro_x_" + part + ".txt",
        "body_gyro_y_" + part + ".txt",    "body_gyro_z_" + part + ".txt",
    };

    const auto labels_path = dir / ("y_" + part + ".txt");
    const auto subjects_path = dir / ("subject_" + part + ".txt");
    for (const auto& f : files)
        if (!std::filesystem::exists(inertial / f))
            throw LoadError("missing file " + (inertial / f).string());
    for (const auto& f : {labels_path, subjects_path})
        if (!std::filesystem::exists(f)) throw LoadError("missing file " + f.string());

    const auto labels = read_int_column(labels_path);
    const auto subjects = read_int_column(subjects_path);
    if (labels.size() != subjects.size())
        throw FormatError(part + ": label and subject files have different row counts");

    std::vector<SensorWindow> windows(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        windows[i].label = activity_from_ucihar_code(labels[i]);
        if (subjects[i] < 1 || subjects[i] > kMaxSubject)
            throw FormatError(part + ": subject_id " + std::to_string(subjects[i]) +
                              " outside 1..30");
        windows[i].subject_id = subjects[i];
    }
    for (std::size_t c = 0; c < kChannels; ++c) {
        const auto rows = read_value_rows(inertial / files[c], kWindowLength);
        if (rows.size() != labels.size())
            throw FormatError(files[c] + ": " + std::to_string(rows.size()) +
                              " rows, expected " + std::to_string(labels.size()));
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t t = 0; t < kWindowLength; ++t) windows[i].at(t, c) = rows[i][t];
    }
    return windows;
}

}  // namespace detail

/// Loads the UCI-HAR "Inertial Signals" layout under `root`, pools the
/// official train and test folders (in that order) and re-splits by subject.
inline Dataset load_ucihar(const std::filesystem::path& root, const DataSplit& split,
                           AccSource acc = AccSource::Total) {
    split.validate();
    auto pooled = detail::load_ucihar_folder(root, "train", acc);
    auto official_test = detail::load_ucihar_folder(root, "test", acc);
    pooled.insert(pooled.end(), std::make_move_iterator(official_test.begin()),
                  std::make_move_iterator(official_test.end()));
    return apply_split(std::move(pooled), split);
}

// ---------------------------------------------------------------------------
// Synthetic fixture

struct SynthesisOptions {
    int subject_pool = kMaxSubject;
    /// Fraction of windows blended with another activity of the same domain.
    double atypical_fraction = 0.2;
};

namespace detail {

struct ClassProcess {
    std::array<double, 3> gravity;
    double cycles;  // per window; 0 for static classes
    std::array<double, 3> acc_amp;
    std::array<double, 3> gyr_amp;
    double acc_noise;
    double gyr_noise;
};

inline const ClassProcess& class_process(Activity a) {
    static const std::array<ClassProcess, kNumActivities> table = {{
        {{1.00, -0.15, 0.05}, 5.0, {0.25, 0.12, 0.10}, {0.50, 0.30, 0.20}, 0.03, 0.05},
        {{0.95, -0.20, 0.12}, 4.2, {0.20, 0.10, 0.18}, {0.60, 0.42, 0.28}, 0.03, 0.05},
        {{1.02, -0.10, 0.00}, 5.8, {0.34, 0.15, 0.12}, {0.70, 0.35, 0.25}, 0.03, 0.05},
        {{0.85, 0.15, 0.45}, 0.0, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, 0.010, 0.020},
        {{0.98, -0.18, 0.12}, 0.0, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, 0.010, 0.020},
        {{0.10, 0.60, 0.78}, 0.0, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, 0.008, 0.015},
    }};
    return table[index_of(a)];
}

struct SubjectEffect {
    double amp_scale;
    double freq_scale;
    std::array<double, 3> tilt;
};

inline SubjectEffect subject_effect(std::uint64_t seed, int subject) {
    Rng rng(seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(subject + 1)));
    SubjectEffect e{};
    e.amp_scale = rng.uniform(0.75, 1.25);
    e.freq_scale = rng.uniform(0.9, 1.1);
    for (double& t : e.tilt) t = rng.normal(0.0, 0.05);
    return e;
}

/// Noise-free signal of activity `a` at sample t.
inline void render(const ClassProcess& p, const SubjectEffect& s, double amp_jitter,
                   double phase, std::size_t t, std::array<double, kChannels>& out) {
    const double cycles = p.cycles * s.freq_scale;
    const double x = 2.0 * std::numbers::pi * cycles * static_cast<double>(t) /
                         static_cast<double>(kWindowLength) + phase;
    const double wave = std::sin(x) + 0.5 * std::sin(2.0 * x + 0.7);
    const double amp = s.amp_scale * amp_jitter;
    for (std::size_t k = 0; k < 3; ++k) {
        out[k] = p.gravity[k] + s.tilt[k] + amp * p.acc_amp[k] * wave;
        out[3 + k] = amp * p.gyr_amp[k] * std::sin(x + 0.9 * static_cast<double>(k));
    }
}

}  // namespace detail

/// Deterministic synthetic windows, `windows_per_class` per activity, class
/// major. Dynamic activities are periodic processes with activity-specific
/// frequency and amplitude; static ones are orientation offsets plus low
/// noise. Subjects are assigned round-robin within each class.
inline std::vector<SensorWindow> synthesize(std::uint64_t seed, int windows_per_class,
                                            const SynthesisOptions& options = {}) {
    if (windows_per_class < 1) throw ArgumentError("windows_per_class must be >= 1");
    if (options.subject_pool < 1 || options.subject_pool > kMaxSubject)
        throw ArgumentError("subject_pool must be in 1..30");
    Rng rng(seed);
    std::vector<SensorWindow> out;
    out.reserve(kNumActivities * static_cast<std::size_t>(windows_per_class));

    std::vector<detail::SubjectEffect> effects;
    for (int s = 1; s <= options.subject_pool; ++s)
        effects.push_back(detail::subject_effect(seed, s));

    for (Activity a : kAllActivities) {
        const auto& proc = detail::class_process(a);
        for (int w = 0; w < windows_per_class; ++w) {
            SensorWindow win;
            win.label = a;
            win.subject_id = w % options.subject_pool + 1;
            const auto& effect = effects[static_cast<std::size_t>(win.subject_id - 1)];

            const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
            const double jitter = rng.uniform(0.9, 1.1);
            const bool atypical = rng.uniform() < options.atypical_fraction;
            // Same-domain neighbour activity used for atypical blends.
            const std::size_t base = is_dynamic(a) ? 0 : 3;
            const std::size_t other_index =
                base + (index_of(a) - base + 1 + rng.below(2)) % 3;
            const auto& other = detail::class_process(activity_at(other_index));
            const double blend = atypical ? rng.uniform(0.4, 0.8) : 0.0;

            std::array<double, kChannels> own{};
            std::array<double, kChannels> mix{};
            for (std::size_t t = 0; t < kWindowLength; ++t) {
                detail::render(proc, effect, jitter, phase, t, own);
                if (atypical) detail::render(other, effect, jitter, phase, t, mix);
                for (std::size_t c = 0; c < kChannels; ++c) {
                    const double noise_sd = c < 3 ? proc.acc_noise : proc.gyr_noise;
                    const double clean = (1.0 - blend) * own[c] + blend * mix[c];
                    win.at(t, c) = clean + rng.normal(0.0, noise_sd);
                }
            }
            out.push_back(std::move(win));
        }
    }
    return out;
}

/// CSV with header `subject,label,c0..c767`; values use 9 significant digits.
inline void write_windows_csv(std::ostream& os, const std::vector<SensorWindow>& windows) {
    os << "subject,label";
    for (std::size_t i = 0; i < kWindowValues; ++i) os << ",c" << i;
    os << '\n';
    for (const auto& w : windows) {
        os << w.subject_id << ',' << activity_name(w.label);
        for (double v : w.samples) os << ',' << format_sig(v, 9);
        os << '\n';
    }
}

/// Content digest over the 9-significant-digit CSV rendering.
inline std::string dataset_digest(const std::vector<SensorWindow>& windows) {
    std::ostringstream os;
    write_windows_csv(os, windows);
    return hex64(fnv1a64(os.str()));
}

}  // namespace harsel
