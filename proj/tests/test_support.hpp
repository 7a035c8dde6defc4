#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "harsel/datastore.hpp"

namespace harsel::testing {

/// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "harsel") {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                (tag + "-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << text;
}

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Writes one UCI-HAR folder ("train" or "test"). Window i has every sample of
/// channel c equal to 100*i + c, so rows can be traced after loading.
inline void write_ucihar_part(const std::filesystem::path& root, const std::string& part,
                              const std::vector<std::pair<int, int>>& subject_code) {
    const auto dir = root / part;
    const auto inertial = dir / "Inertial Signals";
    const std::array<std::string, kChannels> stems = {"total_acc_x", "total_acc_y",
                                                      "total_acc_z", "body_gyro_x",
                                                      "body_gyro_y", "body_gyro_z"};
    std::string y, s;
    for (const auto& [subject, code] : subject_code) {
        y += std::to_string(code) + "\n";
        s += std::to_string(subject) + "\n";
    }
    write_text(dir / ("y_" + part + ".txt"), y);
    write_text(dir / ("subject_" + part + ".txt"), s);
    for (std::size_t c = 0; c < kChannels; ++c) {
        std::string body;
        for (std::size_t i = 0; i < subject_code.size(); ++i) {
            for (std::size_t t = 0; t < kWindowLength; ++t)
                body += "  " + std::to_string(100 * i + c) + ".0e+00";
            body += "\n";
        }
        write_text(inertial / (stems[c] + "_" + part + ".txt"), body);
    }
}

}  // namespace harsel::testing
