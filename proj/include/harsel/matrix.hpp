#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "harsel/error.hpp"

namespace harsel {

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return rows_ == 0; }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    void append_row(std::span<const double> values) {
        if (rows_ == 0 && cols_ == 0) cols_ = values.size();
        if (values.size() != cols_) throw ArgumentError("append_row: width mismatch");
        data_.insert(data_.end(), values.begin(), values.end());
        ++rows_;
    }

    Matrix select_rows(std::span<const std::size_t> indices) const {
        Matrix out(indices.size(), cols_);
        for (std::size_t i = 0; i < indices.size(); ++i) {
            if (indices[i] >= rows_) throw ArgumentError("select_rows: index out of range");
            auto src = row(indices[i]);
            std::copy(src.begin(), src.end(), out.row(i).begin());
        }
        return out;
    }

    /// Horizontal concatenation; both operands must have the same row count.
    static Matrix hconcat(const Matrix& a, const Matrix& b) {
        if (a.rows() != b.rows()) throw ArgumentError("hconcat: row count mismatch");
        Matrix out(a.rows(), a.cols() + b.cols());
        for (std::size_t r = 0; r < a.rows(); ++r) {
            auto dst = out.row(r);
            std::copy(a.row(r).begin(), a.row(r).end(), dst.begin());
            std::copy(b.row(r).begin(), b.row(r).end(), dst.begin() + a.cols());
        }
        return out;
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(std::span<const double> a) noexcept { return std::sqrt(dot(a, a)); }

/// Norms below this are treated as zero vectors.
inline constexpr double kZeroNorm = 1e-12;

/// Cosine similarity; 0 when either vector has zero norm.
inline double cosine(std::span<const double> a, std::span<const double> b) noexcept {
    const double na = norm(a);
    const double nb = norm(b);
    if (na < kZeroNorm || nb < kZeroNorm) return 0.0;
    return dot(a, b) / (na * nb);
}

/// Copy of `m` with every row scaled to unit norm; zero rows stay zero.
/// `nonzero` (optional) receives one flag per row.
inline Matrix normalize_rows(const Matrix& m, std::vector<bool>* nonzero = nullptr) {
    Matrix out = m;
    if (nonzero) nonzero->assign(m.rows(), false);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = out.row(r);
        const double n = norm(row);
        if (n < kZeroNorm) {
            std::fill(row.begin(), row.end(), 0.0);
            continue;
        }
        for (double& v : row) v /= n;
        if (nonzero) (*nonzero)[r] = true;
    }
    return out;
}

/// All-pairs cosine similarity of the rows of `m`, clamped to [-1, 1].
/// The diagonal is exactly 1 for nonzero rows and 0 for zero rows.
inline Matrix cosine_matrix(const Matrix& m) {
    std::vector<bool> nonzero;
    const Matrix u = normalize_rows(m, &nonzero);
    const std::size_t n = m.rows();
    Matrix sim(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        sim(i, i) = nonzero[i] ? 1.0 : 0.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double s = std::clamp(dot(u.row(i), u.row(j)), -1.0, 1.0);
            sim(i, j) = s;
            sim(j, i) = s;
        }
    }
    return sim;
}

}  // namespace harsel
