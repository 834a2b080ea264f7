#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace aoi {

/// Dense row-major matrix of doubles. Value type; copies are deep.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    /// Builds from nested rows; all rows must have the same length.
    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            assert(r.size() == cols_);
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool square() const noexcept { return rows_ == cols_; }

    double& operator()(std::size_t r, std::size_t c) {
        assert(r < rows_ && c < cols_);
        return data_[r * cols_ + c];
    }
    double operator()(std::size_t r, std::size_t c) const {
        assert(r < rows_ && c < cols_);
        return data_[r * cols_ + c];
    }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const {
        return {data_.data() + r * cols_, cols_};
    }

    std::span<const double> data() const noexcept { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Compressed sparse rows sharing one pattern across two value arrays, so
/// a mixture `w0 * A + w1 * B` can be re-weighted in O(nnz) without
/// rebuilding the structure.
class SparsePair {
public:
    SparsePair() = default;

    SparsePair(const Matrix& a, const Matrix& b) : n_(a.rows()) {
        assert(a.square() && b.square() && a.rows() == b.rows());
        offsets_.reserve(n_ + 1);
        offsets_.push_back(0);
        for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t j = 0; j < n_; ++j) {
                if (a(i, j) != 0.0 || b(i, j) != 0.0) {
                    cols_.push_back(j);
                    first_.push_back(a(i, j));
                    second_.push_back(b(i, j));
                }
            }
            offsets_.push_back(cols_.size());
        }
        mixed_ = first_;
    }

    std::size_t size() const noexcept { return n_; }
    std::size_t nonzeros() const noexcept { return cols_.size(); }

    /// Sets the working values to `w0 * first + w1 * second`.
    void mix(double w0, double w1) {
        for (std::size_t k = 0; k < cols_.size(); ++k)
            mixed_[k] = w0 * first_[k] + w1 * second_[k];
    }

    std::size_t row_begin(std::size_t i) const { return offsets_[i]; }
    std::size_t row_end(std::size_t i) const { return offsets_[i + 1]; }
    std::size_t col(std::size_t k) const { return cols_[k]; }
    double value(std::size_t k) const { return mixed_[k]; }
    double first(std::size_t k) const { return first_[k]; }
    double second(std::size_t k) const { return second_[k]; }

    /// out = x * (mixed matrix). `out` is overwritten.
    void left_multiply(std::span<const double> x, std::span<double> out) const {
        assert(x.size() == n_ && out.size() == n_);
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t i = 0; i < n_; ++i) {
            const double xi = x[i];
            if (xi == 0.0) continue;
            for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k)
                out[cols_[k]] += xi * mixed_[k];
        }
    }

private:
    std::size_t n_ = 0;
    std::vector<std::size_t> offsets_;
    std::vector<std::size_t> cols_;
    std::vector<double> first_;
    std::vector<double> second_;
    std::vector<double> mixed_;
};

inline double l1_distance(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s;
}

}  // namespace aoi
