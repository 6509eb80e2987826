#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace svl {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles. Rows are points, columns coordinates.
class Matrix
{
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill)
    {
    }
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return rows_ == 0; }

    std::span<double> row(std::size_t i) noexcept
    {
        return {data_.data() + i * cols_, cols_};
    }
    std::span<const double> row(std::size_t i) const noexcept
    {
        return {data_.data() + i * cols_, cols_};
    }

    double& operator()(std::size_t i, std::size_t j) noexcept
    {
        return data_[i * cols_ + j];
    }
    double operator()(std::size_t i, std::size_t j) const noexcept
    {
        return data_[i * cols_ + j];
    }

    std::span<double> flat() noexcept { return data_; }
    std::span<const double> flat() const noexcept { return data_; }

    // Appends one row; the first row fixes the column count.
    void push_row(std::span<const double> values);

    bool operator==(const Matrix&) const = default;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Small helpers shared by the numerical modules.
double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> a);
double squared_distance(std::span<const double> a, std::span<const double> b);

// Throws ShapeError naming `what` when sizes differ.
void require_same_size(std::size_t a, std::size_t b, const char* what);

// Linear-interpolated quantile of unsorted values, q in [0, 1].
double quantile(std::vector<double> values, double q);

}  // namespace svl
