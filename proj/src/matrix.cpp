#include "stablevel/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stablevel/errors.hpp"

namespace svl {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data))
{
    if (data_.size() != rows_ * cols_)
        throw ShapeError("Matrix: data size does not match rows * cols");
}

void Matrix::push_row(std::span<const double> values)
{
    if (rows_ == 0 && cols_ == 0)
        cols_ = values.size();
    require_same_size(values.size(), cols_, "Matrix::push_row");
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
}

double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

double squared_norm(std::span<const double> a)
{
    return dot(a, a);
}

double squared_distance(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
    {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

void require_same_size(std::size_t a, std::size_t b, const char* what)
{
    if (a != b)
        throw ShapeError(std::string(what) + ": size " + std::to_string(a)
                         + " != " + std::to_string(b));
}

double quantile(std::vector<double> values, double q)
{
    if (values.empty())
        throw RangeError("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

}  // namespace svl
