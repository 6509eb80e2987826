#pragma once

// Small statistics helpers shared by the test binaries.

#include <cmath>
#include <cstddef>
#include <vector>

#include "stablevel/matrix.hpp"

namespace svl::stats {

struct Moments
{
    double mean = 0.0;
    double var = 0.0;       // unbiased sample variance
    double mean_se = 0.0;   // sqrt(var / n)
    double var_se = 0.0;    // sqrt((m4 - var^2) / n), plug-in
};

inline Moments moments(const std::vector<double>& x)
{
    Moments m;
    const double n = static_cast<double>(x.size());
    for (double v : x)
        m.mean += v;
    m.mean /= n;
    double m2 = 0.0, m4 = 0.0;
    for (double v : x)
    {
        const double d = v - m.mean;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    m.var = m2 / (n - 1.0);
    m4 /= n;
    m.mean_se = std::sqrt(m.var / n);
    m.var_se = std::sqrt(std::max(0.0, m4 - (m2 / n) * (m2 / n)) / n);
    return m;
}

inline std::vector<double> column(const Matrix& m, std::size_t j)
{
    std::vector<double> out(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        out[i] = m(i, j);
    return out;
}

// 64-node Gauss-Legendre rule on [a, b], nodes from Newton iteration on P_64.
template <class F>
double gauss_legendre_64(F&& f, double a, double b)
{
    constexpr int n = 64;
    static const auto rule = [] {
        std::vector<std::pair<double, double>> r;
        for (int i = 1; i <= n; ++i)
        {
            double x = std::cos(M_PI * (i - 0.25) / (n + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it)
            {
                double p0 = 1.0, p1 = x;
                for (int k = 2; k <= n; ++k)
                {
                    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (x * p1 - p0) / (x * x - 1.0);
                const double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-16)
                    break;
            }
            r.emplace_back(x, 2.0 / ((1.0 - x * x) * dp * dp));
        }
        return r;
    }();
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    double acc = 0.0;
    for (const auto& [x, w] : rule)
        acc += w * f(mid + half * x);
    return half * acc;
}

}  // namespace svl::stats
