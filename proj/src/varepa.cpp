#include "stablevel/varepa.hpp"

#include <cmath>
#include <iostream>

#include "stablevel/errors.hpp"

namespace svl {

std::string to_string(WeightingKind kind)
{
    switch (kind)
    {
        case WeightingKind::hard:
            return "hard";
        case WeightingKind::sigmoid:
            return "sigmoid";
        case WeightingKind::snr:
            return "snr";
    }
    return "unknown";
}

WeightingKind weighting_kind_from_string(std::string_view name)
{
    if (name == "hard")
        return WeightingKind::hard;
    if (name == "sigmoid")
        return WeightingKind::sigmoid;
    if (name == "snr")
        return WeightingKind::snr;
    throw ConfigError("unknown weighting kind '" + std::string(name) + "'");
}

void WeightingFn::validate() const
{
    if (!(xi > 0.0 && xi < 1.0))
        throw RangeError("WeightingFn: xi must lie in (0, 1)");
    if (!(k > 0.0))
        throw RangeError("WeightingFn: sharpness k must be positive");
}

double weight(const WeightingFn& fn, const Schedule& schedule, double t)
{
    schedule.require_in_range(t);
    switch (fn.kind)
    {
        case WeightingKind::hard:
            return t < fn.xi ? 1.0 : 0.0;
        case WeightingKind::sigmoid:
        {
            const double z = fn.k * (fn.xi - t);
            // stable logistic
            if (z >= 0.0)
                return 1.0 / (1.0 + std::exp(-z));
            const double ez = std::exp(z);
            return ez / (1.0 + ez);
        }
        case WeightingKind::snr:
        {
            const double s = coefficients(schedule.kind, t).snr;
            const double s_xi = coefficients(schedule.kind, fn.xi).snr;
            return s / (s + s_xi);
        }
    }
    return 0.0;
}

double combined_loss(std::span<const double> main,
                     std::span<const double> aux,
                     std::span<const double> w,
                     double lambda_ra)
{
    require_same_size(main.size(), aux.size(), "combined_loss: main vs aux");
    require_same_size(main.size(), w.size(), "combined_loss: main vs w");
    if (main.empty())
        throw ShapeError("combined_loss: empty batch");
    double main_sum = 0.0;
    for (double m : main)
        main_sum += m;
    double wsum = 0.0, waux = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i)
    {
        wsum += w[i];
        waux += w[i] * aux[i];
    }
    const double aux_term = wsum > 0.0 ? waux / wsum : 0.0;
    return main_sum / static_cast<double>(main.size()) + lambda_ra * aux_term;
}

Vector auxiliary_coefficients(std::span<const double> w, double lambda_ra)
{
    double wsum = 0.0;
    for (double x : w)
        wsum += x;
    Vector c(w.size(), 0.0);
    if (wsum > 0.0)
        for (std::size_t i = 0; i < w.size(); ++i)
            c[i] = lambda_ra * w[i] / wsum;
    return c;
}

TeacherProjection::TeacherProjection(std::size_t data_dim, std::size_t feature_dim, Rng& rng)
    : weights_(feature_dim, data_dim)
{
    const double scale = 1.0 / std::sqrt(static_cast<double>(data_dim));
    for (double& w : weights_.flat())
        w = scale * rng.normal();
}

Vector TeacherProjection::operator()(std::span<const double> x0) const
{
    require_same_size(x0.size(), data_dim(), "TeacherProjection");
    Vector out(feature_dim());
    for (std::size_t f = 0; f < feature_dim(); ++f)
        out[f] = dot(weights_.row(f), x0);
    return out;
}

double alignment_loss(std::span<const double> hidden,
                      std::span<const double> target,
                      std::span<double> grad_hidden)
{
    require_same_size(hidden.size(), target.size(), "alignment_loss");
    const double hn = std::sqrt(squared_norm(hidden));
    const double tn = std::sqrt(squared_norm(target));
    if (hn == 0.0 || tn == 0.0)
    {
        std::clog << "alignment_loss: zero-norm feature, using loss 1\n";
        for (double& g : grad_hidden)
            g = 0.0;
        return 1.0;
    }
    const double cosine = dot(hidden, target) / (hn * tn);
    if (!grad_hidden.empty())
    {
        // d(1 - cos)/dh = -(u / (|h||u|) - cos h / |h|^2)
        for (std::size_t i = 0; i < hidden.size(); ++i)
            grad_hidden[i] = -(target[i] / (hn * tn) - cosine * hidden[i] / (hn * hn));
    }
    return 1.0 - cosine;
}

Vector toy_alignment_loss(const Matrix& hidden,
                          const Matrix& x0,
                          const TeacherProjection& teacher)
{
    require_same_size(hidden.rows(), x0.rows(), "toy_alignment_loss: batch");
    Vector out(hidden.rows());
    for (std::size_t i = 0; i < hidden.rows(); ++i)
        out[i] = alignment_loss(hidden.row(i), teacher(x0.row(i)));
    return out;
}

}  // namespace svl
