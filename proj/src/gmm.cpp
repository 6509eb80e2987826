#include "stablevel/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "stablevel/errors.hpp"

namespace svl {

std::size_t GmmSpec::num_classes() const
{
    if (!labels || labels->empty())
        return 0;
    return static_cast<std::size_t>(*std::max_element(labels->begin(), labels->end())) + 1;
}

void GmmSpec::validate() const
{
    if (dim == 0)
        throw DataError("GmmSpec: dim must be positive");
    const std::size_t k = weights.size();
    if (k == 0)
        throw DataError("GmmSpec: at least one component required");
    if (means.rows() != k || means.cols() != dim)
        throw ShapeError("GmmSpec: means must be K x dim");
    if (variances.rows() != k || variances.cols() != dim)
        throw ShapeError("GmmSpec: variances must be K x dim");
    double total = 0.0;
    for (double w : weights)
    {
        if (!(w > 0.0) || !std::isfinite(w))
            throw DataError("GmmSpec: weights must be positive and finite");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12)
    {
        std::ostringstream msg;
        msg.precision(17);
        msg << "GmmSpec: weights sum to " << total << ", expected 1";
        throw DataError(msg.str());
    }
    for (double m : means.flat())
        if (!std::isfinite(m))
            throw DataError("GmmSpec: means must be finite");
    for (double v : variances.flat())
        if (!(v > 0.0) || !std::isfinite(v))
            throw DataError("GmmSpec: variances must be positive and finite");
    if (labels)
    {
        if (labels->size() != k)
            throw ShapeError("GmmSpec: labels must have one entry per component");
        std::set<int> seen;
        for (int c : *labels)
        {
            if (c < 0)
                throw LabelError("GmmSpec: negative class id");
            seen.insert(c);
        }
        const std::size_t classes = num_classes();
        for (std::size_t c = 0; c < classes; ++c)
            if (!seen.count(static_cast<int>(c)))
                throw LabelError("GmmSpec: class " + std::to_string(c)
                                 + " has no component");
    }
}

GmmSpec GmmSpec::condition_on(int label) const
{
    if (!labels)
        throw ConfigError("GmmSpec::condition_on: spec has no labels");
    GmmSpec out;
    out.dim = dim;
    for (std::size_t k = 0; k < modes(); ++k)
    {
        if ((*labels)[k] != label)
            continue;
        out.weights.push_back(weights[k]);
        out.means.push_row(means.row(k));
        out.variances.push_row(variances.row(k));
    }
    if (out.weights.empty())
        throw LabelError("GmmSpec::condition_on: no component with class "
                         + std::to_string(label));
    double total = 0.0;
    for (double w : out.weights)
        total += w;
    for (double& w : out.weights)
        w /= total;
    out.labels = std::vector<int>(out.weights.size(), label);
    return out;
}

GmmSpec random_spec(std::size_t dim, std::size_t modes, Rng& rng)
{
    if (dim == 0 || modes == 0)
        throw RangeError("random_spec: dim and modes must be positive");
    GmmSpec spec;
    spec.dim = dim;
    spec.means = Matrix(modes, dim);
    spec.variances = Matrix(modes, dim);
    for (double& m : spec.means.flat())
        m = rng.uniform(-1.0, 1.0);
    for (double& v : spec.variances.flat())
        v = rng.uniform(1e-2, 1e-1);
    spec.weights.resize(modes);
    double total = 0.0;
    for (double& w : spec.weights)
    {
        w = rng.uniform(0.1, 1.0);
        total += w;
    }
    for (double& w : spec.weights)
        w /= total;
    return spec;
}

GmmSpec single_gaussian(std::span<const double> mean, std::span<const double> variance)
{
    require_same_size(mean.size(), variance.size(), "single_gaussian");
    GmmSpec spec;
    spec.dim = mean.size();
    spec.weights = {1.0};
    spec.means.push_row(mean);
    spec.variances.push_row(variance);
    return spec;
}

GmmSpec standard_normal_spec(std::size_t dim)
{
    const Vector zeros(dim, 0.0), ones(dim, 1.0);
    return single_gaussian(zeros, ones);
}

GmmSpec delta_spec(std::span<const double> point, double tiny)
{
    const Vector var(point.size(), tiny);
    return single_gaussian(point, var);
}

GmmSpec symmetric_two_mode_spec(std::size_t dim, double offset, double variance)
{
    GmmSpec spec;
    spec.dim = dim;
    spec.weights = {0.5, 0.5};
    spec.means = Matrix(2, dim);
    spec.variances = Matrix(2, dim, variance);
    for (std::size_t j = 0; j < dim; ++j)
    {
        spec.means(0, j) = -offset;
        spec.means(1, j) = offset;
    }
    return spec;
}

GmmSampler::GmmSampler(const GmmSpec& spec) : spec_(&spec)
{
    cumulative_.resize(spec.modes());
    double acc = 0.0;
    for (std::size_t k = 0; k < spec.modes(); ++k)
    {
        acc += spec.weights[k];
        cumulative_[k] = acc;
    }
}

std::size_t GmmSampler::draw_component(Rng& rng) const
{
    if (cumulative_.size() == 1)
        return 0;
    const double u = rng.uniform() * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return std::min<std::size_t>(it - cumulative_.begin(), cumulative_.size() - 1);
}

std::size_t GmmSampler::draw(Rng& rng, std::span<double> out) const
{
    const std::size_t k = draw_component(rng);
    const auto mean = spec_->means.row(k);
    const auto var = spec_->variances.row(k);
    for (std::size_t j = 0; j < spec_->dim; ++j)
        out[j] = mean[j] + std::sqrt(var[j]) * rng.normal();
    return k;
}

GmmDraws sample(const GmmSpec& spec, Rng& rng, std::size_t count)
{
    GmmSampler sampler(spec);
    GmmDraws draws;
    draws.points = Matrix(count, spec.dim);
    draws.components.resize(count);
    if (spec.labels)
        draws.labels.resize(count);
    for (std::size_t i = 0; i < count; ++i)
    {
        const std::size_t k = sampler.draw(rng, draws.points.row(i));
        draws.components[i] = k;
        if (spec.labels)
            draws.labels[i] = (*spec.labels)[k];
    }
    return draws;
}

namespace {

// Per-component log of w_k N(xt; alpha mu_k, diag(alpha^2 s_k^2 + sigma^2)),
// without the -(d/2) log(2 pi) constant.
Vector component_log_terms(const GmmSpec& spec,
                           const ScheduleEval& e,
                           std::span<const double> xt)
{
    const double a2 = e.alpha * e.alpha;
    const double s2 = e.sigma * e.sigma;
    Vector out(spec.modes());
    for (std::size_t k = 0; k < spec.modes(); ++k)
    {
        const auto mu = spec.means.row(k);
        const auto var = spec.variances.row(k);
        double acc = 0.0;
        for (std::size_t j = 0; j < spec.dim; ++j)
        {
            const double c = a2 * var[j] + s2;
            const double r = xt[j] - e.alpha * mu[j];
            acc += std::log(c) + r * r / c;
        }
        out[k] = std::log(spec.weights[k]) - 0.5 * acc;
    }
    return out;
}

// Normalizes log terms in place into probabilities; returns log-sum-exp.
double softmax_in_place(Vector& logs)
{
    const double m = *std::max_element(logs.begin(), logs.end());
    double total = 0.0;
    for (double& l : logs)
    {
        l = std::exp(l - m);
        total += l;
    }
    for (double& l : logs)
        l /= total;
    return m + std::log(total);
}

}  // namespace

double marginal_log_density(const GmmSpec& spec,
                            const Schedule& schedule,
                            std::span<const double> xt,
                            double t)
{
    require_same_size(xt.size(), spec.dim, "marginal_log_density");
    const auto e = eval(schedule, t);
    Vector logs = component_log_terms(spec, e, xt);
    const double lse = softmax_in_place(logs);
    return lse - 0.5 * static_cast<double>(spec.dim) * std::log(2.0 * std::numbers::pi);
}

double data_log_density(const GmmSpec& spec, std::span<const double> x)
{
    require_same_size(x.size(), spec.dim, "data_log_density");
    const ScheduleEval at_data{1.0, 0.0, 0.0, 0.0, 0.0};
    Vector logs = component_log_terms(spec, at_data, x);
    const double lse = softmax_in_place(logs);
    return lse - 0.5 * static_cast<double>(spec.dim) * std::log(2.0 * std::numbers::pi);
}

GmmPosterior posterior(const GmmSpec& spec,
                       const Schedule& schedule,
                       std::span<const double> xt,
                       double t)
{
    require_same_size(xt.size(), spec.dim, "posterior");
    const auto e = eval(schedule, t);
    GmmPosterior post;
    post.responsibilities = component_log_terms(spec, e, xt);
    softmax_in_place(post.responsibilities);

    const double a2 = e.alpha * e.alpha;
    const double s2 = e.sigma * e.sigma;
    post.means = Matrix(spec.modes(), spec.dim);
    post.variances = Matrix(spec.modes(), spec.dim);
    post.mean.assign(spec.dim, 0.0);
    for (std::size_t k = 0; k < spec.modes(); ++k)
    {
        const auto mu = spec.means.row(k);
        const auto var = spec.variances.row(k);
        const double r = post.responsibilities[k];
        for (std::size_t j = 0; j < spec.dim; ++j)
        {
            const double c = a2 * var[j] + s2;
            const double m = (s2 * mu[j] + e.alpha * var[j] * xt[j]) / c;
            post.means(k, j) = m;
            post.variances(k, j) = var[j] * s2 / c;
            post.mean[j] += r * m;
        }
    }
    return post;
}

void sample_posterior(const GmmPosterior& post, Rng& rng, std::span<double> out)
{
    const auto& r = post.responsibilities;
    std::size_t k = r.size() - 1;
    if (r.size() > 1)
    {
        const double u = rng.uniform();
        double acc = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i)
        {
            acc += r[i];
            if (u < acc)
            {
                k = i;
                break;
            }
        }
    }
    const auto m = post.means.row(k);
    const auto v = post.variances.row(k);
    for (std::size_t j = 0; j < m.size(); ++j)
        out[j] = m[j] + std::sqrt(v[j]) * rng.normal();
}

Vector exact_velocity(const GmmSpec& spec,
                      const Schedule& schedule,
                      std::span<const double> xt,
                      double t)
{
    const GmmPosterior post = posterior(spec, schedule, xt, t);
    return cond_velocity(schedule, xt, post.mean, t);
}

Vector exact_score(const GmmSpec& spec,
                   const Schedule& schedule,
                   std::span<const double> xt,
                   double t)
{
    require_same_size(xt.size(), spec.dim, "exact_score");
    const auto e = eval(schedule, t);
    Vector r = component_log_terms(spec, e, xt);
    softmax_in_place(r);
    const double a2 = e.alpha * e.alpha;
    const double s2 = e.sigma * e.sigma;
    Vector score(spec.dim, 0.0);
    for (std::size_t k = 0; k < spec.modes(); ++k)
    {
        const auto mu = spec.means.row(k);
        const auto var = spec.variances.row(k);
        for (std::size_t j = 0; j < spec.dim; ++j)
            score[j] -= r[k] * (xt[j] - e.alpha * mu[j]) / (a2 * var[j] + s2);
    }
    return score;
}

}  // namespace svl
