#include "stablevel/profiler.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>

#include "stablevel/errors.hpp"
#include "stablevel/parallel.hpp"
#include "stablevel/targets.hpp"

namespace svl {

std::string to_string(Normalization n)
{
    return n == Normalization::raw ? "raw" : "sqrt_d";
}

Normalization normalization_from_string(std::string_view name)
{
    if (name == "raw")
        return Normalization::raw;
    if (name == "sqrt_d")
        return Normalization::sqrt_d;
    throw ConfigError("unknown normalization '" + std::string(name) + "'");
}

std::string to_string(Estimator e)
{
    return e == Estimator::oracle ? "oracle" : "empirical_snis";
}

Estimator estimator_from_string(std::string_view name)
{
    if (name == "oracle")
        return Estimator::oracle;
    if (name == "empirical" || name == "empirical_snis")
        return Estimator::empirical_snis;
    throw ConfigError("unknown estimator '" + std::string(name) + "'");
}

namespace {

void check_budget(const McBudget& mc)
{
    if (mc.probes < 2)
        throw RangeError("Monte Carlo budget needs at least 2 probes");
    if (mc.inner == 0)
        throw RangeError("Monte Carlo budget needs at least 1 inner draw");
}

VarianceEstimate summarize(Vector values)
{
    VarianceEstimate out;
    const double p = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values)
        mean += v;
    mean /= p;
    double ss = 0.0;
    for (double v : values)
        ss += (v - mean) * (v - mean);
    out.value = mean;
    out.stderr_ = std::sqrt(ss / (p - 1.0)) / std::sqrt(p);
    out.probe_values = std::move(values);
    return out;
}

// Runs probe(index, rng) -> value for every probe with per-probe substreams.
template <class Probe>
VarianceEstimate run_probes(const McBudget& mc, const Rng& rng, Probe&& probe)
{
    check_budget(mc);
    Vector values(mc.probes, 0.0);
    parallel_for(
        mc.probes,
        [&](std::size_t p) {
            Rng local = rng.derive(p);
            double acc = 0.0;
            for (std::size_t k = 0; k < mc.inner; ++k)
                acc += probe(local);
            values[p] = acc / static_cast<double>(mc.inner);
        },
        mc.workers);
    return summarize(std::move(values));
}

}  // namespace

VarianceEstimate variance_cfm(const GmmSpec& spec,
                              const Schedule& schedule,
                              double t,
                              const McBudget& mc,
                              const Rng& rng)
{
    spec.validate();
    schedule.require_in_range(t);
    const GmmSampler sampler(spec);
    const auto e = eval(schedule, t);
    const std::size_t d = spec.dim;
    return run_probes(mc, rng, [&](Rng& local) {
        Vector x0(d), xt(d), vc(d);
        sampler.draw(local, x0);
        for (std::size_t j = 0; j < d; ++j)
            xt[j] = e.alpha * x0[j] + e.sigma * local.normal();
        cond_velocity_into(e, xt, x0, vc);
        const Vector vm = exact_velocity(spec, schedule, xt, t);
        return squared_distance(vc, vm);
    });
}

VarianceEstimate variance_cfm(const Matrix& dataset,
                              const Schedule& schedule,
                              double t,
                              const McBudget& mc,
                              const Rng& rng)
{
    if (dataset.empty())
        throw DataError("variance_cfm: empty dataset");
    schedule.require_in_range(t);
    const auto e = eval(schedule, t);
    const std::size_t d = dataset.cols();
    return run_probes(mc, rng, [&](Rng& local) {
        Vector xt(d), vc(d);
        const auto x0 = dataset.row(local.uniform_index(dataset.rows()));
        for (std::size_t j = 0; j < d; ++j)
            xt[j] = e.alpha * x0[j] + e.sigma * local.normal();
        cond_velocity_into(e, xt, x0, vc);
        const auto est = snis_velocity(dataset, schedule, xt, t, false);
        return squared_distance(vc, est.velocity);
    });
}

VarianceEstimate variance_stablevm(const GmmSpec& spec,
                                   const Schedule& schedule,
                                   double t,
                                   std::size_t n,
                                   const McBudget& mc,
                                   const Rng& rng)
{
    if (n == 0)
        throw RangeError("variance_stablevm: n must be at least 1");
    spec.validate();
    schedule.require_in_range(t);
    const GmmSampler sampler(spec);
    const auto e = eval(schedule, t);
    const std::size_t d = spec.dim;
    return run_probes(mc, rng, [&](Rng& local) {
        Vector x0(d), xt(d), target(d), work(n);
        sampler.draw(local, x0);
        for (std::size_t j = 0; j < d; ++j)
            xt[j] = e.alpha * x0[j] + e.sigma * local.normal();
        const GmmPosterior post = posterior(spec, schedule, xt, t);
        const ReferenceBatch refs = sample_posterior_refs(post, sampler, n, local);
        stablevm_target_into(refs, e, xt, target, work);
        const Vector vm = cond_velocity(schedule, xt, post.mean, t);
        return squared_distance(target, vm);
    });
}

void VarianceCurve::validate() const
{
    if (values.size() != t.size() || stderr_.size() != t.size())
        throw InvariantError("VarianceCurve: column lengths differ");
    for (std::size_t i = 0; i < t.size(); ++i)
    {
        if (i > 0 && !(t[i] > t[i - 1]))
            throw InvariantError("VarianceCurve: grid must be strictly increasing");
        if (!(values[i] >= 0.0) || !(stderr_[i] >= 0.0))
            throw InvariantError("VarianceCurve: negative value or stderr");
    }
}

std::vector<double> parse_grid(std::string_view text)
{
    auto bad = [&] { return ConfigError("grid must look like a:b:count, got '" + std::string(text) + "'"); };
    const auto c1 = text.find(':');
    const auto c2 = c1 == std::string_view::npos ? c1 : text.find(':', c1 + 1);
    if (c2 == std::string_view::npos)
        throw bad();
    auto to_double = [&](std::string_view s) {
        try
        {
            std::size_t used = 0;
            const double v = std::stod(std::string(s), &used);
            if (used != s.size())
                throw bad();
            return v;
        }
        catch (const std::logic_error&)
        {
            throw bad();
        }
    };
    const double a = to_double(text.substr(0, c1));
    const double b = to_double(text.substr(c1 + 1, c2 - c1 - 1));
    std::size_t count = 0;
    const auto tail = text.substr(c2 + 1);
    const auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), count);
    if (ec != std::errc{} || ptr != tail.data() + tail.size() || count < 1 || !(b >= a))
        throw bad();
    if (count == 1)
        return {a};
    if (!(b > a))
        throw bad();
    std::vector<double> grid(count);
    for (std::size_t i = 0; i < count; ++i)
        grid[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1);
    return grid;
}

VarianceCurve variance_curve(const GmmSpec* spec,
                             const Matrix* dataset,
                             const Schedule& schedule,
                             const std::vector<double>& grid,
                             const McBudget& mc,
                             Normalization normalization,
                             Estimator estimator,
                             const Rng& rng)
{
    if (grid.empty())
        throw RangeError("variance_curve: empty grid");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1]))
            throw RangeError("variance_curve: grid must be strictly increasing");
    if (estimator == Estimator::oracle && spec == nullptr)
        throw ConfigError("variance_curve: oracle estimator needs a GMM spec");
    if (estimator == Estimator::empirical_snis && (dataset == nullptr || dataset->empty()))
        throw ConfigError("variance_curve: empirical estimator needs a dataset");

    VarianceCurve curve;
    curve.normalization = normalization;
    curve.estimator = estimator;
    curve.dim = estimator == Estimator::oracle ? spec->dim : dataset->cols();
    const double scale =
        normalization == Normalization::sqrt_d ? 1.0 / std::sqrt(static_cast<double>(curve.dim)) : 1.0;
    for (std::size_t g = 0; g < grid.size(); ++g)
    {
        const Rng point_rng = rng.derive(g);
        const VarianceEstimate est = estimator == Estimator::oracle
                                         ? variance_cfm(*spec, schedule, grid[g], mc, point_rng)
                                         : variance_cfm(*dataset, schedule, grid[g], mc, point_rng);
        curve.t.push_back(grid[g]);
        curve.values.push_back(scale * est.value);
        curve.stderr_.push_back(scale * est.stderr_);
        curve.q15.push_back(scale * quantile(est.probe_values, 0.15));
        curve.q85.push_back(scale * quantile(est.probe_values, 0.85));
    }
    curve.validate();
    return curve;
}

double split_point(const VarianceCurve& curve, double fraction)
{
    if (curve.t.empty())
        throw RangeError("split_point: empty curve");
    if (!(fraction > 0.0 && fraction < 1.0))
        throw RangeError("split_point: fraction must lie in (0, 1)");
    const double peak = *std::max_element(curve.values.begin(), curve.values.end());
    if (!(peak > 0.0))
        throw UndefinedSplitError("split_point: curve is identically zero");
    const double level = fraction * peak;
    for (std::size_t i = 0; i < curve.t.size(); ++i)
        if (curve.values[i] >= level)
            return curve.t[i];
    throw InvariantError("split_point: no grid value reaches the maximum");
}

namespace {

// Fixed probe set of xt ~ p_t so both overloads see identical draws.
Matrix marginal_probes(const GmmSpec& oracle, const Schedule& schedule, double t, std::size_t count, const Rng& rng)
{
    const GmmSampler sampler(oracle);
    const auto e = eval(schedule, t);
    Matrix xt(count, oracle.dim);
    Vector x0(oracle.dim);
    for (std::size_t p = 0; p < count; ++p)
    {
        Rng local = rng.derive(p);
        sampler.draw(local, x0);
        auto row = xt.row(p);
        for (std::size_t j = 0; j < oracle.dim; ++j)
            row[j] = e.alpha * x0[j] + e.sigma * local.normal();
    }
    return xt;
}

}  // namespace

double second_moment_mse(const VelocityModel& model,
                         const GmmSpec& oracle,
                         const Schedule& schedule,
                         double t,
                         const McBudget& mc,
                         const Rng& rng)
{
    if (model.arch().dim != oracle.dim)
        throw ConfigError("second_moment_mse: model dim does not match the oracle");
    check_budget(mc);
    schedule.require_in_range(t);
    const Matrix xt = marginal_probes(oracle, schedule, t, mc.probes, rng);
    const Vector times(mc.probes, t);
    const Matrix pred = model.predict(xt, times);
    double acc = 0.0;
    for (std::size_t p = 0; p < mc.probes; ++p)
        acc += squared_distance(pred.row(p), exact_velocity(oracle, schedule, xt.row(p), t));
    return 0.5 * acc / static_cast<double>(mc.probes);
}

double second_moment_mse(const VelocityFn& velocity,
                         const GmmSpec& oracle,
                         const Schedule& schedule,
                         double t,
                         const McBudget& mc,
                         const Rng& rng)
{
    check_budget(mc);
    schedule.require_in_range(t);
    const Matrix xt = marginal_probes(oracle, schedule, t, mc.probes, rng);
    Vector v(oracle.dim);
    double acc = 0.0;
    for (std::size_t p = 0; p < mc.probes; ++p)
    {
        velocity(xt.row(p), t, v);
        acc += squared_distance(v, exact_velocity(oracle, schedule, xt.row(p), t));
    }
    return 0.5 * acc / static_cast<double>(mc.probes);
}

}  // namespace svl
