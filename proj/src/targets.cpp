#include "stablevel/targets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stablevel/errors.hpp"

namespace svl {

ReferenceBatch::ReferenceBatch(Matrix pts) : points(std::move(pts))
{
    if (points.rows() == 0)
        throw DataError("ReferenceBatch: at least one reference required");
    for (double x : points.flat())
        if (!std::isfinite(x))
            throw DataError("ReferenceBatch: non-finite reference");
    log_weight_workspace.resize(points.rows());
}

PathSample sample_gmm_path(const ReferenceBatch& batch,
                           const Schedule& schedule,
                           double t,
                           Rng& rng)
{
    if (batch.size() == 0)
        throw DataError("sample_gmm_path: empty reference batch");
    const std::size_t i = rng.uniform_index(batch.size());
    Vector eps(batch.dim());
    rng.fill_normal(eps);
    PathSample p = corrupt(schedule, batch.points.row(i), eps, t);
    p.reference_index = i;
    return p;
}

void reference_weights_into(const ReferenceBatch& batch,
                            const ScheduleEval& e,
                            std::span<const double> xt,
                            std::span<double> log_weights)
{
    const std::size_t n = batch.size();
    const std::size_t d = batch.dim();
    const double scale = -0.5 / (e.sigma * e.sigma);
    double max_log = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k)
    {
        const auto x0 = batch.points.row(k);
        double dist = 0.0;
        for (std::size_t j = 0; j < d; ++j)
        {
            const double r = xt[j] - e.alpha * x0[j];
            dist += r * r;
        }
        log_weights[k] = scale * dist;
        max_log = std::max(max_log, log_weights[k]);
    }
    if (!std::isfinite(max_log))
        throw InvariantError("reference weights: every log-weight is -inf");
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k)
    {
        log_weights[k] = std::exp(log_weights[k] - max_log);
        total += log_weights[k];
    }
    const double inv = 1.0 / total;
    for (std::size_t k = 0; k < n; ++k)
        log_weights[k] *= inv;
}

Vector reference_weights(const ReferenceBatch& batch,
                         const Schedule& schedule,
                         std::span<const double> xt,
                         double t)
{
    require_same_size(xt.size(), batch.dim(), "reference_weights");
    Vector w(batch.size());
    reference_weights_into(batch, eval(schedule, t), xt, w);
    return w;
}

void stablevm_target_into(const ReferenceBatch& batch,
                          const ScheduleEval& e,
                          std::span<const double> xt,
                          std::span<double> out,
                          std::span<double> workspace)
{
    reference_weights_into(batch, e, xt, workspace);
    // The conditional velocity is affine in x0, so the weighted average of
    // velocities equals the velocity at the weighted mean reference.
    const std::size_t d = batch.dim();
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t k = 0; k < batch.size(); ++k)
    {
        const double w = workspace[k];
        if (w == 0.0)
            continue;
        const auto x0 = batch.points.row(k);
        for (std::size_t j = 0; j < d; ++j)
            out[j] += w * x0[j];
    }
    const double ratio = e.sigma_dot / e.sigma;
    for (std::size_t j = 0; j < d; ++j)
        out[j] = ratio * (xt[j] - e.alpha * out[j]) + e.alpha_dot * out[j];
}

Vector stablevm_target(ReferenceBatch& batch,
                       const Schedule& schedule,
                       std::span<const double> xt,
                       double t)
{
    require_same_size(xt.size(), batch.dim(), "stablevm_target");
    if (batch.log_weight_workspace.size() != batch.size())
        batch.log_weight_workspace.resize(batch.size());
    Vector out(batch.dim());
    stablevm_target_into(batch, eval(schedule, t), xt, out, batch.log_weight_workspace);
    return out;
}

StfDraw stf_target(ReferenceBatch& batch, const Schedule& schedule, double t, Rng& rng)
{
    if (batch.size() == 0)
        throw DataError("stf_target: empty reference batch");
    Vector eps(batch.dim());
    rng.fill_normal(eps);
    PathSample p = corrupt(schedule, batch.points.row(0), eps, t);
    StfDraw draw;
    draw.target = stablevm_target(batch, schedule, p.xt, t);
    draw.xt = std::move(p.xt);
    return draw;
}

SnisEstimate snis_velocity(const Matrix& points,
                           const Schedule& schedule,
                           std::span<const double> xt,
                           double t,
                           bool with_stderr)
{
    if (points.rows() == 0)
        throw DataError("snis_velocity: empty dataset");
    require_same_size(xt.size(), points.cols(), "snis_velocity");
    const auto e = eval(schedule, t);
    const std::size_t n = points.rows();
    const std::size_t d = points.cols();
    const double scale = -0.5 / (e.sigma * e.sigma);

    auto log_weight = [&](std::size_t i) {
        const auto x0 = points.row(i);
        double dist = 0.0;
        for (std::size_t j = 0; j < d; ++j)
        {
            const double r = xt[j] - e.alpha * x0[j];
            dist += r * r;
        }
        return scale * dist;
    };

    // Pass 1: running max m, S = sum exp(l - m), A = sum exp(l - m) x0.
    double m = -std::numeric_limits<double>::infinity();
    double total = 0.0;
    Vector acc(d, 0.0);
    Vector chunk(std::min(n, snis_chunk_rows));
    for (std::size_t lo = 0; lo < n; lo += snis_chunk_rows)
    {
        const std::size_t hi = std::min(n, lo + snis_chunk_rows);
        double chunk_max = -std::numeric_limits<double>::infinity();
        for (std::size_t i = lo; i < hi; ++i)
        {
            chunk[i - lo] = log_weight(i);
            chunk_max = std::max(chunk_max, chunk[i - lo]);
        }
        if (chunk_max > m)
        {
            const double rescale = std::isfinite(m) ? std::exp(m - chunk_max) : 0.0;
            total *= rescale;
            for (double& a : acc)
                a *= rescale;
            m = chunk_max;
        }
        for (std::size_t i = lo; i < hi; ++i)
        {
            const double w = std::exp(chunk[i - lo] - m);
            if (w == 0.0)
                continue;
            total += w;
            const auto x0 = points.row(i);
            for (std::size_t j = 0; j < d; ++j)
                acc[j] += w * x0[j];
        }
    }
    if (!(total > 0.0))
        throw InvariantError("snis_velocity: all weights vanished");

    Vector mean_x0(d);
    for (std::size_t j = 0; j < d; ++j)
        mean_x0[j] = acc[j] / total;

    SnisEstimate est;
    est.velocity.resize(d);
    cond_velocity_into(e, xt, mean_x0, est.velocity);
    est.stderr_.assign(d, 0.0);

    if (with_stderr)
    {
        // v_i - v = C_t (x0_i - mean_x0), so the velocity error is the
        // reference-mean error scaled by |C_t|.
        const double c = drift_coefficient(e);
        const double log_total = m + std::log(total);
        double sum_w2 = 0.0;
        Vector var(d, 0.0);
        for (std::size_t i = 0; i < n; ++i)
        {
            const double w = std::exp(log_weight(i) - log_total);
            if (w == 0.0)
                continue;
            const double w2 = w * w;
            sum_w2 += w2;
            const auto x0 = points.row(i);
            for (std::size_t j = 0; j < d; ++j)
            {
                const double r = x0[j] - mean_x0[j];
                var[j] += w2 * r * r;
            }
        }
        for (std::size_t j = 0; j < d; ++j)
            est.stderr_[j] = std::abs(c) * std::sqrt(var[j]);
        est.effective_size = 1.0 / sum_w2;
    }
    return est;
}

ReferenceBatch sample_posterior_refs(const GmmPosterior& post,
                                     const GmmSampler& prior,
                                     std::size_t n,
                                     Rng& rng,
                                     std::size_t* posterior_row)
{
    if (n == 0)
        throw RangeError("sample_posterior_refs: n must be positive");
    const std::size_t d = prior.spec().dim;
    const std::size_t chosen = rng.uniform_index(n);
    Matrix pts(n, d);
    for (std::size_t r = 0; r < n; ++r)
    {
        if (r == chosen)
            sample_posterior(post, rng, pts.row(r));
        else
            prior.draw(rng, pts.row(r));
    }
    if (posterior_row)
        *posterior_row = chosen;
    return ReferenceBatch(std::move(pts));
}

ReferenceBatch sample_posterior_refs(const GmmSpec& spec,
                                     const Schedule& schedule,
                                     std::span<const double> xt,
                                     double t,
                                     std::size_t n,
                                     Rng& rng)
{
    const GmmPosterior post = posterior(spec, schedule, xt, t);
    const GmmSampler prior(spec);
    return sample_posterior_refs(post, prior, n, rng);
}

}  // namespace svl
