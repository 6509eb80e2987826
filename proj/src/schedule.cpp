#include "stablevel/schedule.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "stablevel/errors.hpp"

namespace svl {

std::string to_string(ScheduleKind kind)
{
    switch (kind)
    {
        case ScheduleKind::linear:
            return "linear";
        case ScheduleKind::vp_cosine:
            return "vp-cosine";
    }
    return "unknown";
}

ScheduleKind schedule_kind_from_string(std::string_view name)
{
    if (name == "linear")
        return ScheduleKind::linear;
    if (name == "vp-cosine")
        return ScheduleKind::vp_cosine;
    throw ConfigError("unknown schedule kind '" + std::string(name) + "'");
}

void Schedule::validate() const
{
    if (!(t_min > 0.0 && t_min < 0.5 && t_max > 0.5 && t_max < 1.0))
    {
        std::ostringstream msg;
        msg << "schedule clamps must satisfy 0 < t_min < 0.5 < t_max < 1, got ["
            << t_min << ", " << t_max << "]";
        throw RangeError(msg.str());
    }
}

void Schedule::require_in_range(double t) const
{
    if (!contains(t))
    {
        std::ostringstream msg;
        msg.precision(17);
        msg << "time " << t << " outside [t_min, t_max] = [" << t_min << ", "
            << t_max << "]";
        throw RangeError(msg.str());
    }
}

ScheduleEval coefficients(ScheduleKind kind, double t)
{
    ScheduleEval e{};
    switch (kind)
    {
        case ScheduleKind::linear:
            e.alpha = 1.0 - t;
            e.sigma = t;
            e.alpha_dot = -1.0;
            e.sigma_dot = 1.0;
            break;
        case ScheduleKind::vp_cosine:
        {
            constexpr double half_pi = 0.5 * std::numbers::pi;
            const double c = std::cos(half_pi * t);
            const double s = std::sin(half_pi * t);
            e.alpha = c;
            e.sigma = s;
            e.alpha_dot = -half_pi * s;
            e.sigma_dot = half_pi * c;
            break;
        }
    }
    e.snr = (e.alpha * e.alpha) / (e.sigma * e.sigma);
    return e;
}

ScheduleEval eval(const Schedule& schedule, double t)
{
    schedule.require_in_range(t);
    return coefficients(schedule.kind, t);
}

double drift_coefficient(const ScheduleEval& e)
{
    return e.alpha_dot - e.alpha * e.sigma_dot / e.sigma;
}

PathSample corrupt(const Schedule& schedule,
                   std::span<const double> x0,
                   std::span<const double> eps,
                   double t)
{
    require_same_size(x0.size(), eps.size(), "corrupt: x0 vs eps");
    const auto e = eval(schedule, t);
    PathSample p;
    p.x0.assign(x0.begin(), x0.end());
    p.eps.assign(eps.begin(), eps.end());
    p.t = t;
    p.xt.resize(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i)
        p.xt[i] = e.alpha * x0[i] + e.sigma * eps[i];
    return p;
}

void cond_velocity_into(const ScheduleEval& e,
                        std::span<const double> xt,
                        std::span<const double> x0,
                        std::span<double> out)
{
    const double ratio = e.sigma_dot / e.sigma;
    for (std::size_t i = 0; i < xt.size(); ++i)
        out[i] = ratio * (xt[i] - e.alpha * x0[i]) + e.alpha_dot * x0[i];
}

Vector cond_velocity(const Schedule& schedule,
                     std::span<const double> xt,
                     std::span<const double> x0,
                     double t)
{
    require_same_size(xt.size(), x0.size(), "cond_velocity: xt vs x0");
    const auto e = eval(schedule, t);
    Vector v(xt.size());
    cond_velocity_into(e, xt, x0, v);
    return v;
}

namespace {

double score_denominator(const ScheduleEval& e, double t)
{
    const double denom = e.alpha_dot * e.sigma - e.alpha * e.sigma_dot;
    if (denom == 0.0 || !std::isfinite(denom))
    {
        std::ostringstream msg;
        msg.precision(17);
        msg << "score/velocity conversion is singular at t = " << t;
        throw SingularityError(msg.str());
    }
    return denom;
}

}  // namespace

Vector score_from_velocity(const Schedule& schedule,
                           std::span<const double> xt,
                           std::span<const double> v,
                           double t)
{
    require_same_size(xt.size(), v.size(), "score_from_velocity: xt vs v");
    const auto e = eval(schedule, t);
    const double scale = 1.0 / (e.sigma * score_denominator(e, t));
    Vector s(xt.size());
    for (std::size_t i = 0; i < xt.size(); ++i)
        s[i] = (e.alpha * v[i] - e.alpha_dot * xt[i]) * scale;
    return s;
}

Vector velocity_from_score(const Schedule& schedule,
                           std::span<const double> xt,
                           std::span<const double> score,
                           double t)
{
    require_same_size(xt.size(), score.size(), "velocity_from_score: xt vs score");
    const auto e = eval(schedule, t);
    const double denom = score_denominator(e, t);
    if (e.alpha == 0.0)
        throw SingularityError("velocity_from_score: alpha vanishes");
    Vector v(xt.size());
    for (std::size_t i = 0; i < xt.size(); ++i)
        v[i] = (score[i] * e.sigma * denom + e.alpha_dot * xt[i]) / e.alpha;
    return v;
}

}  // namespace svl
