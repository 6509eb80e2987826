#pragma once

#include <span>
#include <string>
#include <string_view>

#include "matrix.hpp"

namespace svl {

enum class ScheduleKind
{
    linear,      // alpha = 1 - t, sigma = t
    vp_cosine,   // alpha = cos(pi t / 2), sigma = sin(pi t / 2)
};

std::string to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(std::string_view name);

/// Interpolant x_t = alpha_t x0 + sigma_t eps on a clamped time range.
struct Schedule
{
    ScheduleKind kind = ScheduleKind::linear;
    double t_min = 1e-3;
    double t_max = 1.0 - 1e-3;

    // Throws RangeError unless 0 < t_min < 0.5 < t_max < 1.
    void validate() const;
    bool contains(double t) const noexcept { return t >= t_min && t <= t_max; }
    // Throws RangeError naming the clamp bounds when t is outside them.
    void require_in_range(double t) const;
};

struct ScheduleEval
{
    double alpha;
    double sigma;
    double alpha_dot;
    double sigma_dot;
    double snr;  // alpha^2 / sigma^2
};

// Unchecked coefficients, valid for any t in (0, 1).
ScheduleEval coefficients(ScheduleKind kind, double t);

ScheduleEval eval(const Schedule& schedule, double t);

struct PathSample
{
    Vector x0;
    Vector eps;
    double t = 0.0;
    Vector xt;
    // Reference row used to build xt, when drawn from a reference batch.
    std::size_t reference_index = 0;
};

PathSample corrupt(const Schedule& schedule,
                   std::span<const double> x0,
                   std::span<const double> eps,
                   double t);

// (sigma'/sigma)(xt - alpha x0) + alpha' x0
Vector cond_velocity(const Schedule& schedule,
                     std::span<const double> xt,
                     std::span<const double> x0,
                     double t);
// Same formula with precomputed coefficients, written into `out`.
void cond_velocity_into(const ScheduleEval& e,
                        std::span<const double> xt,
                        std::span<const double> x0,
                        std::span<double> out);

// sigma^-1 (alpha v - alpha' xt) / (alpha' sigma - alpha sigma')
Vector score_from_velocity(const Schedule& schedule,
                           std::span<const double> xt,
                           std::span<const double> v,
                           double t);
// Inverse of score_from_velocity for fixed xt.
Vector velocity_from_score(const Schedule& schedule,
                           std::span<const double> xt,
                           std::span<const double> score,
                           double t);

// C_t = alpha' - alpha sigma' / sigma
double drift_coefficient(const ScheduleEval& e);

}  // namespace svl
