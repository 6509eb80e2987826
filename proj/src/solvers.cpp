#include "stablevel/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "stablevel/errors.hpp"
#include "stablevel/parallel.hpp"

namespace svl {

std::string to_string(BaseSolver s)
{
    return s == BaseSolver::euler_ode ? "euler_ode" : "euler_maruyama";
}

BaseSolver base_solver_from_string(std::string_view name)
{
    if (name == "euler_ode")
        return BaseSolver::euler_ode;
    if (name == "euler_maruyama")
        return BaseSolver::euler_maruyama;
    throw ConfigError("unknown base solver '" + std::string(name) + "'");
}

std::string to_string(DiffusionKind k)
{
    return k == DiffusionKind::sigma ? "sigma" : "zero";
}

DiffusionKind diffusion_kind_from_string(std::string_view name)
{
    if (name == "sigma")
        return DiffusionKind::sigma;
    if (name == "zero")
        return DiffusionKind::zero;
    throw ConfigError("unknown diffusion coefficient '" + std::string(name) + "'");
}

double diffusion_strength(DiffusionKind kind, const ScheduleEval& e)
{
    return kind == DiffusionKind::sigma ? e.sigma : 0.0;
}

namespace {

void require_backward(double t, double tau)
{
    if (!(tau < t))
    {
        std::ostringstream msg;
        msg.precision(17);
        msg << "step must move backward in time, got t = " << t << ", tau = " << tau;
        throw TimeOrderError(msg.str());
    }
}

double clamp_split(const SolverPlan& plan, const Schedule& schedule)
{
    return std::clamp(plan.xi, schedule.t_min, schedule.t_max);
}

}  // namespace

void SolverPlan::validate(const Schedule& schedule) const
{
    if (!(xi > 0.0 && xi <= 1.0))
        throw RangeError("SolverPlan: xi must lie in (0, 1]");
    if (!(f_beta >= 0.0 && f_beta <= 1.0))
        throw RangeError("SolverPlan: f_beta must lie in [0, 1]");
    const double s = clamp_split(*this, schedule);
    if (s < schedule.t_max && high_steps == 0)
        throw ConfigError("SolverPlan: high_steps must be positive when xi < t_max");
    if (s > schedule.t_min && low_steps == 0)
        throw ConfigError("SolverPlan: low_steps must be positive when xi > t_min");
}

std::vector<double> SolverPlan::time_grid(const Schedule& schedule) const
{
    validate(schedule);
    const double s = clamp_split(*this, schedule);
    std::vector<double> grid{schedule.t_max};
    if (s < schedule.t_max)
    {
        for (std::size_t i = 1; i < high_steps; ++i)
            grid.push_back(schedule.t_max
                           - (schedule.t_max - s) * static_cast<double>(i)
                                 / static_cast<double>(high_steps));
        grid.push_back(s);
    }
    if (s > schedule.t_min)
    {
        for (std::size_t i = 1; i < low_steps; ++i)
            grid.push_back(s - (s - schedule.t_min) * static_cast<double>(i)
                                   / static_cast<double>(low_steps));
        grid.push_back(schedule.t_min);
    }
    return grid;
}

std::size_t SolverPlan::split_index(const Schedule& schedule) const
{
    const double s = clamp_split(*this, schedule);
    return s < schedule.t_max ? high_steps : 0;
}

std::size_t SolverPlan::total_steps(const Schedule& schedule) const
{
    return time_grid(schedule).size() - 1;
}

Vector euler_step(const Schedule& schedule,
                  std::span<const double> v,
                  std::span<const double> xt,
                  double t,
                  double tau)
{
    require_backward(t, tau);
    require_same_size(v.size(), xt.size(), "euler_step");
    (void)schedule;
    Vector out(xt.size());
    const double dt = tau - t;
    for (std::size_t i = 0; i < xt.size(); ++i)
        out[i] = xt[i] + dt * v[i];
    return out;
}

Vector euler_maruyama_step(const Schedule& schedule,
                           std::span<const double> v,
                           std::span<const double> xt,
                           double t,
                           double tau,
                           DiffusionKind w_t,
                           Rng& rng)
{
    require_backward(t, tau);
    require_same_size(v.size(), xt.size(), "euler_maruyama_step");
    const auto e = eval(schedule, t);
    const double w = diffusion_strength(w_t, e);
    const double dt = tau - t;
    if (w == 0.0)
        return euler_step(schedule, v, xt, t, tau);
    const Vector s = score_from_velocity(schedule, xt, v, t);
    const double noise = std::sqrt(w * std::abs(dt));
    Vector out(xt.size());
    for (std::size_t i = 0; i < xt.size(); ++i)
        out[i] = xt[i] + dt * (v[i] - 0.5 * w * s[i]) + noise * rng.normal();
    return out;
}

double psi_factor(const Schedule& schedule, double t, double tau)
{
    require_backward(t, tau);
    schedule.require_in_range(t);
    schedule.require_in_range(tau);
    switch (schedule.kind)
    {
        case ScheduleKind::linear:
            // C_s / sigma_s = -1 / s^2, C_t = -1 / t
            return 1.0 - t / tau;
        case ScheduleKind::vp_cosine:
        {
            // C_s / sigma_s = -(pi/2) csc^2(pi s / 2), antiderivative cot(pi s / 2);
            // C_t = -(pi/2) / sin(pi t / 2)
            constexpr double half_pi = 0.5 * std::numbers::pi;
            const double integral = 1.0 / std::tan(half_pi * tau) - 1.0 / std::tan(half_pi * t);
            const double c_t = -half_pi / std::sin(half_pi * t);
            return integral / c_t;
        }
    }
    throw InvariantError("psi_factor: unknown schedule");
}

Vector stablevs_ode_step(const Schedule& schedule,
                         std::span<const double> v,
                         std::span<const double> xt,
                         double t,
                         double tau)
{
    require_same_size(v.size(), xt.size(), "stablevs_ode_step");
    const double psi = psi_factor(schedule, t, tau);
    const auto et = eval(schedule, t);
    const auto etau = eval(schedule, tau);
    const double xt_coeff = etau.sigma * (1.0 / et.sigma - (et.sigma_dot / et.sigma) * psi);
    const double v_coeff = etau.sigma * psi;
    Vector out(xt.size());
    for (std::size_t i = 0; i < xt.size(); ++i)
        out[i] = xt_coeff * xt[i] + v_coeff * v[i];
    return out;
}

StableVsCoefficients stablevs_coefficients(const Schedule& schedule,
                                           double t,
                                           double tau,
                                           double f_beta)
{
    require_backward(t, tau);
    if (!(f_beta >= 0.0 && f_beta <= 1.0))
        throw RangeError("stablevs_sde_step: f_beta must lie in [0, 1]");
    const auto et = eval(schedule, t);
    const auto etau = eval(schedule, tau);
    const double c_t = drift_coefficient(et);
    if (c_t == 0.0 || !std::isfinite(c_t))
        throw SingularityError("stablevs_sde_step: C_t vanishes");
    StableVsCoefficients c{};
    c.beta = f_beta * etau.sigma;
    const double remaining = std::max(0.0, etau.sigma * etau.sigma - c.beta * c.beta);
    c.rho = std::sqrt(remaining) / et.sigma;
    c.lambda = (etau.alpha - et.alpha * c.rho) / c_t;
    c.xt_coeff = c.rho - c.lambda * et.sigma_dot / et.sigma;
    return c;
}

Vector stablevs_sde_step(const Schedule& schedule,
                         std::span<const double> v,
                         std::span<const double> xt,
                         double t,
                         double tau,
                         double f_beta,
                         Rng& rng)
{
    require_same_size(v.size(), xt.size(), "stablevs_sde_step");
    const auto c = stablevs_coefficients(schedule, t, tau, f_beta);
    Vector out(xt.size());
    for (std::size_t i = 0; i < xt.size(); ++i)
    {
        out[i] = c.xt_coeff * xt[i] + c.lambda * v[i];
        if (c.beta > 0.0)
            out[i] += c.beta * rng.normal();
    }
    return out;
}

Vector extract_x0(const Schedule& schedule,
                  std::span<const double> v,
                  std::span<const double> xt,
                  double t)
{
    require_same_size(v.size(), xt.size(), "extract_x0");
    const auto e = eval(schedule, t);
    const double c_t = drift_coefficient(e);
    if (c_t == 0.0 || !std::isfinite(c_t))
    {
        std::ostringstream msg;
        msg << "extract_x0: C_t degenerate at t = " << t;
        throw SingularityError(msg.str());
    }
    const double ratio = e.sigma_dot / e.sigma;
    Vector out(xt.size());
    for (std::size_t i = 0; i < xt.size(); ++i)
        out[i] = (v[i] - ratio * xt[i]) / c_t;
    return out;
}

VelocityFn oracle_velocity(const GmmSpec& spec, const Schedule& schedule)
{
    return [&spec, schedule](std::span<const double> xt, double t, std::span<double> out) {
        const Vector v = exact_velocity(spec, schedule, xt, t);
        std::copy(v.begin(), v.end(), out.begin());
    };
}

Matrix prior_draws(const Schedule& schedule, const Rng& rng, std::size_t count, std::size_t dim)
{
    const double scale = eval(schedule, schedule.t_max).sigma;
    Matrix out(count, dim);
    for (std::size_t i = 0; i < count; ++i)
    {
        Rng path = rng.derive(i);
        for (double& x : out.row(i))
            x = scale * path.normal();
    }
    return out;
}

Matrix integrate(const SolverPlan& plan,
                 const Schedule& schedule,
                 const VelocityFn& velocity,
                 const Matrix& initial,
                 const Rng& rng,
                 std::size_t workers)
{
    const std::vector<double> grid = plan.time_grid(schedule);
    const std::size_t split = plan.split_index(schedule);
    const std::size_t dim = initial.cols();
    Matrix out(initial.rows(), dim);

    parallel_for(
        initial.rows(),
        [&](std::size_t p) {
            // Stream 0 of the path substream is reserved for the prior draw.
            Rng noise = rng.derive(p).derive(1);
            Vector x(initial.row(p).begin(), initial.row(p).end());
            Vector v(dim);
            std::size_t step = 0;
            auto eval_velocity = [&](double t) {
                try
                {
                    velocity(x, t, v);
                }
                catch (const std::exception& err)
                {
                    throw Error("velocity evaluation failed at step " + std::to_string(step)
                                + " (t = " + std::to_string(t) + "): " + err.what());
                }
            };
            for (; step + 1 < grid.size(); ++step)
            {
                const double t = grid[step];
                const double tau = grid[step + 1];
                eval_velocity(t);
                if (step < split || !plan.use_stablevs)
                {
                    if (plan.base == BaseSolver::euler_ode)
                        x = euler_step(schedule, v, x, t, tau);
                    else
                        x = euler_maruyama_step(schedule, v, x, t, tau, plan.w_t, noise);
                }
                else if (plan.f_beta == 0.0)
                {
                    x = stablevs_ode_step(schedule, v, x, t, tau);
                }
                else
                {
                    x = stablevs_sde_step(schedule, v, x, t, tau, plan.f_beta, noise);
                }
            }
            eval_velocity(grid.back());
            const Vector x0 = extract_x0(schedule, v, x, grid.back());
            std::copy(x0.begin(), x0.end(), out.row(p).begin());
        },
        workers);
    return out;
}

Matrix sample(const SolverPlan& plan,
              const Schedule& schedule,
              const VelocityFn& velocity,
              const Rng& rng,
              std::size_t count,
              std::size_t dim,
              std::size_t workers)
{
    const Matrix initial = prior_draws(schedule, rng, count, dim);
    return integrate(plan, schedule, velocity, initial, rng, workers);
}

Matrix reference_integrate(const Schedule& schedule,
                           const VelocityFn& velocity,
                           const Matrix& initial,
                           std::size_t steps,
                           std::size_t workers)
{
    if (steps == 0)
        throw ConfigError("reference_integrate: steps must be positive");
    const std::size_t dim = initial.cols();
    const double h = (schedule.t_min - schedule.t_max) / static_cast<double>(steps);
    Matrix out(initial.rows(), dim);
    parallel_for(
        initial.rows(),
        [&](std::size_t p) {
            Vector x(initial.row(p).begin(), initial.row(p).end());
            Vector k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);
            for (std::size_t s = 0; s < steps; ++s)
            {
                const double t = schedule.t_max + h * static_cast<double>(s);
                const double t_next = s + 1 == steps ? schedule.t_min : t + h;
                const double t_mid = 0.5 * (t + t_next);
                const double dt = t_next - t;
                velocity(x, t, k1);
                for (std::size_t j = 0; j < dim; ++j)
                    tmp[j] = x[j] + 0.5 * dt * k1[j];
                velocity(tmp, t_mid, k2);
                for (std::size_t j = 0; j < dim; ++j)
                    tmp[j] = x[j] + 0.5 * dt * k2[j];
                velocity(tmp, t_mid, k3);
                for (std::size_t j = 0; j < dim; ++j)
                    tmp[j] = x[j] + dt * k3[j];
                velocity(tmp, t_next, k4);
                for (std::size_t j = 0; j < dim; ++j)
                    x[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
            velocity(x, schedule.t_min, k1);
            const Vector x0 = extract_x0(schedule, k1, x, schedule.t_min);
            std::copy(x0.begin(), x0.end(), out.row(p).begin());
        },
        workers);
    return out;
}

BenchRow endpoint_errors(std::string id, std::size_t total_steps, const Matrix& endpoints, const Matrix& reference)
{
    if (endpoints.rows() != reference.rows() || endpoints.cols() != reference.cols() || endpoints.empty())
        throw ShapeError("endpoint_errors: endpoint sets must have the same nonempty shape");
    std::vector<double> errors(endpoints.rows());
    double sum = 0.0;
    for (std::size_t i = 0; i < endpoints.rows(); ++i)
    {
        errors[i] = std::sqrt(squared_distance(endpoints.row(i), reference.row(i)));
        sum += errors[i];
    }
    BenchRow row;
    row.id = std::move(id);
    row.total_steps = total_steps;
    row.mean_error = sum / static_cast<double>(errors.size());
    row.p95_error = quantile(std::move(errors), 0.95);
    return row;
}

}  // namespace svl
