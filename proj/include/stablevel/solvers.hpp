#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gmm.hpp"
#include "matrix.hpp"
#include "rng.hpp"
#include "schedule.hpp"

namespace svl {

enum class BaseSolver
{
    euler_ode,
    euler_maruyama,
};

// Diffusion strength w_t of the reverse SDE.
enum class DiffusionKind
{
    sigma,  // w_t = sigma_t
    zero,   // w_t = 0 (reduces Euler-Maruyama to Euler)
};

std::string to_string(BaseSolver s);
BaseSolver base_solver_from_string(std::string_view name);
std::string to_string(DiffusionKind k);
DiffusionKind diffusion_kind_from_string(std::string_view name);

double diffusion_strength(DiffusionKind kind, const ScheduleEval& e);

/*!
 * Two-regime sampling plan. The base solver runs `high_steps` uniform steps
 * from t_max down to the split point, StableVS runs `low_steps` uniform steps
 * from the split point down to t_min, and the path ends with x0 extraction at
 * t_min. A split at or above t_max makes the whole range low-variance; a split
 * at or below t_min disables StableVS.
 */
struct SolverPlan
{
    double xi = 0.85;
    std::size_t high_steps = 19;
    std::size_t low_steps = 9;
    BaseSolver base = BaseSolver::euler_ode;
    double f_beta = 0.0;
    DiffusionKind w_t = DiffusionKind::sigma;
    // When false the base solver also covers [t_min, xi] on the same grid.
    bool use_stablevs = true;

    void validate(const Schedule& schedule) const;

    // Strictly decreasing times from t_max to t_min.
    std::vector<double> time_grid(const Schedule& schedule) const;
    // Index into time_grid() of the split point.
    std::size_t split_index(const Schedule& schedule) const;
    std::size_t total_steps(const Schedule& schedule) const;
};

// xt + (tau - t) v
Vector euler_step(const Schedule& schedule,
                  std::span<const double> v,
                  std::span<const double> xt,
                  double t,
                  double tau);

// xt + dt (v - w/2 s) + sqrt(w |dt|) z with dt = tau - t < 0, s the score
// implied by v.
Vector euler_maruyama_step(const Schedule& schedule,
                           std::span<const double> v,
                           std::span<const double> xt,
                           double t,
                           double tau,
                           DiffusionKind w_t,
                           Rng& rng);

// (1 / C_t) * integral_t^tau C(s) / sigma_s ds, closed form per schedule.
double psi_factor(const Schedule& schedule, double t, double tau);

// Exact PF-ODE step under a single-point posterior.
Vector stablevs_ode_step(const Schedule& schedule,
                         std::span<const double> v,
                         std::span<const double> xt,
                         double t,
                         double tau);

struct StableVsCoefficients
{
    double beta;        // f_beta * sigma_tau
    double rho;         // sqrt((sigma_tau^2 - beta^2) / sigma_t^2)
    double lambda;      // (alpha_tau - alpha_t rho) / C_t
    double xt_coeff;    // rho - lambda sigma'_t / sigma_t
};

StableVsCoefficients stablevs_coefficients(const Schedule& schedule,
                                           double t,
                                           double tau,
                                           double f_beta);

// DDIM-style posterior step: mean (rho - lambda sigma'/sigma) xt + lambda v,
// noise beta z.
Vector stablevs_sde_step(const Schedule& schedule,
                         std::span<const double> v,
                         std::span<const double> xt,
                         double t,
                         double tau,
                         double f_beta,
                         Rng& rng);

// (v - (sigma'/sigma) xt) / C_t
Vector extract_x0(const Schedule& schedule,
                  std::span<const double> v,
                  std::span<const double> xt,
                  double t);

/// Velocity field evaluated at (xt, t), written into out.
using VelocityFn =
    std::function<void(std::span<const double> xt, double t, std::span<double> out)>;

VelocityFn oracle_velocity(const GmmSpec& spec, const Schedule& schedule);

/*!
 * Runs `count` paths from the standard-normal prior scaled by sigma(t_max).
 * Path i uses the substream rng.derive(i), so results do not depend on the
 * worker count. Velocity failures are rethrown with the step index.
 */
Matrix sample(const SolverPlan& plan,
              const Schedule& schedule,
              const VelocityFn& velocity,
              const Rng& rng,
              std::size_t count,
              std::size_t dim,
              std::size_t workers = 0);

// Same as sample() but starting from the given x(t_max) rows.
Matrix integrate(const SolverPlan& plan,
                 const Schedule& schedule,
                 const VelocityFn& velocity,
                 const Matrix& initial,
                 const Rng& rng,
                 std::size_t workers = 0);

// Draws the initial states used by sample(): row i from rng.derive(i).
Matrix prior_draws(const Schedule& schedule, const Rng& rng, std::size_t count, std::size_t dim);

// Fourth-order Runge-Kutta on a uniform grid of `steps` steps from t_max to
// t_min, finished by extract_x0 at t_min like sample().
Matrix reference_integrate(const Schedule& schedule,
                           const VelocityFn& velocity,
                           const Matrix& initial,
                           std::size_t steps,
                           std::size_t workers = 0);

struct BenchRow
{
    std::string id;
    std::size_t total_steps = 0;
    double mean_error = 0.0;
    double p95_error = 0.0;
};

// Per-path Euclidean distance between endpoint sets.
BenchRow endpoint_errors(std::string id, std::size_t total_steps, const Matrix& endpoints, const Matrix& reference);

}  // namespace svl
