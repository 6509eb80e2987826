#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "gmm.hpp"
#include "matrix.hpp"
#include "model.hpp"
#include "rng.hpp"
#include "schedule.hpp"
#include "solvers.hpp"

namespace svl {

enum class Normalization
{
    raw,
    sqrt_d,
};

enum class Estimator
{
    oracle,          // marginal velocity from the GMM closed form
    empirical_snis,  // marginal velocity by SNIS over a finite dataset
};

std::string to_string(Normalization n);
Normalization normalization_from_string(std::string_view name);
std::string to_string(Estimator e);
Estimator estimator_from_string(std::string_view name);

struct McBudget
{
    std::size_t probes = 4096;
    // Independent (x0, xt) draws averaged inside each probe.
    std::size_t inner = 1;
    std::size_t workers = 0;
};

struct VarianceEstimate
{
    double value = 0.0;
    double stderr_ = 0.0;  // sample SD of probe values / sqrt(P)
    Vector probe_values;
};

// E|v(xt|x0) - v(xt)|^2 with (x0, xt) from the forward path; v(xt) exact.
VarianceEstimate variance_cfm(const GmmSpec& spec,
                              const Schedule& schedule,
                              double t,
                              const McBudget& mc,
                              const Rng& rng);

// Same functional over a finite dataset: x0 drawn from its rows and v(xt)
// estimated by SNIS over all rows.
VarianceEstimate variance_cfm(const Matrix& dataset,
                              const Schedule& schedule,
                              double t,
                              const McBudget& mc,
                              const Rng& rng);

// E|v(xt) - v_StableVM(xt; refs)|^2 with xt from the marginal and references
// from the posterior procedure (one posterior row, n - 1 prior rows).
VarianceEstimate variance_stablevm(const GmmSpec& spec,
                                   const Schedule& schedule,
                                   double t,
                                   std::size_t n,
                                   const McBudget& mc,
                                   const Rng& rng);

struct VarianceCurve
{
    std::vector<double> t;
    std::vector<double> values;
    std::vector<double> stderr_;
    std::vector<double> q15;
    std::vector<double> q85;
    Normalization normalization = Normalization::raw;
    Estimator estimator = Estimator::oracle;
    std::size_t dim = 0;
    std::size_t n = 0;  // reference count for StableVM curves, 0 for CFM

    void validate() const;
};

// Grid "a:b:count" -> count evenly spaced points from a to b inclusive.
std::vector<double> parse_grid(std::string_view text);

// V_CFM over a grid. Oracle mode needs `spec`, empirical mode `dataset`.
VarianceCurve variance_curve(const GmmSpec* spec,
                             const Matrix* dataset,
                             const Schedule& schedule,
                             const std::vector<double>& grid,
                             const McBudget& mc,
                             Normalization normalization,
                             Estimator estimator,
                             const Rng& rng);

// Smallest grid t where value / max >= fraction.
double split_point(const VarianceCurve& curve, double fraction);

// 1/2 E_{xt ~ p_t} |v_model(xt, t) - v(xt)|^2.
double second_moment_mse(const VelocityModel& model,
                         const GmmSpec& oracle,
                         const Schedule& schedule,
                         double t,
                         const McBudget& mc,
                         const Rng& rng);

double second_moment_mse(const VelocityFn& velocity,
                         const GmmSpec& oracle,
                         const Schedule& schedule,
                         double t,
                         const McBudget& mc,
                         const Rng& rng);

}  // namespace svl
