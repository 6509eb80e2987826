#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "matrix.hpp"
#include "rng.hpp"
#include "schedule.hpp"

namespace svl {

/*!
 * Diagonal-covariance Gaussian mixture used as the ground-truth data
 * distribution q(x0). Every corrupted marginal p_t stays a Gaussian mixture,
 * so marginal density, velocity and score are available in closed form.
 *
 * When `labels` is present it assigns a class id to each component; the
 * class-conditional distribution is the mixture restricted to that class's
 * components with renormalized weights.
 */
struct GmmSpec
{
    std::size_t dim = 0;
    Vector weights;     // K
    Matrix means;       // K x dim
    Matrix variances;   // K x dim
    std::optional<std::vector<int>> labels;

    std::size_t modes() const noexcept { return weights.size(); }
    // Number of classes C (0 when unlabeled).
    std::size_t num_classes() const;

    // Throws DataError / ShapeError describing the first violated invariant.
    void validate() const;

    // Mixture restricted to components carrying `label`.
    GmmSpec condition_on(int label) const;
};

// Means ~ U[-1, 1], variances ~ U[1e-2, 1e-1], weights ~ U(0.1, 1) normalized.
GmmSpec random_spec(std::size_t dim, std::size_t modes, Rng& rng);

// Convenience constructors used across tests and the CLI.
GmmSpec single_gaussian(std::span<const double> mean, std::span<const double> variance);
GmmSpec standard_normal_spec(std::size_t dim);
// Single component with variance `tiny` in every coordinate.
GmmSpec delta_spec(std::span<const double> point, double tiny = 1e-20);
// Equal-weight components at -offset and +offset along every axis.
GmmSpec symmetric_two_mode_spec(std::size_t dim, double offset, double variance);

/// Categorical component sampler with a cached cumulative table.
class GmmSampler
{
  public:
    explicit GmmSampler(const GmmSpec& spec);

    // Draws one point into `out` and returns its component index.
    std::size_t draw(Rng& rng, std::span<double> out) const;
    std::size_t draw_component(Rng& rng) const;

    const GmmSpec& spec() const noexcept { return *spec_; }

  private:
    const GmmSpec* spec_;
    Vector cumulative_;
};

struct GmmDraws
{
    Matrix points;                    // count x dim
    std::vector<int> labels;          // empty when the spec is unlabeled
    std::vector<std::size_t> components;
};

GmmDraws sample(const GmmSpec& spec, Rng& rng, std::size_t count);

double marginal_log_density(const GmmSpec& spec,
                            const Schedule& schedule,
                            std::span<const double> xt,
                            double t);

// log q(x) of the data distribution itself (t = 0).
double data_log_density(const GmmSpec& spec, std::span<const double> x);

/// Exact posterior p_t(x0 | xt): again a diagonal Gaussian mixture.
struct GmmPosterior
{
    Vector responsibilities;  // K, sums to 1
    Matrix means;             // K x dim, within-component posterior means
    Matrix variances;         // K x dim, within-component posterior variances
    Vector mean;              // overall posterior mean E[x0 | xt]
};

GmmPosterior posterior(const GmmSpec& spec,
                       const Schedule& schedule,
                       std::span<const double> xt,
                       double t);

// Draws x0 ~ p_t(x0 | xt) into `out`.
void sample_posterior(const GmmPosterior& post, Rng& rng, std::span<double> out);

Vector exact_velocity(const GmmSpec& spec,
                      const Schedule& schedule,
                      std::span<const double> xt,
                      double t);

Vector exact_score(const GmmSpec& spec,
                   const Schedule& schedule,
                   std::span<const double> xt,
                   double t);

}  // namespace svl
