#pragma once

#include <cstddef>
#include <span>

#include "gmm.hpp"
#include "matrix.hpp"
#include "rng.hpp"
#include "schedule.hpp"

namespace svl {

/// n reference points x0^1..x0^n plus a scratch buffer for log-weights.
struct ReferenceBatch
{
    Matrix points;
    Vector log_weight_workspace;

    ReferenceBatch() = default;
    // Throws DataError for an empty or non-finite batch.
    explicit ReferenceBatch(Matrix pts);

    std::size_t size() const noexcept { return points.rows(); }
    std::size_t dim() const noexcept { return points.cols(); }
};

// Draws xt from the composite path (1/n) sum_i p_t(. | x0^i): a uniform
// reference index, then fresh standard-normal noise.
PathSample sample_gmm_path(const ReferenceBatch& batch,
                           const Schedule& schedule,
                           double t,
                           Rng& rng);

// Self-normalized weights softmax_k(-|xt - alpha x0^k|^2 / (2 sigma^2)).
// `log_weights` must hold batch.size() entries and receives the weights.
void reference_weights_into(const ReferenceBatch& batch,
                            const ScheduleEval& e,
                            std::span<const double> xt,
                            std::span<double> log_weights);
Vector reference_weights(const ReferenceBatch& batch,
                         const Schedule& schedule,
                         std::span<const double> xt,
                         double t);

// Hot-path StableVM target with caller-owned workspace (thread-safe for a
// shared batch as long as every thread passes its own workspace).
void stablevm_target_into(const ReferenceBatch& batch,
                          const ScheduleEval& e,
                          std::span<const double> xt,
                          std::span<double> out,
                          std::span<double> workspace);

/// Self-normalized importance-weighted average of conditional velocities.
Vector stablevm_target(ReferenceBatch& batch,
                       const Schedule& schedule,
                       std::span<const double> xt,
                       double t);

struct StfDraw
{
    Vector xt;
    Vector target;
};

// xt is noised from the first reference only; the target uses the same
// weighting as stablevm_target over the whole batch.
StfDraw stf_target(ReferenceBatch& batch, const Schedule& schedule, double t, Rng& rng);

struct SnisEstimate
{
    Vector velocity;
    Vector stderr_;            // delta-method standard error per coordinate
    double effective_size = 0.0;  // 1 / sum w_i^2
};

inline constexpr std::size_t snis_chunk_rows = 8192;

/*!
 * Self-normalized importance sampling estimate of the marginal velocity over
 * a finite dataset. Streams the dataset in chunks of snis_chunk_rows with a
 * running max for log-sum-exp, so memory does not grow with N. When
 * `with_stderr` is set a second pass computes sum_i w_i^2 (v_i - v)^2.
 */
SnisEstimate snis_velocity(const Matrix& points,
                           const Schedule& schedule,
                           std::span<const double> xt,
                           double t,
                           bool with_stderr = true);

/*!
 * Reference batch drawn from the posterior of the composite path given xt:
 * one uniformly chosen row comes from the exact posterior p_t(x0 | xt), every
 * other row is an independent draw from q.
 */
ReferenceBatch sample_posterior_refs(const GmmSpec& spec,
                                     const Schedule& schedule,
                                     std::span<const double> xt,
                                     double t,
                                     std::size_t n,
                                     Rng& rng);

// Variant reusing a precomputed posterior and sampler; reports the row index
// that came from the posterior.
ReferenceBatch sample_posterior_refs(const GmmPosterior& post,
                                     const GmmSampler& prior,
                                     std::size_t n,
                                     Rng& rng,
                                     std::size_t* posterior_row = nullptr);

}  // namespace svl
