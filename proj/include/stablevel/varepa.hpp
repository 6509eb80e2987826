#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "matrix.hpp"
#include "rng.hpp"
#include "schedule.hpp"

namespace svl {

enum class WeightingKind
{
    hard,     // 1[t < xi]
    sigmoid,  // logistic(k (xi - t))
    snr,      // SNR(t) / (SNR(t) + SNR(xi))
};

std::string to_string(WeightingKind kind);
WeightingKind weighting_kind_from_string(std::string_view name);

/// Time weighting that gates the auxiliary alignment loss toward small t.
struct WeightingFn
{
    WeightingKind kind = WeightingKind::sigmoid;
    double xi = 0.7;
    double k = 20.0;

    void validate() const;
};

double weight(const WeightingFn& fn, const Schedule& schedule, double t);

/*!
 * mean(main) + lambda_ra * sum_i w_i aux_i / sum_i w_i.
 * The auxiliary term is zero when the weights sum to zero.
 */
double combined_loss(std::span<const double> main,
                     std::span<const double> aux,
                     std::span<const double> w,
                     double lambda_ra);

// d(combined_loss)/d(aux_i) = lambda_ra w_i / sum w (all zero if sum w == 0).
Vector auxiliary_coefficients(std::span<const double> w, double lambda_ra);

/// Fixed random linear map from data space to feature space.
class TeacherProjection
{
  public:
    TeacherProjection(std::size_t data_dim, std::size_t feature_dim, Rng& rng);

    std::size_t data_dim() const noexcept { return weights_.cols(); }
    std::size_t feature_dim() const noexcept { return weights_.rows(); }

    Vector operator()(std::span<const double> x0) const;

  private:
    Matrix weights_;  // feature_dim x data_dim
};

// 1 - cos(hidden, target). A zero-norm vector yields loss 1 and zero gradient.
double alignment_loss(std::span<const double> hidden,
                      std::span<const double> target,
                      std::span<double> grad_hidden = {});

// Per-sample 1 - cos(hidden_i, teacher(x0_i)); rows of `hidden` and `x0`.
Vector toy_alignment_loss(const Matrix& hidden,
                          const Matrix& x0,
                          const TeacherProjection& teacher);

}  // namespace svl
