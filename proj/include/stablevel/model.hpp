#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "matrix.hpp"
#include "rng.hpp"

namespace svl {

struct ModelArch
{
    std::size_t dim = 0;
    std::size_t time_features = 16;  // sin/cos pairs, so 2F inputs
    std::vector<std::size_t> hidden{256, 256, 256};
    std::size_t num_classes = 0;     // 0 = unconditional; else C + 1 embedding rows
    std::size_t embed_dim = 16;
    std::size_t representation_layer = 1;  // index into `hidden`

    void validate() const;
    std::size_t input_width() const;
    std::size_t parameter_count() const;
    bool conditional() const noexcept { return num_classes > 0; }
    bool operator==(const ModelArch&) const = default;
};

struct ForwardResult
{
    Vector v;
    Vector representation;
};

// One minibatch for loss_and_grad. Optional fields may be left empty.
struct TrainBatch
{
    Matrix xt;
    Vector t;
    std::vector<int> labels;   // per row, C for the null class; empty if unconditional
    Matrix targets;
    Vector main_weights;       // empty means all ones

    // Auxiliary alignment term: per-row weights and teacher features.
    Vector aux_weights;
    Matrix aux_targets;
    double lambda_ra = 0.0;

    std::size_t size() const noexcept { return xt.rows(); }
};

struct LossResult
{
    double loss = 0.0;
    double main_loss = 0.0;
    double aux_loss = 0.0;
    Vector grad;
};

/*!
 * MLP velocity field: inputs are xt, sinusoidal time features and an optional
 * class embedding; tanh hidden layers; linear output of width dim.
 * Parameters live in one flat array laid out layer by layer (W row-major,
 * then b), followed by the embedding table.
 */
class VelocityModel
{
  public:
    VelocityModel() = default;
    // Hidden layers use U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero,
    // output layer zero, embeddings N(0, 1).
    VelocityModel(ModelArch arch, Rng& rng);
    VelocityModel(ModelArch arch, Vector params);

    const ModelArch& arch() const noexcept { return arch_; }
    std::span<double> params() noexcept { return params_; }
    std::span<const double> params() const noexcept { return params_; }
    std::size_t representation_width() const { return arch_.hidden[arch_.representation_layer]; }

    ForwardResult forward(std::span<const double> xt, double t, std::optional<int> label = {}) const;

    // Batched forward; labels may be empty for unconditional models.
    Matrix predict(const Matrix& xt, std::span<const double> t, std::span<const int> labels = {}) const;

    LossResult loss_and_grad(const TrainBatch& batch) const;

  private:
    struct Layer
    {
        std::size_t in, out, w_offset, b_offset;
    };
    struct Activations
    {
        std::vector<Matrix> a;  // a[0] input, a[l + 1] output of layer l
    };

    void build_layout();
    int resolve_label(std::optional<int> label) const;
    void fill_input(const Matrix& xt, std::span<const double> t, std::span<const int> labels, Matrix& input) const;
    void run(Activations& acts) const;

    ModelArch arch_;
    std::vector<Layer> layers_;
    std::size_t embed_offset_ = 0;
    Vector params_;
    Vector frequencies_;
};

// Decoupled weight decay Adam with bias correction.
class AdamW
{
  public:
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;

    AdamW() = default;
    explicit AdamW(std::size_t size, double learning_rate = 1e-4);

    void step(std::span<double> params, std::span<const double> grad);

    std::uint64_t steps() const noexcept { return t_; }
    const Vector& first_moment() const noexcept { return m_; }
    const Vector& second_moment() const noexcept { return v_; }
    void restore(Vector m, Vector v, std::uint64_t steps);

  private:
    Vector m_, v_;
    std::uint64_t t_ = 0;
};

}  // namespace svl
