#include "stablevel/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stablevel/errors.hpp"
#include "stablevel/varepa.hpp"

namespace svl {

void ModelArch::validate() const
{
    if (dim == 0)
        throw ConfigError("model: dim must be positive");
    if (hidden.empty())
        throw ConfigError("model: at least one hidden layer is required");
    for (std::size_t h : hidden)
        if (h == 0)
            throw ConfigError("model: hidden widths must be positive");
    if (representation_layer >= hidden.size())
        throw ConfigError("model: representation_layer out of range");
    if (conditional() && embed_dim == 0)
        throw ConfigError("model: conditional models need embed_dim > 0");
}

std::size_t ModelArch::input_width() const
{
    return dim + 2 * time_features + (conditional() ? embed_dim : 0);
}

std::size_t ModelArch::parameter_count() const
{
    std::size_t count = 0;
    std::size_t in = input_width();
    for (std::size_t h : hidden)
    {
        count += h * in + h;
        in = h;
    }
    count += dim * in + dim;
    if (conditional())
        count += (num_classes + 1) * embed_dim;
    return count;
}

void VelocityModel::build_layout()
{
    arch_.validate();
    layers_.clear();
    std::size_t offset = 0;
    std::size_t in = arch_.input_width();
    auto add = [&](std::size_t out) {
        layers_.push_back({in, out, offset, offset + out * in});
        offset += out * in + out;
        in = out;
    };
    for (std::size_t h : arch_.hidden)
        add(h);
    add(arch_.dim);
    embed_offset_ = offset;

    // Geometric frequencies from 1 to 100 rad per unit time.
    frequencies_.resize(arch_.time_features);
    for (std::size_t k = 0; k < arch_.time_features; ++k)
    {
        const double frac = arch_.time_features > 1
                                ? static_cast<double>(k) / static_cast<double>(arch_.time_features - 1)
                                : 0.0;
        frequencies_[k] = std::pow(100.0, frac);
    }
}

VelocityModel::VelocityModel(ModelArch arch, Rng& rng) : arch_(std::move(arch))
{
    build_layout();
    params_.assign(arch_.parameter_count(), 0.0);
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l)
    {
        const Layer& layer = layers_[l];
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
        for (std::size_t i = 0; i < layer.in * layer.out; ++i)
            params_[layer.w_offset + i] = rng.uniform(-bound, bound);
    }
    if (arch_.conditional())
        for (std::size_t i = embed_offset_; i < params_.size(); ++i)
            params_[i] = rng.normal();
}

VelocityModel::VelocityModel(ModelArch arch, Vector params)
    : arch_(std::move(arch)), params_(std::move(params))
{
    build_layout();
    if (params_.size() != arch_.parameter_count())
        throw ShapeError("model: parameter block has " + std::to_string(params_.size())
                         + " entries, architecture needs " + std::to_string(arch_.parameter_count()));
}

int VelocityModel::resolve_label(std::optional<int> label) const
{
    if (!arch_.conditional())
    {
        if (label)
            throw ConfigError("model: label given to an unconditional model");
        return -1;
    }
    const int null_class = static_cast<int>(arch_.num_classes);
    if (!label)
        return null_class;
    if (*label < 0 || *label > null_class)
        throw LabelError("model: label " + std::to_string(*label) + " outside [0, "
                         + std::to_string(null_class) + "]");
    return *label;
}

void VelocityModel::fill_input(const Matrix& xt,
                               std::span<const double> t,
                               std::span<const int> labels,
                               Matrix& input) const
{
    const std::size_t rows = xt.rows();
    if (xt.cols() != arch_.dim)
        throw ShapeError("model: xt has " + std::to_string(xt.cols()) + " columns, model dim is "
                         + std::to_string(arch_.dim));
    require_same_size(rows, t.size(), "model: xt rows vs t");
    if (!labels.empty())
        require_same_size(rows, labels.size(), "model: xt rows vs labels");
    input = Matrix(rows, arch_.input_width());
    const std::size_t f = arch_.time_features;
    for (std::size_t i = 0; i < rows; ++i)
    {
        auto in = input.row(i);
        std::copy(xt.row(i).begin(), xt.row(i).end(), in.begin());
        for (std::size_t k = 0; k < f; ++k)
        {
            in[arch_.dim + k] = std::sin(frequencies_[k] * t[i]);
            in[arch_.dim + f + k] = std::cos(frequencies_[k] * t[i]);
        }
        if (arch_.conditional())
        {
            const int label = resolve_label(labels.empty() ? std::optional<int>{} : std::optional<int>{labels[i]});
            const double* e = params_.data() + embed_offset_ + static_cast<std::size_t>(label) * arch_.embed_dim;
            std::copy(e, e + arch_.embed_dim, in.begin() + static_cast<std::ptrdiff_t>(arch_.dim + 2 * f));
        }
        else if (!labels.empty())
        {
            throw ConfigError("model: label given to an unconditional model");
        }
    }
}

void VelocityModel::run(Activations& acts) const
{
    const std::size_t rows = acts.a[0].rows();
    acts.a.resize(layers_.size() + 1);
    for (std::size_t l = 0; l < layers_.size(); ++l)
    {
        const Layer& layer = layers_[l];
        const Matrix& x = acts.a[l];
        Matrix& z = acts.a[l + 1];
        z = Matrix(rows, layer.out);
        const double* w = params_.data() + layer.w_offset;
        const double* b = params_.data() + layer.b_offset;
        const bool hidden = l + 1 < layers_.size();
        for (std::size_t i = 0; i < rows; ++i)
        {
            const double* xi = x.row(i).data();
            double* zi = z.row(i).data();
            for (std::size_t o = 0; o < layer.out; ++o)
            {
                const double* wo = w + o * layer.in;
                double s = b[o];
                for (std::size_t k = 0; k < layer.in; ++k)
                    s += wo[k] * xi[k];
                zi[o] = hidden ? std::tanh(s) : s;
            }
        }
    }
}

ForwardResult VelocityModel::forward(std::span<const double> xt, double t, std::optional<int> label) const
{
    const int resolved = resolve_label(label);
    Matrix x(1, xt.size(), Vector(xt.begin(), xt.end()));
    const double times[1] = {t};
    Activations acts;
    acts.a.resize(1);
    if (resolved >= 0)
    {
        const int labels[1] = {resolved};
        fill_input(x, times, labels, acts.a[0]);
    }
    else
    {
        fill_input(x, times, {}, acts.a[0]);
    }
    run(acts);
    const auto out = acts.a.back().row(0);
    const auto rep = acts.a[arch_.representation_layer + 1].row(0);
    return {Vector(out.begin(), out.end()), Vector(rep.begin(), rep.end())};
}

Matrix VelocityModel::predict(const Matrix& xt, std::span<const double> t, std::span<const int> labels) const
{
    Activations acts;
    acts.a.resize(1);
    fill_input(xt, t, labels, acts.a[0]);
    run(acts);
    return std::move(acts.a.back());
}

LossResult VelocityModel::loss_and_grad(const TrainBatch& batch) const
{
    const std::size_t rows = batch.size();
    if (rows == 0)
        throw ShapeError("loss_and_grad: empty batch");
    if (batch.targets.rows() != rows || batch.targets.cols() != arch_.dim)
        throw ShapeError("loss_and_grad: targets must be batch x dim");
    for (std::size_t i = 0; i < rows; ++i)
        for (double v : batch.targets.row(i))
            if (!std::isfinite(v))
                throw NumericError("loss_and_grad: non-finite target at batch index " + std::to_string(i));
    if (!batch.main_weights.empty())
        require_same_size(rows, batch.main_weights.size(), "loss_and_grad: main weights");
    const bool has_aux = !batch.aux_weights.empty();
    if (has_aux)
    {
        require_same_size(rows, batch.aux_weights.size(), "loss_and_grad: aux weights");
        if (batch.aux_targets.rows() != rows || batch.aux_targets.cols() != representation_width())
            throw ShapeError("loss_and_grad: aux targets must be batch x representation width");
    }

    Activations acts;
    acts.a.resize(1);
    fill_input(batch.xt, batch.t, batch.labels, acts.a[0]);
    run(acts);

    LossResult result;
    result.grad.assign(params_.size(), 0.0);
    const Matrix& out = acts.a.back();
    const double inv_rows = 1.0 / static_cast<double>(rows);
    Matrix delta(rows, arch_.dim);
    for (std::size_t i = 0; i < rows; ++i)
    {
        const double mw = batch.main_weights.empty() ? 1.0 : batch.main_weights[i];
        double sq = 0.0;
        for (std::size_t j = 0; j < arch_.dim; ++j)
        {
            const double diff = out(i, j) - batch.targets(i, j);
            sq += diff * diff;
            delta(i, j) = 2.0 * mw * inv_rows * diff;
        }
        result.main_loss += mw * sq;
    }
    result.main_loss *= inv_rows;

    Matrix aux_grad;
    if (has_aux)
    {
        const Vector coeffs = auxiliary_coefficients(batch.aux_weights, batch.lambda_ra);
        double wsum = 0.0;
        for (double w : batch.aux_weights)
            wsum += w;
        const Matrix& rep = acts.a[arch_.representation_layer + 1];
        aux_grad = Matrix(rows, rep.cols());
        Vector g(rep.cols());
        double weighted = 0.0;
        for (std::size_t i = 0; i < rows; ++i)
        {
            const double l = alignment_loss(rep.row(i), batch.aux_targets.row(i), g);
            weighted += batch.aux_weights[i] * l;
            for (std::size_t k = 0; k < g.size(); ++k)
                aux_grad(i, k) = coeffs[i] * g[k];
        }
        result.aux_loss = wsum > 0.0 ? weighted / wsum : 0.0;
    }
    result.loss = result.main_loss + batch.lambda_ra * result.aux_loss;

    // Backward pass; `delta` holds dL/dz for the current layer's pre-activation.
    for (std::size_t l = layers_.size(); l-- > 0;)
    {
        const Layer& layer = layers_[l];
        const Matrix& x = acts.a[l];
        double* gw = result.grad.data() + layer.w_offset;
        double* gb = result.grad.data() + layer.b_offset;
        for (std::size_t i = 0; i < rows; ++i)
        {
            const double* xi = x.row(i).data();
            const double* di = delta.row(i).data();
            for (std::size_t o = 0; o < layer.out; ++o)
            {
                const double d = di[o];
                if (d == 0.0)
                    continue;
                gb[o] += d;
                double* gwo = gw + o * layer.in;
                for (std::size_t k = 0; k < layer.in; ++k)
                    gwo[k] += d * xi[k];
            }
        }
        const bool need_input_grad = l > 0 || arch_.conditional();
        if (!need_input_grad)
            break;
        const double* w = params_.data() + layer.w_offset;
        Matrix upstream(rows, layer.in);
        for (std::size_t i = 0; i < rows; ++i)
        {
            double* ui = upstream.row(i).data();
            const double* di = delta.row(i).data();
            for (std::size_t o = 0; o < layer.out; ++o)
            {
                const double d = di[o];
                if (d == 0.0)
                    continue;
                const double* wo = w + o * layer.in;
                for (std::size_t k = 0; k < layer.in; ++k)
                    ui[k] += d * wo[k];
            }
        }
        if (l == 0)
        {
            const std::size_t start = arch_.dim + 2 * arch_.time_features;
            for (std::size_t i = 0; i < rows; ++i)
            {
                const int label = resolve_label(batch.labels.empty() ? std::optional<int>{}
                                                                     : std::optional<int>{batch.labels[i]});
                double* ge = result.grad.data() + embed_offset_ + static_cast<std::size_t>(label) * arch_.embed_dim;
                for (std::size_t k = 0; k < arch_.embed_dim; ++k)
                    ge[k] += upstream(i, start + k);
            }
            break;
        }
        // Layer l - 1 is hidden: add the alignment gradient at the
        // representation output, then apply tanh' = 1 - a^2.
        const Matrix& a = acts.a[l];
        if (has_aux && l - 1 == arch_.representation_layer)
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t k = 0; k < layer.in; ++k)
                    upstream(i, k) += aux_grad(i, k);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t k = 0; k < layer.in; ++k)
                upstream(i, k) *= 1.0 - a(i, k) * a(i, k);
        delta = std::move(upstream);
    }
    return result;
}

AdamW::AdamW(std::size_t size, double learning_rate) : lr(learning_rate), m_(size, 0.0), v_(size, 0.0) {}

void AdamW::step(std::span<double> params, std::span<const double> grad)
{
    require_same_size(params.size(), grad.size(), "AdamW: params vs grad");
    if (m_.size() != params.size())
    {
        if (t_ != 0)
            throw ShapeError("AdamW: state size does not match parameters");
        m_.assign(params.size(), 0.0);
        v_.assign(params.size(), 0.0);
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i)
    {
        const double g = grad[i];
        m_[i] = beta1 * m_[i] + (1.0 - beta1) * g;
        v_[i] = beta2 * v_[i] + (1.0 - beta2) * g * g;
        const double m_hat = m_[i] / c1;
        const double v_hat = v_[i] / c2;
        params[i] -= lr * weight_decay * params[i];
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

void AdamW::restore(Vector m, Vector v, std::uint64_t steps)
{
    require_same_size(m.size(), v.size(), "AdamW: restore");
    m_ = std::move(m);
    v_ = std::move(v);
    t_ = steps;
}

}  // namespace svl
