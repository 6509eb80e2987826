#include <gtest/gtest.h>

#include <cmath>

#include "stablevel/errors.hpp"
#include "stablevel/model.hpp"

using namespace svl;

namespace {

ModelArch small_arch(bool conditional)
{
    ModelArch a;
    a.dim = 3;
    a.time_features = 4;
    a.hidden = {14, 14};
    a.num_classes = conditional ? 2 : 0;
    a.embed_dim = 3;
    a.representation_layer = 0;
    return a;
}

VelocityModel random_model(const ModelArch& arch, Rng& rng, double scale = 0.5)
{
    Vector p(arch.parameter_count());
    for (double& x : p)
        x = rng.uniform(-scale, scale);
    return VelocityModel(arch, p);
}

TrainBatch random_batch(const VelocityModel& model, Rng& rng, std::size_t m, bool aux)
{
    const auto& arch = model.arch();
    TrainBatch b;
    b.xt = Matrix(m, arch.dim);
    b.targets = Matrix(m, arch.dim);
    rng.fill_normal(b.xt.flat());
    rng.fill_normal(b.targets.flat());
    for (std::size_t i = 0; i < m; ++i)
    {
        b.t.push_back(rng.uniform(0.01, 0.99));
        b.main_weights.push_back(rng.uniform(0.5, 1.5));
        if (arch.conditional())
            b.labels.push_back(static_cast<int>(rng.uniform_index(arch.num_classes + 1)));
    }
    if (aux)
    {
        b.aux_targets = Matrix(m, model.representation_width());
        rng.fill_normal(b.aux_targets.flat());
        for (std::size_t i = 0; i < m; ++i)
            b.aux_weights.push_back(rng.uniform());
        b.lambda_ra = 0.7;
    }
    return b;
}

double max_rel_grad_error(const VelocityModel& model, const TrainBatch& batch)
{
    const LossResult r = model.loss_and_grad(batch);
    Vector p(model.params().begin(), model.params().end());
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k)
    {
        Vector plus = p, minus = p;
        plus[k] += h;
        minus[k] -= h;
        const double fp = VelocityModel(model.arch(), plus).loss_and_grad(batch).loss;
        const double fm = VelocityModel(model.arch(), minus).loss_and_grad(batch).loss;
        const double fd = (fp - fm) / (2 * h);
        const double err = std::abs(fd - r.grad[k]) / std::max({std::abs(fd), std::abs(r.grad[k]), 1e-4});
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace

TEST(Model, ParameterCountAndValidation)
{
    const ModelArch a = small_arch(true);
    EXPECT_EQ(a.input_width(), 3u + 8u + 3u);
    EXPECT_EQ(a.parameter_count(), (14u * 14 + 14) + (14u * 14 + 14) + (14u * 3 + 3) + 3u * 3);
    ModelArch bad = a;
    bad.representation_layer = 2;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = a;
    bad.dim = 0;
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Model, ZeroOutputLayerAtInit)
{
    Rng rng(1);
    ModelArch a;
    a.dim = 4;
    const VelocityModel m(a, rng);
    Rng probe(2);
    for (int i = 0; i < 20; ++i)
    {
        Vector x(4);
        probe.fill_normal(x);
        for (double v : m.forward(x, probe.uniform()).v)
            EXPECT_EQ(v, 0.0);
    }
}

TEST(Model, ForwardDeterministicAndBatchConsistent)
{
    Rng rng(3);
    const VelocityModel m = random_model(small_arch(true), rng);
    const Vector x{0.1, -0.2, 0.3};
    const auto a = m.forward(x, 0.4, 1);
    const auto b = m.forward(x, 0.4, 1);
    EXPECT_EQ(a.v, b.v);
    EXPECT_EQ(a.representation, b.representation);
    EXPECT_EQ(a.representation.size(), 14u);
    Matrix xs(1, 3, x);
    const std::vector<double> ts{0.4};
    const std::vector<int> ls{1};
    const Matrix p = m.predict(xs, ts, ls);
    for (int j = 0; j < 3; ++j)
        EXPECT_EQ(p(0, j), a.v[j]);
    // The null class is the default label.
    EXPECT_EQ(m.forward(x, 0.4).v, m.forward(x, 0.4, 2).v);
}

TEST(Model, LabelErrors)
{
    Rng rng(4);
    const VelocityModel uncond = random_model(small_arch(false), rng);
    EXPECT_THROW(uncond.forward(Vector{0, 0, 0}, 0.5, 0), ConfigError);
    const VelocityModel cond = random_model(small_arch(true), rng);
    EXPECT_THROW(cond.forward(Vector{0, 0, 0}, 0.5, 3), LabelError);
    EXPECT_THROW(cond.forward(Vector{0, 0}, 0.5, 0), ShapeError);
}

TEST(Model, SimpleLossValues)
{
    ModelArch a;
    a.dim = 1;
    a.hidden = {4};
    a.representation_layer = 0;
    Rng rng(5);
    const VelocityModel m(a, rng);  // output is zero
    TrainBatch b;
    b.xt = Matrix(1, 1, 0.3);
    b.t = {0.5};
    b.targets = Matrix(1, 1, 2.0);
    EXPECT_DOUBLE_EQ(m.loss_and_grad(b).loss, 4.0);
    b.targets = Matrix(1, 1, 0.0);
    const auto r = m.loss_and_grad(b);
    EXPECT_EQ(r.loss, 0.0);
    for (double g : r.grad)
        EXPECT_EQ(g, 0.0);
}

TEST(Model, NonFiniteTargetNamesRow)
{
    Rng rng(6);
    const VelocityModel m = random_model(small_arch(false), rng);
    TrainBatch b = random_batch(m, rng, 4, false);
    b.targets(2, 1) = std::nan("");
    try
    {
        m.loss_and_grad(b);
        FAIL();
    }
    catch (const DataError& e)
    {
        EXPECT_NE(std::string(e.what()).find("2"), std::string::npos) << e.what();
    }
}

TEST(Model, JacobianColumnsMatchFiniteDifferences)
{
    // With target v - e_k / 2, the gradient of |v - target|^2 is row k of the
    // Jacobian of v with respect to the parameters.
    Rng rng(7);
    const VelocityModel m = random_model(small_arch(true), rng);
    const Vector x{0.5, -0.1, 0.9};
    const double t = 0.37;
    const Vector p(m.params().begin(), m.params().end());
    const double h = 1e-5;
    for (std::size_t k = 0; k < 3; ++k)
    {
        const auto f = m.forward(x, t, 0);
        TrainBatch b;
        b.xt = Matrix(1, 3, x);
        b.t = {t};
        b.labels = {0};
        b.targets = Matrix(1, 3, f.v);
        b.targets(0, k) -= 0.5;
        const Vector jac = m.loss_and_grad(b).grad;
        for (std::size_t q = 0; q < p.size(); q += 7)
        {
            Vector plus = p, minus = p;
            plus[q] += h;
            minus[q] -= h;
            const double fd = (VelocityModel(m.arch(), plus).forward(x, t, 0).v[k]
                               - VelocityModel(m.arch(), minus).forward(x, t, 0).v[k])
                              / (2 * h);
            EXPECT_LE(std::abs(fd - jac[q]), 1e-4 * std::max(std::abs(fd), 1e-3)) << k << "," << q;
        }
    }
}

TEST(Model, GradientMatchesFiniteDifferences)
{
    Rng rng(8);
    for (int cfg = 0; cfg < 10; ++cfg)
    {
        const bool conditional = cfg % 2 == 1;
        const bool aux = cfg % 3 != 0;
        const VelocityModel m = random_model(small_arch(conditional), rng);
        const TrainBatch b = random_batch(m, rng, 5, aux);
        EXPECT_LT(max_rel_grad_error(m, b), 1e-4) << "config " << cfg;
    }
}

TEST(Model, AdamWScalarTrace)
{
    AdamW opt(1, 1e-3);
    Vector p{1.0};
    opt.step(p, Vector{0.5});
    // m = 0.05, v = 0.00025, both bias corrections undo the (1 - beta) factors.
    const double m_hat = 0.05 / 0.1, v_hat = 0.00025 / 0.001;
    EXPECT_NEAR(p[0], 1.0 - 1e-3 * m_hat / (std::sqrt(v_hat) + 1e-8), 1e-15);
    const double p1 = p[0];
    opt.step(p, Vector{-0.25});
    const double m2 = 0.9 * 0.05 + 0.1 * -0.25, v2 = 0.999 * 0.00025 + 0.001 * 0.0625;
    const double m2h = m2 / (1 - 0.81), v2h = v2 / (1 - 0.999 * 0.999);
    EXPECT_NEAR(p[0], p1 - 1e-3 * m2h / (std::sqrt(v2h) + 1e-8), 1e-15);
    EXPECT_EQ(opt.steps(), 2u);
}

TEST(Model, AdamWZeroGradAndDecay)
{
    AdamW opt(3, 1e-2);
    Vector p{1.0, -2.0, 0.5};
    const Vector start = p;
    for (int i = 0; i < 5; ++i)
        opt.step(p, Vector(3, 0.0));
    EXPECT_EQ(p, start);
    AdamW decay(1, 0.1);
    decay.weight_decay = 0.5;
    Vector q{2.0};
    decay.step(q, Vector{0.0});
    EXPECT_NEAR(q[0], 2.0 - 0.1 * 0.5 * 2.0, 1e-15);
}

TEST(Model, AdamWDeterministicAndRestorable)
{
    Rng rng(9);
    Vector g(10);
    rng.fill_normal(g);
    AdamW a(10), b(10);
    Vector pa(10, 0.3), pb(10, 0.3);
    a.step(pa, g);
    b.step(pb, g);
    EXPECT_EQ(pa, pb);
    AdamW c(10);
    c.restore(a.first_moment(), a.second_moment(), a.steps());
    a.step(pa, g);
    c.step(pb, g);
    EXPECT_EQ(pa, pb);
}
