#include <gtest/gtest.h>

#include <cmath>

#include "stablevel/errors.hpp"
#include "stablevel/gmm.hpp"
#include "stablevel/profiler.hpp"

using namespace svl;

namespace {

const Schedule linear{ScheduleKind::linear};
const Schedule cosine{ScheduleKind::vp_cosine};

VarianceCurve manual_curve(std::vector<double> t, std::vector<double> v)
{
    VarianceCurve c;
    c.t = std::move(t);
    c.values = std::move(v);
    c.stderr_.assign(c.t.size(), 0.0);
    c.q15 = c.values;
    c.q85 = c.values;
    return c;
}

bool overlap3(const VarianceEstimate& a, const VarianceEstimate& b)
{
    return std::abs(a.value - b.value) <= 3 * (a.stderr_ + b.stderr_);
}

}  // namespace

TEST(Profiler, DeltaDataHasNoVariance)
{
    const GmmSpec spec = delta_spec(Vector{0.4, -1.0});
    Matrix data(50, 2);
    for (std::size_t i = 0; i < 50; ++i)
    {
        data(i, 0) = 0.4;
        data(i, 1) = -1.0;
    }
    const McBudget mc{256, 1, 0};
    for (double t : {0.05, 0.3, 0.6, 0.95})
        for (const Schedule& s : {linear, cosine})
        {
            EXPECT_LT(variance_cfm(spec, s, t, mc, Rng(1)).value, 1e-12);
            EXPECT_LT(variance_cfm(data, s, t, mc, Rng(1)).value, 1e-12);
            EXPECT_LT(variance_stablevm(spec, s, t, 4, mc, Rng(1)).value, 1e-12);
        }
    const auto grid = parse_grid("0.1:0.9:5");
    const auto curve = variance_curve(&spec, nullptr, linear, grid, mc, Normalization::sqrt_d, Estimator::oracle, Rng(2));
    for (double v : curve.values)
        EXPECT_LT(v, 1e-12);
    EXPECT_THROW(split_point(manual_curve({0.1, 0.5, 0.9}, {0.0, 0.0, 0.0}), 0.2), UndefinedSplitError);
}

TEST(Profiler, StandardNormalClosedForm)
{
    const GmmSpec spec = standard_normal_spec(1);
    const auto est = variance_cfm(spec, linear, 0.5, McBudget{20000, 1, 0}, Rng(3));
    EXPECT_NEAR(est.value, 2.0, 3 * est.stderr_);
    EXPECT_EQ(est.probe_values.size(), 20000u);
    // Other times and a 3-D spec.
    const GmmSpec spec3 = standard_normal_spec(3);
    for (double t : {0.2, 0.8})
    {
        const auto e = eval(cosine, t);
        const auto got = variance_cfm(spec3, cosine, t, McBudget{20000, 1, 0}, Rng(4));
        // Var(v | xt) = (alpha' - alpha sigma'/sigma)^2 Var(x0 | xt), Var(x0 | xt) = sigma^2 / (alpha^2 + sigma^2).
        const double c = drift_coefficient(e);
        const double closed = 3.0 * c * c * e.sigma * e.sigma / (e.alpha * e.alpha + e.sigma * e.sigma);
        EXPECT_NEAR(got.value, closed, 3 * got.stderr_) << t;
    }
}

TEST(Profiler, StableVmWithOneReferenceIsCfm)
{
    const GmmSpec spec = symmetric_two_mode_spec(1, 1.0, 0.01);
    const McBudget mc{8000, 1, 0};
    for (double t : {0.3, 0.6, 0.9})
    {
        const auto cfm = variance_cfm(spec, linear, t, mc, Rng(5));
        const auto svm = variance_stablevm(spec, linear, t, 1, mc, Rng(6));
        EXPECT_TRUE(overlap3(cfm, svm)) << t << ": " << cfm.value << " vs " << svm.value;
    }
}

TEST(Profiler, StableVmVarianceFallsWithReferenceCount)
{
    const GmmSpec spec = symmetric_two_mode_spec(1, 1.0, 0.01);
    const McBudget mc{4000, 1, 0};
    double prev = 1e300, prev_se = 0.0;
    for (std::size_t n : {8, 64, 512})
    {
        const auto e = variance_stablevm(spec, linear, 0.6, n, mc, Rng(7).derive(n));
        EXPECT_LE(e.value, prev + 3 * (e.stderr_ + prev_se)) << n;
        prev = e.value;
        prev_se = e.stderr_;
    }
}

TEST(Profiler, EstimatorsAgreeAtHighNoise)
{
    Rng rng(8);
    const GmmSpec spec = random_spec(10, 100, rng);
    Rng draws = rng.derive("data");
    const Matrix data = sample(spec, draws, 50000).points;
    const McBudget mc{1024, 1, 0};
    for (double t : {0.5, 0.7, 0.9})
    {
        const auto oracle = variance_cfm(spec, linear, t, mc, Rng(9));
        const auto empirical = variance_cfm(data, linear, t, mc, Rng(10));
        EXPECT_TRUE(overlap3(oracle, empirical)) << t << ": " << oracle.value << " vs " << empirical.value;
    }
}

TEST(Profiler, CurveNormalizationAndLayout)
{
    const GmmSpec spec = standard_normal_spec(4);
    const auto grid = parse_grid("0.2:0.8:4");
    const McBudget mc{512, 1, 0};
    const auto raw = variance_curve(&spec, nullptr, linear, grid, mc, Normalization::raw, Estimator::oracle, Rng(11));
    const auto norm = variance_curve(&spec, nullptr, linear, grid, mc, Normalization::sqrt_d, Estimator::oracle, Rng(11));
    raw.validate();
    ASSERT_EQ(raw.t, grid);
    for (std::size_t i = 0; i < grid.size(); ++i)
    {
        EXPECT_NEAR(norm.values[i], raw.values[i] / 2.0, 1e-12);
        EXPECT_LE(raw.q15[i], raw.q85[i]);
    }
    EXPECT_EQ(raw.dim, 4u);
    EXPECT_THROW(variance_curve(nullptr, nullptr, linear, grid, mc, Normalization::raw, Estimator::empirical_snis, Rng(1)),
                 ConfigError);
}

TEST(Profiler, ParseGrid)
{
    const auto g = parse_grid("0.02:0.98:49");
    ASSERT_EQ(g.size(), 49u);
    EXPECT_DOUBLE_EQ(g.front(), 0.02);
    EXPECT_DOUBLE_EQ(g.back(), 0.98);
    EXPECT_NEAR(g[1], 0.04, 1e-15);
    EXPECT_THROW(parse_grid("0.1:0.9"), ConfigError);
    EXPECT_THROW(parse_grid("a:0.9:3"), ConfigError);
    EXPECT_THROW(parse_grid("0.9:0.1:3"), ConfigError);
}

TEST(Profiler, SplitPointExamples)
{
    std::vector<double> t, step, lin;
    for (int i = 0; i <= 20; ++i)
    {
        t.push_back(i * 0.05);
        step.push_back(i * 0.05 >= 0.7 - 1e-12 ? 1.0 : 0.0);
        lin.push_back(i * 0.05);
    }
    EXPECT_NEAR(split_point(manual_curve(t, step), 0.5), 0.7, 1e-12);
    EXPECT_NEAR(split_point(manual_curve(t, lin), 0.5), 0.5, 1e-12);
    EXPECT_THROW(split_point(manual_curve(t, lin), 1.5), RangeError);
}

TEST(Profiler, CurveValidation)
{
    EXPECT_THROW(manual_curve({0.5, 0.4}, {1, 1}).validate(), InvariantError);
    EXPECT_THROW(manual_curve({0.4, 0.5}, {1, -1}).validate(), InvariantError);
}

TEST(Profiler, SecondMomentOfZeroModel)
{
    // Zero velocity against N(0,1) data at t = 0.25: 0.5 * 0.64 * 0.625 = 0.2.
    const GmmSpec spec = standard_normal_spec(1);
    const VelocityFn zero = [](std::span<const double>, double, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
    };
    const double got = second_moment_mse(zero, spec, linear, 0.25, McBudget{200000, 1, 0}, Rng(12));
    EXPECT_NEAR(got, 0.2, 0.2 * 0.02);
    ModelArch arch;
    arch.dim = 1;
    arch.hidden = {8};
    arch.representation_layer = 0;
    Rng init(13);
    const VelocityModel model(arch, init);
    EXPECT_DOUBLE_EQ(second_moment_mse(model, spec, linear, 0.25, McBudget{200000, 1, 0}, Rng(12)), got);
}

TEST(Profiler, SecondMomentOfOracleIsZero)
{
    Rng rng(14);
    const GmmSpec spec = random_spec(3, 5, rng);
    const auto oracle = oracle_velocity(spec, cosine);
    EXPECT_LT(second_moment_mse(oracle, spec, cosine, 0.4, McBudget{512, 1, 0}, Rng(15)), 1e-12);
}
