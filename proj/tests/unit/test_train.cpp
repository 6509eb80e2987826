#include <gtest/gtest.h>

#include <cmath>

#include "stablevel/errors.hpp"
#include "stablevel/gmm.hpp"
#include "stablevel/profiler.hpp"
#include "stablevel/train.hpp"

using namespace svl;

namespace {

const Schedule linear{ScheduleKind::linear};

TrainConfig small_config(LossKind loss, std::size_t n = 1)
{
    TrainConfig c;
    c.loss = loss;
    c.n = n;
    c.batch = 32;
    c.iterations = 20;
    c.seed = 42;
    c.lr = 1e-3;
    c.arch.hidden = {16, 16};
    c.arch.time_features = 4;
    c.arch.embed_dim = 4;
    c.arch.representation_layer = 1;
    return c;
}

GmmSpec labeled_spec(std::size_t classes)
{
    Rng rng(77);
    GmmSpec spec = random_spec(2, 8, rng);
    std::vector<int> labels(spec.modes());
    for (std::size_t k = 0; k < labels.size(); ++k)
        labels[k] = static_cast<int>(k % classes);
    spec.labels = labels;
    return spec;
}

}  // namespace

TEST(Train, LossNames)
{
    for (auto k : {LossKind::cfm, LossKind::stablevm, LossKind::stf})
        EXPECT_EQ(loss_kind_from_string(to_string(k)), k);
    EXPECT_THROW(loss_kind_from_string("mse"), ConfigError);
}

TEST(Train, ConfigValidation)
{
    const GmmSpec spec = standard_normal_spec(1);
    TrainConfig c = small_config(LossKind::stablevm, 0);
    EXPECT_THROW(Trainer(c, linear, TrainData{&spec}), ConfigError);
    c = small_config(LossKind::cfm);
    c.t_lo = 0.0;
    EXPECT_THROW(Trainer(c, linear, TrainData{&spec}), ConfigError);
    c = small_config(LossKind::cfm);
    c.bank = BankSettings{};
    EXPECT_THROW(Trainer(c, linear, TrainData{&spec}), ConfigError);
    c = small_config(LossKind::stablevm, 4);
    c.bank = BankSettings{};
    EXPECT_THROW(Trainer(c, linear, TrainData{&spec}), ConfigError);  // unlabeled data
}

TEST(Train, CfmOnDeltaData)
{
    const GmmSpec spec = delta_spec(Vector{0.7});
    TrainConfig c = small_config(LossKind::cfm);
    c.iterations = 2000;
    c.batch = 128;
    c.lr = 3e-3;
    c.arch.hidden = {64, 64};
    c.arch.time_features = 8;
    c.probe_times = {0.2, 0.5, 0.8};
    c.probe_interval = 500;
    c.probe_samples = 512;
    Trainer trainer(c, linear, TrainData{&spec}, &spec);
    const auto before = trainer.probe();
    trainer.run();
    const auto& rows = trainer.log().rows;
    ASSERT_EQ(rows.size(), 2000u);
    EXPECT_EQ(rows.back().iteration, 2000u);
    for (std::size_t k = 0; k < 3; ++k)
    {
        EXPECT_LT(rows.back().lmse[k], 1e-3) << c.probe_times[k];
        EXPECT_LT(rows.back().lmse[k], before[k]);
    }
    EXPECT_TRUE(rows[10].lmse.empty());
    EXPECT_EQ(rows[499].lmse.size(), 3u);
}

TEST(Train, SingleReferenceTargetsAreConditionalVelocities)
{
    Rng rng(1);
    const GmmSpec spec = random_spec(3, 4, rng);
    for (LossKind loss : {LossKind::stablevm, LossKind::stf})
    {
        Trainer trainer(small_config(loss, 1), linear, TrainData{&spec});
        const TrainBatch b = trainer.preview_batch();
        // All rows share one reference; recover it from row 0 and check every row.
        const Vector x0 = extract_x0(linear, b.targets.row(0), b.xt.row(0), b.t[0]);
        for (std::size_t i = 0; i < b.size(); ++i)
        {
            const Vector cfm = cond_velocity(linear, b.xt.row(i), x0, b.t[i]);
            for (std::size_t j = 0; j < 3; ++j)
                EXPECT_NEAR(b.targets(i, j), cfm[j], 1e-9 * std::max(1.0, std::abs(cfm[j])));
        }
    }
}

TEST(Train, SeedDeterminismAndResume)
{
    Rng rng(2);
    const GmmSpec spec = random_spec(2, 3, rng);
    TrainConfig c = small_config(LossKind::stablevm, 16);
    c.probe_times = {0.3};
    c.probe_interval = 5;
    c.probe_samples = 64;
    c.weighting = WeightingFn{};
    Trainer a(c, linear, TrainData{&spec}, &spec), b(c, linear, TrainData{&spec}, &spec);
    a.run();
    b.run();
    ASSERT_EQ(a.log().rows.size(), b.log().rows.size());
    for (std::size_t i = 0; i < a.log().rows.size(); ++i)
    {
        EXPECT_EQ(a.log().rows[i].loss, b.log().rows[i].loss);
        EXPECT_EQ(a.log().rows[i].lmse, b.log().rows[i].lmse);
    }
    EXPECT_TRUE(std::equal(a.model().params().begin(), a.model().params().end(), b.model().params().begin()));

    Trainer first(c, linear, TrainData{&spec}, &spec);
    first.run(8);
    Trainer resumed(c, linear, TrainData{&spec}, &spec);
    resumed.restore(Vector(first.model().params().begin(), first.model().params().end()), first.optimizer(), 8);
    resumed.run();
    EXPECT_EQ(resumed.iteration(), 20u);
    EXPECT_TRUE(std::equal(a.model().params().begin(), a.model().params().end(), resumed.model().params().begin()));

    c.seed = 43;
    Trainer other(c, linear, TrainData{&spec}, &spec);
    other.run(1);
    EXPECT_NE(other.log().rows[0].loss, a.log().rows[0].loss);
}

TEST(Train, AuxiliaryTermIsGatedByTime)
{
    Rng rng(3);
    const GmmSpec spec = random_spec(2, 3, rng);
    TrainConfig c = small_config(LossKind::cfm);
    c.weighting = WeightingFn{WeightingKind::hard, 0.5, 20.0};
    Trainer trainer(c, linear, TrainData{&spec});
    const TrainBatch b = trainer.preview_batch();
    ASSERT_EQ(b.aux_weights.size(), b.size());
    EXPECT_EQ(b.aux_targets.cols(), 16u);
    for (std::size_t i = 0; i < b.size(); ++i)
        EXPECT_EQ(b.aux_weights[i], b.t[i] < 0.5 ? 1.0 : 0.0);
    EXPECT_EQ(b.lambda_ra, 0.5);
}

TEST(Train, ConditionalBankLoop)
{
    const GmmSpec spec = labeled_spec(4);
    TrainConfig c = small_config(LossKind::stablevm, 1);
    c.bank = BankSettings{32, 0.1};
    c.batch = 256;
    std::vector<std::string> events;
    Trainer trainer(c, linear, TrainData{&spec});
    trainer.on_event = [&](const std::string& e) { events.push_back(e); };
    const TrainBatch b = trainer.preview_batch();
    EXPECT_FALSE(events.empty());
    ASSERT_EQ(b.labels.size(), b.size());
    std::size_t null_rows = 0;
    for (int l : b.labels)
    {
        EXPECT_GE(l, 0);
        EXPECT_LE(l, 4);
        null_rows += l == 4;
    }
    EXPECT_GT(null_rows, 0u);
    EXPECT_LT(null_rows, b.size() / 3);
    trainer.run();
    for (const auto& row : trainer.log().rows)
        EXPECT_TRUE(std::isfinite(row.loss));
}

TEST(Train, DatasetWithShortClassFailsPrefill)
{
    Matrix pts(6, 1, Vector{1, 2, 3, 4, 5, 6});
    const std::vector<int> labels{0, 0, 0, 1, 0, 0};
    TrainConfig c = small_config(LossKind::stablevm, 1);
    c.bank = BankSettings{2, 0.1};
    TrainData data;
    data.points = &pts;
    data.labels = &labels;
    data.num_classes = 2;
    Trainer trainer(c, linear, data);
    EXPECT_THROW(trainer.step(), InsufficientDataError);
}

TEST(Train, NonFiniteDataIsReported)
{
    Matrix pts(4, 1, Vector{1, 2, std::nan(""), 4});
    TrainConfig c = small_config(LossKind::cfm);
    c.batch = 64;
    TrainData data;
    data.points = &pts;
    Trainer trainer(c, linear, data);
    EXPECT_THROW(trainer.run(), DataError);
}
