#include "stablevel/train.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stablevel/errors.hpp"
#include "stablevel/parallel.hpp"
#include "stablevel/profiler.hpp"
#include "stablevel/targets.hpp"

namespace svl {

std::string to_string(LossKind k)
{
    switch (k)
    {
        case LossKind::cfm:
            return "cfm";
        case LossKind::stablevm:
            return "stablevm";
        case LossKind::stf:
            return "stf";
    }
    return "?";
}

LossKind loss_kind_from_string(std::string_view name)
{
    if (name == "cfm")
        return LossKind::cfm;
    if (name == "stablevm")
        return LossKind::stablevm;
    if (name == "stf")
        return LossKind::stf;
    throw ConfigError("unknown loss kind '" + std::string(name) + "'");
}

void TrainConfig::validate(const Schedule& schedule) const
{
    schedule.validate();
    if (n < 1)
        throw ConfigError("train: reference size n must be at least 1");
    if (batch < 1)
        throw ConfigError("train: batch size must be at least 1");
    const double lo = time_lo(schedule), hi = time_hi(schedule);
    if (!(lo >= schedule.t_min && hi <= schedule.t_max && lo <= hi))
        throw ConfigError("train: time range must lie within the schedule clamps");
    if (!(lr > 0.0) || !(weight_decay >= 0.0))
        throw ConfigError("train: learning rate must be positive, weight decay nonnegative");
    for (double t : probe_times)
        schedule.require_in_range(t);
    if (!probe_times.empty() && (probe_interval == 0 || probe_samples < 2))
        throw ConfigError("train: probes need a positive interval and at least 2 samples");
    if (weighting)
        weighting->validate();
    if (!(lambda_ra >= 0.0))
        throw ConfigError("train: lambda_ra must be nonnegative");
    if (bank)
    {
        if (loss != LossKind::stablevm)
            throw ConfigError("train: the memory bank loop requires loss = stablevm");
        if (bank->capacity < 1 || !(bank->p_cfg >= 0.0 && bank->p_cfg <= 1.0))
            throw ConfigError("train: bank needs capacity >= 1 and p_cfg in [0, 1]");
    }
}

std::size_t TrainData::dim() const
{
    if (spec)
        return spec->dim;
    if (points)
        return points->cols();
    throw ConfigError("train: no data source");
}

std::size_t TrainData::classes() const
{
    if (spec)
        return spec->num_classes();
    return labels ? num_classes : 0;
}

Trainer::Trainer(TrainConfig config, Schedule schedule, TrainData data, const GmmSpec* oracle)
    : config_(std::move(config)), schedule_(schedule), data_(data), oracle_(oracle), root_(config_.seed)
{
    config_.validate(schedule_);
    if (data_.spec)
    {
        data_.spec->validate();
        sampler_ = std::make_unique<GmmSampler>(*data_.spec);
    }
    else if (!data_.points || data_.points->empty())
    {
        throw ConfigError("train: no data source");
    }
    if (data_.points && data_.labels)
    {
        require_same_size(data_.points->rows(), data_.labels->size(), "train: dataset labels");
        for (int l : *data_.labels)
            if (l < 0 || static_cast<std::size_t>(l) >= data_.num_classes)
                throw LabelError("train: dataset label " + std::to_string(l) + " out of range");
    }
    if (oracle_ && oracle_->dim != data_.dim())
        throw ConfigError("train: oracle dim does not match the data");

    config_.arch.dim = data_.dim();
    if (config_.bank)
    {
        if (data_.classes() == 0)
            throw ConfigError("train: the memory bank loop needs labeled data");
        config_.arch.num_classes = data_.classes();
    }
    else
    {
        config_.arch.num_classes = 0;
    }
    Rng init = root_.derive("init");
    model_ = VelocityModel(config_.arch, init);
    opt_ = AdamW(model_.params().size(), config_.lr);
    opt_.weight_decay = config_.weight_decay;
    if (config_.weighting)
    {
        Rng teacher_rng = root_.derive("teacher");
        teacher_.emplace(data_.dim(), model_.representation_width(), teacher_rng);
    }
    log_.probe_times = config_.probe_times;
}

void Trainer::restore(Vector params, const AdamW& optimizer, std::size_t iteration)
{
    model_ = VelocityModel(config_.arch, std::move(params));
    opt_ = optimizer;
    opt_.lr = config_.lr;
    opt_.weight_decay = config_.weight_decay;
    iteration_ = iteration;
}

void Trainer::draw_data(Rng& rng, std::span<double> x0, int& label) const
{
    if (sampler_)
    {
        const std::size_t k = sampler_->draw(rng, x0);
        label = data_.spec->labels ? (*data_.spec->labels)[k] : -1;
        return;
    }
    const std::size_t row = rng.uniform_index(data_.points->rows());
    const auto src = data_.points->row(row);
    std::copy(src.begin(), src.end(), x0.begin());
    label = data_.labels ? (*data_.labels)[row] : -1;
}

void Trainer::prefill_bank()
{
    const std::size_t classes = data_.classes();
    bank_.emplace(data_.dim(), classes, config_.bank->capacity, config_.bank->p_cfg);
    if (data_.points)
    {
        bank_->prefill(*data_.points, *data_.labels);
    }
    else
    {
        // Online data: draw until every class has K points (bounded effort).
        Rng rng = root_.derive("prefill");
        Matrix pool(0, data_.dim());
        std::vector<int> labels;
        std::vector<std::size_t> counts(classes, 0);
        Vector x0(data_.dim());
        const std::size_t limit = 1000 * classes * config_.bank->capacity;
        auto filled = [&] {
            return std::all_of(counts.begin(), counts.end(),
                               [&](std::size_t c) { return c >= config_.bank->capacity; });
        };
        while (!filled() && labels.size() < limit)
        {
            int label = -1;
            draw_data(rng, x0, label);
            pool.push_row(x0);
            labels.push_back(label);
            ++counts[static_cast<std::size_t>(label)];
        }
        bank_->prefill(pool, labels);
    }
    if (on_event)
        for (std::size_t q = 0; q < bank_->queue_count(); ++q)
            on_event("bank prefill: queue " + std::to_string(q) + " holds "
                     + std::to_string(bank_->queue_size(q)) + " of " + std::to_string(bank_->capacity()));
}

TrainBatch Trainer::build_batch(Rng& rng) const
{
    const std::size_t m = config_.batch;
    const std::size_t d = data_.dim();
    const double lo = config_.time_lo(schedule_), hi = config_.time_hi(schedule_);
    TrainBatch batch;
    batch.xt = Matrix(m, d);
    batch.t.assign(m, 0.0);
    batch.targets = Matrix(m, d);
    Matrix x0s(m, d);

    if (bank_)
        batch.labels.assign(m, 0);

    // References shared by the whole iteration (unconditional multi-reference losses).
    ReferenceBatch shared;
    if (!bank_ && config_.loss != LossKind::cfm)
    {
        Rng ref_rng = rng.derive("refs");
        Matrix refs(config_.n, d);
        int unused = -1;
        for (std::size_t i = 0; i < config_.n; ++i)
            draw_data(ref_rng, refs.row(i), unused);
        shared = ReferenceBatch(std::move(refs));
    }

    parallel_for(
        m,
        [&](std::size_t i) {
            Rng local = rng.derive("sample").derive(i);
            const double t = local.uniform(lo, hi);
            const auto e = eval(schedule_, t);
            batch.t[i] = t;
            auto xt = batch.xt.row(i);
            auto target = batch.targets.row(i);
            auto x0 = x0s.row(i);
            if (bank_)
            {
                const int label = static_cast<int>(local.uniform_index(data_.classes()));
                const MemoryBank::Draw draw = bank_->draw(label, local);
                batch.labels[i] = static_cast<int>(draw.effective_label);
                const PathSample ps = sample_gmm_path(draw.refs, schedule_, t, local);
                std::copy(ps.xt.begin(), ps.xt.end(), xt.begin());
                std::copy(ps.x0.begin(), ps.x0.end(), x0.begin());
                Vector work(draw.refs.size());
                stablevm_target_into(draw.refs, e, xt, target, work);
                return;
            }
            switch (config_.loss)
            {
                case LossKind::cfm:
                {
                    int unused = -1;
                    draw_data(local, x0, unused);
                    for (std::size_t j = 0; j < d; ++j)
                        xt[j] = e.alpha * x0[j] + e.sigma * local.normal();
                    cond_velocity_into(e, xt, x0, target);
                    break;
                }
                case LossKind::stablevm:
                {
                    const PathSample ps = sample_gmm_path(shared, schedule_, t, local);
                    std::copy(ps.xt.begin(), ps.xt.end(), xt.begin());
                    std::copy(ps.x0.begin(), ps.x0.end(), x0.begin());
                    Vector work(shared.size());
                    stablevm_target_into(shared, e, xt, target, work);
                    break;
                }
                case LossKind::stf:
                {
                    const auto ref0 = shared.points.row(0);
                    std::copy(ref0.begin(), ref0.end(), x0.begin());
                    for (std::size_t j = 0; j < d; ++j)
                        xt[j] = e.alpha * x0[j] + e.sigma * local.normal();
                    Vector work(shared.size());
                    stablevm_target_into(shared, e, xt, target, work);
                    break;
                }
            }
        },
        config_.workers);

    if (teacher_)
    {
        batch.aux_weights.resize(m);
        batch.aux_targets = Matrix(m, model_.representation_width());
        for (std::size_t i = 0; i < m; ++i)
        {
            batch.aux_weights[i] = weight(*config_.weighting, schedule_, batch.t[i]);
            const Vector f = (*teacher_)(x0s.row(i));
            std::copy(f.begin(), f.end(), batch.aux_targets.row(i).begin());
        }
        batch.lambda_ra = config_.lambda_ra;
    }
    return batch;
}

std::vector<double> Trainer::probe() const
{
    std::vector<double> out;
    if (!oracle_)
        return out;
    const Rng probe_root = root_.derive("probe");
    McBudget mc;
    mc.probes = config_.probe_samples;
    for (std::size_t k = 0; k < config_.probe_times.size(); ++k)
        out.push_back(second_moment_mse(model_, *oracle_, schedule_, config_.probe_times[k], mc, probe_root.derive(k)));
    return out;
}

TrainBatch Trainer::preview_batch()
{
    if (config_.bank && !bank_)
        prefill_bank();
    Rng rng = root_.derive("iteration").derive(iteration_);
    return build_batch(rng);
}

MetricsRow Trainer::step()
{
    if (config_.bank && !bank_)
        prefill_bank();
    Rng rng = root_.derive("iteration").derive(iteration_);
    const TrainBatch batch = build_batch(rng);
    const LossResult result = model_.loss_and_grad(batch);
    if (!std::isfinite(result.loss))
        throw NumericError("train: non-finite loss at iteration " + std::to_string(iteration_ + 1));
    opt_.step(model_.params(), result.grad);

    if (bank_)
    {
        // Fresh data batch goes in after the update.
        Rng push_rng = rng.derive("push");
        Vector x0(data_.dim());
        for (std::size_t i = 0; i < config_.batch; ++i)
        {
            int label = -1;
            draw_data(push_rng, x0, label);
            bank_->push(x0, label);
        }
    }

    ++iteration_;
    MetricsRow row;
    row.iteration = iteration_;
    row.loss = result.loss;
    if (oracle_ && !config_.probe_times.empty()
        && (iteration_ % config_.probe_interval == 0 || iteration_ == config_.iterations))
        row.lmse = probe();
    log_.rows.push_back(row);
    if (on_row)
        on_row(row);
    return row;
}

void Trainer::run(std::size_t iterations)
{
    for (std::size_t i = 0; i < iterations; ++i)
        step();
}

}  // namespace svl
