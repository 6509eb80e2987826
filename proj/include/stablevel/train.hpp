#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bank.hpp"
#include "gmm.hpp"
#include "matrix.hpp"
#include "model.hpp"
#include "rng.hpp"
#include "schedule.hpp"
#include "varepa.hpp"

namespace svl {

enum class LossKind
{
    cfm,       // single-reference conditional velocity
    stablevm,  // multi-reference self-normalized target, xt from the mixture path
    stf,       // same target, xt noised from the first reference only
};

std::string to_string(LossKind k);
LossKind loss_kind_from_string(std::string_view name);

struct BankSettings
{
    std::size_t capacity = 256;
    double p_cfg = 0.1;
};

struct TrainConfig
{
    LossKind loss = LossKind::cfm;
    std::size_t n = 1;  // references per iteration (stablevm, stf)
    // Time sampler U[t_lo, t_hi]; unset bounds fall back to the schedule clamps.
    std::optional<double> t_lo;
    std::optional<double> t_hi;
    double lr = 1e-4;
    double weight_decay = 0.0;
    std::size_t batch = 128;
    std::size_t iterations = 1000;
    std::uint64_t seed = 0;

    std::vector<double> probe_times;
    std::size_t probe_interval = 100;
    std::size_t probe_samples = 1024;

    std::optional<WeightingFn> weighting;  // enables the alignment term
    double lambda_ra = 0.5;

    std::optional<BankSettings> bank;  // enables the class-conditional loop
    ModelArch arch;                    // dim and num_classes are set from the data
    std::size_t workers = 0;

    void validate(const Schedule& schedule) const;
    double time_lo(const Schedule& schedule) const { return t_lo.value_or(schedule.t_min); }
    double time_hi(const Schedule& schedule) const { return t_hi.value_or(schedule.t_max); }
};

// Training data: either a spec sampled online or a finite (labeled) dataset.
struct TrainData
{
    const GmmSpec* spec = nullptr;
    const Matrix* points = nullptr;
    const std::vector<int>* labels = nullptr;
    std::size_t num_classes = 0;  // for datasets; specs report their own

    std::size_t dim() const;
    std::size_t classes() const;
};

struct MetricsRow
{
    std::size_t iteration = 0;  // number of completed updates
    double loss = 0.0;
    std::vector<double> lmse;   // one per probe time, empty when not probed
};

struct MetricsLog
{
    std::vector<double> probe_times;
    std::vector<MetricsRow> rows;
};

/*!
 * Iteration-level training loop. Every random draw of iteration i comes from
 * a substream keyed by (seed, i), so a resumed run continues exactly where a
 * checkpoint left off (except for the memory bank, which is rebuilt by
 * prefill).
 */
class Trainer
{
  public:
    Trainer(TrainConfig config, Schedule schedule, TrainData data, const GmmSpec* oracle = nullptr);

    // Continue from saved parameters, optimizer state and iteration count.
    void restore(Vector params, const AdamW& optimizer, std::size_t iteration);

    void run(std::size_t iterations);
    void run() { run(config_.iterations - std::min(iteration_, config_.iterations)); }
    MetricsRow step();

    const VelocityModel& model() const noexcept { return model_; }
    const AdamW& optimizer() const noexcept { return opt_; }
    const MetricsLog& log() const noexcept { return log_; }
    std::size_t iteration() const noexcept { return iteration_; }
    const TrainConfig& config() const noexcept { return config_; }

    std::function<void(const MetricsRow&)> on_row;
    std::function<void(const std::string&)> on_event;

    // L_MSE at every probe time using the fixed probe set.
    std::vector<double> probe() const;

    // The minibatch the next step() would train on.
    TrainBatch preview_batch();

  private:
    void draw_data(Rng& rng, std::span<double> x0, int& label) const;
    void prefill_bank();
    TrainBatch build_batch(Rng& rng) const;

    TrainConfig config_;
    Schedule schedule_;
    TrainData data_;
    const GmmSpec* oracle_;
    std::unique_ptr<GmmSampler> sampler_;
    VelocityModel model_;
    AdamW opt_;
    std::optional<MemoryBank> bank_;
    std::optional<TeacherProjection> teacher_;
    std::size_t iteration_ = 0;
    MetricsLog log_;
    Rng root_;
};

}  // namespace svl
