#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "io.hpp"
#include "profiler.hpp"
#include "schedule.hpp"
#include "solvers.hpp"
#include "train.hpp"

namespace svl {

/*!
 * Run configuration: one JSON document with sections "schedule", "data",
 * "targets", "train", "bank", "weighting", "solver", "profiler". Relative
 * paths resolve against the config file's directory. Command-line flags are
 * applied on top by the caller.
 */
struct RunConfig
{
    std::uint64_t seed = 0;
    Schedule schedule;
    std::optional<std::filesystem::path> spec_path;
    std::optional<std::filesystem::path> dataset_path;
    TrainConfig train;
    SolverPlan plan;
    McBudget profiler;
    Normalization normalization = Normalization::sqrt_d;
    std::optional<std::filesystem::path> output_dir;
};

RunConfig parse_run_config(const Json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

Json plan_to_json(const SolverPlan& plan);
// Missing fields keep the values of `defaults`.
SolverPlan plan_from_json(const Json& j, const SolverPlan& defaults = {});

}  // namespace svl
