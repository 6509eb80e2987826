#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gmm.hpp"
#include "matrix.hpp"
#include "model.hpp"
#include "profiler.hpp"
#include "train.hpp"

namespace svl {

using Json = nlohmann::json;

// SVL1: "SVL1", u32 n, u32 d, u32 C, [n u32 labels if C > 0], n*d f32, all LE.
struct Dataset
{
    Matrix points;
    std::vector<int> labels;  // empty when unlabeled
    std::uint32_t num_classes = 0;
};

void write_svl(const std::filesystem::path& path,
               const Matrix& points,
               std::span<const int> labels = {},
               std::uint32_t num_classes = 0);
Dataset read_svl(const std::filesystem::path& path);
std::uintmax_t svl_size(std::size_t n, std::size_t d, bool labeled);

Json spec_to_json(const GmmSpec& spec);
GmmSpec spec_from_json(const Json& j);
void save_spec(const std::filesystem::path& path, const GmmSpec& spec);
GmmSpec load_spec(const std::filesystem::path& path);

Json arch_to_json(const ModelArch& arch);
ModelArch arch_from_json(const Json& j);

// Layout: u32 LE header length, JSON header, then f64 LE blocks: parameters,
// and when the header says so, AdamW first and second moments.
struct Checkpoint
{
    ModelArch arch;
    std::uint64_t seed = 0;
    std::size_t iteration = 0;
    Vector params;
    std::optional<AdamW> optimizer;
    Json extra = Json::object();
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Metrics CSV: iteration, loss, lmse@<t> per probe time (blank when not probed).
std::string metrics_header(const std::vector<double>& probe_times);
std::string metrics_line(const MetricsRow& row, std::size_t probe_count);
void write_metrics_csv(const std::filesystem::path& path, const MetricsLog& log);

// Curve CSV: t, value, stderr, q15, q85, normalization, estimator, d, n_if_stablevm.
void write_curve_csv(const std::filesystem::path& path, const VarianceCurve& curve);
VarianceCurve read_curve_csv(const std::filesystem::path& path);

Json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

// Shortest round-trip decimal representation.
std::string format_double(double v);

}  // namespace svl
