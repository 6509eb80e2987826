// svlab: command-line front end for the stablevel library.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "stablevel/config.hpp"
#include "stablevel/errors.hpp"
#include "stablevel/gmm.hpp"
#include "stablevel/io.hpp"
#include "stablevel/model.hpp"
#include "stablevel/profiler.hpp"
#include "stablevel/solvers.hpp"
#include "stablevel/svg.hpp"
#include "stablevel/train.hpp"

namespace fs = std::filesystem;
using namespace svl;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_usage = 1;
constexpr int exit_numeric = 2;

struct Loaded
{
    RunConfig cfg;
    std::optional<GmmSpec> spec;
    std::optional<Dataset> dataset;
};

Loaded load(const fs::path& config_path, std::optional<std::uint64_t> seed)
{
    Loaded l;
    l.cfg = load_run_config(config_path);
    if (seed)
    {
        l.cfg.seed = *seed;
        l.cfg.train.seed = *seed;
    }
    if (l.cfg.spec_path)
        l.spec = load_spec(*l.cfg.spec_path);
    if (l.cfg.dataset_path)
        l.dataset = read_svl(*l.cfg.dataset_path);
    if (l.spec && l.dataset && l.spec->dim != l.dataset->points.cols())
        throw ConfigError("config: spec and dataset dimensions differ");
    return l;
}

void ensure_parent(const fs::path& p)
{
    if (p.has_parent_path())
    {
        std::error_code ec;
        fs::create_directories(p.parent_path(), ec);
    }
}

// ---------------------------------------------------------------- make-gmm

struct MakeGmmArgs
{
    std::size_t dim = 0, modes = 0, samples = 0, classes = 0;
    std::uint64_t seed = 0;
    std::string out, dataset;
};

int run_make_gmm(const MakeGmmArgs& a)
{
    if (a.samples > 0 && a.dataset.empty())
        throw ConfigError("make-gmm: --samples needs --dataset");
    if (!a.dataset.empty() && a.samples == 0)
        throw ConfigError("make-gmm: --dataset needs --samples");
    const Rng root = Rng(a.seed).derive("make-gmm");
    Rng spec_rng = root.derive("spec");
    GmmSpec spec = random_spec(a.dim, a.modes, spec_rng);
    if (a.classes > 0)
    {
        std::vector<int> labels(a.modes);
        for (std::size_t k = 0; k < a.modes; ++k)
            labels[k] = static_cast<int>(k % a.classes);
        spec.labels = labels;
        spec.validate();
    }
    save_spec(a.out, spec);
    if (a.samples > 0)
    {
        Rng sample_rng = root.derive("samples");
        const GmmDraws draws = sample(spec, sample_rng, a.samples);
        write_svl(a.dataset, draws.points, draws.labels, static_cast<std::uint32_t>(a.classes));
    }
    return exit_ok;
}

// ----------------------------------------------------------- variance-curve

struct CurveArgs
{
    std::string config, grid = "0.02:0.98:49", estimator = "empirical", out, svg, normalization;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> probes;
};

int run_variance_curve(const CurveArgs& a)
{
    Loaded l = load(a.config, a.seed);
    const Estimator est = estimator_from_string(a.estimator);
    if (est == Estimator::empirical_snis && !l.dataset)
        throw ConfigError("variance-curve: the empirical estimator needs data.dataset in the config");
    if (est == Estimator::oracle && !l.spec)
        throw ConfigError("variance-curve: the oracle estimator needs data.spec in the config");
    McBudget mc = l.cfg.profiler;
    if (a.probes)
        mc.probes = *a.probes;
    const Normalization norm = a.normalization.empty() ? l.cfg.normalization : normalization_from_string(a.normalization);
    const auto grid = parse_grid(a.grid);
    const Rng rng = Rng(l.cfg.seed).derive("variance-curve");
    const VarianceCurve curve = variance_curve(l.spec ? &*l.spec : nullptr,
                                               l.dataset ? &l.dataset->points : nullptr,
                                               l.cfg.schedule, grid, mc, norm, est, rng);
    ensure_parent(a.out);
    write_curve_csv(a.out, curve);
    if (!a.svg.empty())
    {
        SvgSeries s{"V_CFM (" + to_string(est) + ")", curve.t, curve.values, curve.q15, curve.q85};
        const std::string ylabel = norm == Normalization::sqrt_d ? "variance / sqrt(d)" : "variance";
        write_text(a.svg, line_chart("Target variance over time", "t", ylabel, {s}));
    }
    return exit_ok;
}

// -------------------------------------------------------------------- train

struct TrainArgs
{
    std::string config, out, resume;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> iterations;
};

std::vector<std::string> existing_rows(const fs::path& metrics, std::size_t upto)
{
    std::vector<std::string> rows;
    std::ifstream in(metrics);
    std::string line;
    if (!std::getline(in, line))
        return rows;
    while (std::getline(in, line))
    {
        if (line.empty())
            continue;
        const std::size_t it = std::stoul(line.substr(0, line.find(',')));
        if (it <= upto)
            rows.push_back(line);
    }
    return rows;
}

int run_train(const TrainArgs& a)
{
    Loaded l = load(a.config, a.seed);
    if (a.iterations)
        l.cfg.train.iterations = *a.iterations;
    TrainData data;
    if (l.dataset)
    {
        data.points = &l.dataset->points;
        if (l.dataset->num_classes > 0)
        {
            data.labels = &l.dataset->labels;
            data.num_classes = l.dataset->num_classes;
        }
    }
    else if (l.spec)
    {
        data.spec = &*l.spec;
    }
    else
    {
        throw ConfigError("train: the config needs data.spec or data.dataset");
    }
    const GmmSpec* oracle = l.spec ? &*l.spec : nullptr;

    const fs::path dir(a.out);
    fs::create_directories(dir);
    const fs::path metrics = dir / "metrics.csv";
    const fs::path events = dir / "events.log";
    const fs::path ckpt_path = dir / "model.ckpt";

    Trainer trainer(l.cfg.train, l.cfg.schedule, data, oracle);
    std::vector<std::string> kept;
    std::ofstream event_log(events, a.resume.empty() ? std::ios::trunc : std::ios::app);
    if (!a.resume.empty())
    {
        Checkpoint ck = load_checkpoint(a.resume);
        if (!(ck.arch == trainer.model().arch()))
            throw ConfigError("train: checkpoint architecture does not match the config");
        if (!ck.optimizer)
            throw ConfigError("train: checkpoint has no optimizer state to resume from");
        trainer.restore(std::move(ck.params), *ck.optimizer, ck.iteration);
        kept = existing_rows(metrics, ck.iteration);
        event_log << "resume from iteration " << ck.iteration << "\n";
    }

    std::ofstream csv(metrics, std::ios::trunc);
    if (!csv)
        throw IoError("cannot open '" + metrics.string() + "' for writing");
    csv << metrics_header(l.cfg.train.probe_times) << "\n";
    for (const auto& r : kept)
        csv << r << "\n";
    trainer.on_row = [&](const MetricsRow& row) {
        csv << metrics_line(row, l.cfg.train.probe_times.size()) << "\n";
        if (!row.lmse.empty())
            csv.flush();
    };
    trainer.on_event = [&](const std::string& msg) {
        event_log << msg << "\n";
        std::clog << msg << "\n";
    };

    int code = exit_ok;
    try
    {
        trainer.run();
    }
    catch (const NumericError& e)
    {
        std::cerr << "svlab train: " << e.what() << "\n";
        code = exit_numeric;
    }
    csv.flush();

    Checkpoint ck;
    ck.arch = trainer.model().arch();
    ck.seed = l.cfg.seed;
    ck.iteration = trainer.iteration();
    ck.params.assign(trainer.model().params().begin(), trainer.model().params().end());
    ck.optimizer = trainer.optimizer();
    ck.extra = Json{{"loss", to_string(l.cfg.train.loss)}, {"n", l.cfg.train.n}};
    if (code == exit_ok)
        save_checkpoint(ckpt_path, ck);
    event_log << "finished at iteration " << trainer.iteration() << "\n";
    return code;
}

// ------------------------------------------------------------------- sample

struct SampleArgs
{
    std::string config, velocity = "oracle", out, summary;
    std::size_t count = 1000;
    std::optional<std::uint64_t> seed;
    std::optional<int> label;
};

Json endpoint_summary(const Matrix& x, const GmmSpec* spec)
{
    const std::size_t n = x.rows(), d = x.cols();
    Vector mean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j)
            mean[j] += x(i, j);
    for (double& m : mean)
        m /= static_cast<double>(n);
    Matrix cov(d, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < d; ++b)
                cov(a, b) += (x(i, a) - mean[a]) * (x(i, b) - mean[b]);
    const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
    Json covariance = Json::array();
    Vector variance(d);
    for (std::size_t a = 0; a < d; ++a)
    {
        Vector row(d);
        for (std::size_t b = 0; b < d; ++b)
            row[b] = cov(a, b) / denom;
        variance[a] = row[a];
        covariance.push_back(row);
    }
    Json j{{"count", n}, {"dim", d}, {"mean", mean}, {"variance", variance}, {"covariance", covariance}};
    if (spec)
    {
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            ll += data_log_density(*spec, x.row(i));
        j["avg_log_likelihood"] = ll / static_cast<double>(n);
    }
    return j;
}

int run_sample(const SampleArgs& a)
{
    Loaded l = load(a.config, a.seed);
    l.cfg.plan.validate(l.cfg.schedule);
    VelocityFn velocity;
    std::optional<VelocityModel> model;
    std::size_t dim = 0;
    if (a.velocity == "oracle")
    {
        if (!l.spec)
            throw ConfigError("sample: oracle velocity needs data.spec in the config");
        velocity = oracle_velocity(*l.spec, l.cfg.schedule);
        dim = l.spec->dim;
    }
    else
    {
        Checkpoint ck = load_checkpoint(a.velocity);
        model.emplace(ck.arch, std::move(ck.params));
        dim = ck.arch.dim;
        if (l.spec && l.spec->dim != dim)
            throw ConfigError("sample: checkpoint dim " + std::to_string(dim) + " does not match spec dim "
                              + std::to_string(l.spec->dim));
        if (l.dataset && l.dataset->points.cols() != dim)
            throw ConfigError("sample: checkpoint dim does not match the dataset");
        if (a.label && !ck.arch.conditional())
            throw ConfigError("sample: --label needs a class-conditional checkpoint");
        const std::optional<int> label = a.label;
        const VelocityModel* m = &*model;
        velocity = [m, label](std::span<const double> xt, double t, std::span<double> out) {
            const ForwardResult r = m->forward(xt, t, label);
            std::copy(r.v.begin(), r.v.end(), out.begin());
        };
    }
    const Rng rng = Rng(l.cfg.seed).derive("sample");
    const Matrix endpoints = sample(l.cfg.plan, l.cfg.schedule, velocity, rng, a.count, dim);
    for (double v : endpoints.flat())
        if (!std::isfinite(v))
            throw NumericError("sample: non-finite endpoint");
    ensure_parent(a.out);
    write_svl(a.out, endpoints);
    const fs::path summary = a.summary.empty() ? fs::path(a.out + ".json") : fs::path(a.summary);
    Json j = endpoint_summary(endpoints, l.spec ? &*l.spec : nullptr);
    j["plan"] = plan_to_json(l.cfg.plan);
    j["schedule"] = to_string(l.cfg.schedule.kind);
    write_text(summary, j.dump(1) + "\n");
    return exit_ok;
}

// ------------------------------------------------------------- solver-bench

struct BenchArgs
{
    std::string config, plans, out;
    std::size_t reference_steps = 10000;
    std::size_t count = 1000;
    std::optional<std::uint64_t> seed;
};

int run_solver_bench(const BenchArgs& a)
{
    Loaded l = load(a.config, a.seed);
    if (!l.spec)
        throw ConfigError("solver-bench: reference trajectories need data.spec in the config");
    const Json plans = read_json(a.plans);
    if (!plans.is_array() || plans.empty())
        throw ConfigError("solver-bench: plans file must be a nonempty JSON array");
    const VelocityFn velocity = oracle_velocity(*l.spec, l.cfg.schedule);
    const Rng rng = Rng(l.cfg.seed).derive("solver-bench");
    const Matrix initial = prior_draws(l.cfg.schedule, rng.derive("prior"), a.count, l.spec->dim);
    const Matrix reference = reference_integrate(l.cfg.schedule, velocity, initial, a.reference_steps);

    std::string csv = "plan_id,total_steps,mean_error,p95_error\n";
    for (std::size_t i = 0; i < plans.size(); ++i)
    {
        const SolverPlan plan = plan_from_json(plans[i]);
        const std::string id = plans[i].value("id", "plan" + std::to_string(i));
        const Matrix endpoints = integrate(plan, l.cfg.schedule, velocity, initial, rng.derive("plan").derive(i));
        const BenchRow row = endpoint_errors(id, plan.total_steps(l.cfg.schedule), endpoints, reference);
        csv += row.id + "," + std::to_string(row.total_steps) + "," + format_double(row.mean_error) + ","
               + format_double(row.p95_error) + "\n";
    }
    ensure_parent(a.out);
    write_text(a.out, csv);
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"svlab: variance-reduced flow matching toolkit"};
    app.footer("Exit codes: 0 success, 1 usage or configuration error, 2 numeric failure (NaN).");
    app.require_subcommand(1);

    MakeGmmArgs gmm;
    auto* c_gmm = app.add_subcommand("make-gmm", "Write a random diagonal GMM spec and optional SVL1 dataset");
    c_gmm->add_option("--dim", gmm.dim, "Data dimension")->required()->check(CLI::PositiveNumber);
    c_gmm->add_option("--modes", gmm.modes, "Number of mixture components")->required()->check(CLI::PositiveNumber);
    c_gmm->add_option("--seed", gmm.seed, "Master seed")->required();
    c_gmm->add_option("--out", gmm.out, "Spec JSON path")->required();
    c_gmm->add_option("--samples", gmm.samples, "Dataset size");
    c_gmm->add_option("--dataset", gmm.dataset, "SVL1 dataset path");
    c_gmm->add_option("--classes", gmm.classes, "Label component k with class k mod C");

    CurveArgs curve;
    std::uint64_t curve_seed = 0;
    auto* c_curve = app.add_subcommand("variance-curve", "Estimate V_CFM(t) over a time grid");
    c_curve->add_option("--config", curve.config, "Run config JSON")->required()->check(CLI::ExistingFile);
    c_curve->add_option("--grid", curve.grid, "Grid a:b:count")->capture_default_str();
    c_curve->add_option("--estimator", curve.estimator, "empirical or oracle")
        ->check(CLI::IsMember({"empirical", "oracle"}))
        ->capture_default_str();
    c_curve->add_option("--out", curve.out, "Curve CSV path")->required();
    c_curve->add_option("--svg", curve.svg, "Optional SVG chart path");
    c_curve->add_option("--normalization", curve.normalization, "raw or sqrt_d (overrides config)");
    std::size_t curve_probes = 0;
    auto* o_curve_probes = c_curve->add_option("--probes", curve_probes, "Monte Carlo probes per grid point");
    auto* o_curve_seed = c_curve->add_option("--seed", curve_seed, "Override the config seed");

    TrainArgs train;
    std::uint64_t train_seed = 0;
    std::size_t train_iters = 0;
    auto* c_train = app.add_subcommand("train", "Train a velocity model");
    c_train->add_option("--config", train.config, "Run config JSON")->required()->check(CLI::ExistingFile);
    c_train->add_option("--out", train.out, "Output directory")->required();
    c_train->add_option("--resume", train.resume, "Checkpoint to resume from")->check(CLI::ExistingFile);
    auto* o_train_seed = c_train->add_option("--seed", train_seed, "Override the config seed");
    auto* o_train_iters = c_train->add_option("--iterations", train_iters, "Total iterations (overrides config)");

    SampleArgs samp;
    std::uint64_t samp_seed = 0;
    int samp_label = 0;
    auto* c_sample = app.add_subcommand("sample", "Generate endpoints with the configured solver plan");
    c_sample->add_option("--config", samp.config, "Run config JSON")->required()->check(CLI::ExistingFile);
    c_sample->add_option("--count", samp.count, "Number of paths")->capture_default_str()->check(CLI::PositiveNumber);
    c_sample->add_option("--velocity", samp.velocity, "oracle or a checkpoint path")->capture_default_str();
    c_sample->add_option("--out", samp.out, "Endpoint SVL1 path")->required();
    c_sample->add_option("--summary", samp.summary, "Summary JSON path (default <out>.json)");
    auto* o_samp_label = c_sample->add_option("--label", samp_label, "Class for conditional checkpoints");
    auto* o_samp_seed = c_sample->add_option("--seed", samp_seed, "Override the config seed");

    BenchArgs bench;
    std::uint64_t bench_seed = 0;
    auto* c_bench = app.add_subcommand("solver-bench", "Compare solver plans against a fine reference integration");
    c_bench->add_option("--config", bench.config, "Run config JSON")->required()->check(CLI::ExistingFile);
    c_bench->add_option("--plans", bench.plans, "JSON array of solver plans")->required()->check(CLI::ExistingFile);
    c_bench->add_option("--reference-steps", bench.reference_steps, "RK4 reference steps")->capture_default_str();
    c_bench->add_option("--count", bench.count, "Number of shared initial draws")->capture_default_str();
    c_bench->add_option("--out", bench.out, "Bench CSV path")->required();
    auto* o_bench_seed = c_bench->add_option("--seed", bench_seed, "Override the config seed");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_usage;
    }

    try
    {
        if (c_gmm->parsed())
            return run_make_gmm(gmm);
        if (c_curve->parsed())
        {
            if (*o_curve_seed)
                curve.seed = curve_seed;
            if (*o_curve_probes)
                curve.probes = curve_probes;
            return run_variance_curve(curve);
        }
        if (c_train->parsed())
        {
            if (*o_train_seed)
                train.seed = train_seed;
            if (*o_train_iters)
                train.iterations = train_iters;
            return run_train(train);
        }
        if (c_sample->parsed())
        {
            if (*o_samp_seed)
                samp.seed = samp_seed;
            if (*o_samp_label)
                samp.label = samp_label;
            return run_sample(samp);
        }
        if (c_bench->parsed())
        {
            if (*o_bench_seed)
                bench.seed = bench_seed;
            return run_solver_bench(bench);
        }
    }
    catch (const NumericError& e)
    {
        std::cerr << "svlab: " << e.what() << "\n";
        return exit_numeric;
    }
    catch (const SingularityError& e)
    {
        std::cerr << "svlab: " << e.what() << "\n";
        return exit_numeric;
    }
    catch (const std::exception& e)
    {
        std::cerr << "svlab: " << e.what() << "\n";
        return exit_usage;
    }
    return exit_usage;
}
