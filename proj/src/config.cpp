#include "stablevel/config.hpp"

#include "stablevel/errors.hpp"

namespace svl {

namespace {

std::filesystem::path resolve_existing(const std::filesystem::path& base, const std::string& raw, const char* what)
{
    std::filesystem::path p(raw);
    if (p.is_relative())
        p = base / p;
    if (!std::filesystem::exists(p))
        throw ConfigError(std::string("config: ") + what + " '" + p.string() + "' does not exist");
    return p;
}

void check_keys(const Json& section, std::initializer_list<const char*> allowed, const char* name)
{
    if (!section.is_object())
        throw ConfigError(std::string("config: section '") + name + "' must be an object");
    for (const auto& [key, value] : section.items())
    {
        bool ok = false;
        for (const char* a : allowed)
            ok = ok || key == a;
        if (!ok)
            throw ConfigError(std::string("config: unknown key '") + key + "' in section '" + name + "'");
    }
}

}  // namespace

Json plan_to_json(const SolverPlan& plan)
{
    return Json{{"xi", plan.xi},
                {"high_steps", plan.high_steps},
                {"low_steps", plan.low_steps},
                {"base", to_string(plan.base)},
                {"f_beta", plan.f_beta},
                {"w_t", to_string(plan.w_t)},
                {"low", plan.use_stablevs ? "stablevs" : "base"}};
}

SolverPlan plan_from_json(const Json& j, const SolverPlan& defaults)
{
    check_keys(j, {"id", "xi", "high_steps", "low_steps", "base", "f_beta", "w_t", "low"}, "solver");
    SolverPlan p = defaults;
    p.xi = j.value("xi", p.xi);
    p.high_steps = j.value("high_steps", p.high_steps);
    p.low_steps = j.value("low_steps", p.low_steps);
    if (j.contains("base"))
        p.base = base_solver_from_string(j.at("base").get<std::string>());
    p.f_beta = j.value("f_beta", p.f_beta);
    if (j.contains("w_t"))
        p.w_t = diffusion_kind_from_string(j.at("w_t").get<std::string>());
    if (j.contains("low"))
    {
        const auto low = j.at("low").get<std::string>();
        if (low != "stablevs" && low != "base")
            throw ConfigError("config: solver.low must be 'stablevs' or 'base'");
        p.use_stablevs = low == "stablevs";
    }
    return p;
}

RunConfig parse_run_config(const Json& j, const std::filesystem::path& base_dir)
{
    try
    {
        check_keys(j, {"seed", "schedule", "data", "targets", "train", "bank", "weighting", "solver", "profiler", "output"},
                   "root");
        RunConfig cfg;
        if (!j.contains("seed"))
            throw ConfigError("config: 'seed' is mandatory");
        cfg.seed = j.at("seed").get<std::uint64_t>();

        if (j.contains("schedule"))
        {
            const auto& s = j.at("schedule");
            check_keys(s, {"kind", "t_min", "t_max"}, "schedule");
            if (s.contains("kind"))
                cfg.schedule.kind = schedule_kind_from_string(s.at("kind").get<std::string>());
            cfg.schedule.t_min = s.value("t_min", cfg.schedule.t_min);
            cfg.schedule.t_max = s.value("t_max", cfg.schedule.t_max);
        }
        cfg.schedule.validate();

        if (j.contains("data"))
        {
            const auto& d = j.at("data");
            check_keys(d, {"spec", "dataset"}, "data");
            if (d.contains("spec"))
                cfg.spec_path = resolve_existing(base_dir, d.at("spec").get<std::string>(), "spec");
            if (d.contains("dataset"))
                cfg.dataset_path = resolve_existing(base_dir, d.at("dataset").get<std::string>(), "dataset");
        }

        TrainConfig& tc = cfg.train;
        tc.seed = cfg.seed;
        if (j.contains("targets"))
        {
            const auto& t = j.at("targets");
            check_keys(t, {"loss", "n"}, "targets");
            if (t.contains("loss"))
                tc.loss = loss_kind_from_string(t.at("loss").get<std::string>());
            tc.n = t.value("n", tc.n);
        }
        if (j.contains("train"))
        {
            const auto& t = j.at("train");
            check_keys(t,
                       {"batch", "iterations", "lr", "weight_decay", "t_range", "probe_times", "probe_interval",
                        "probe_samples", "model", "workers"},
                       "train");
            tc.batch = t.value("batch", tc.batch);
            tc.iterations = t.value("iterations", tc.iterations);
            tc.lr = t.value("lr", tc.lr);
            tc.weight_decay = t.value("weight_decay", tc.weight_decay);
            if (t.contains("t_range"))
            {
                const auto range = t.at("t_range").get<std::vector<double>>();
                if (range.size() != 2)
                    throw ConfigError("config: train.t_range must be [lo, hi]");
                tc.t_lo = range[0];
                tc.t_hi = range[1];
            }
            tc.probe_times = t.value("probe_times", tc.probe_times);
            tc.probe_interval = t.value("probe_interval", tc.probe_interval);
            tc.probe_samples = t.value("probe_samples", tc.probe_samples);
            tc.workers = t.value("workers", tc.workers);
            if (t.contains("model"))
                tc.arch = arch_from_json(t.at("model"));
        }
        if (j.contains("bank"))
        {
            const auto& b = j.at("bank");
            check_keys(b, {"capacity", "p_cfg"}, "bank");
            BankSettings bank;
            bank.capacity = b.value("capacity", bank.capacity);
            bank.p_cfg = b.value("p_cfg", bank.p_cfg);
            tc.bank = bank;
        }
        if (j.contains("weighting"))
        {
            const auto& w = j.at("weighting");
            check_keys(w, {"kind", "xi", "k", "lambda_ra"}, "weighting");
            WeightingFn fn;
            if (w.contains("kind"))
                fn.kind = weighting_kind_from_string(w.at("kind").get<std::string>());
            fn.xi = w.value("xi", fn.xi);
            fn.k = w.value("k", fn.k);
            fn.validate();
            tc.weighting = fn;
            tc.lambda_ra = w.value("lambda_ra", tc.lambda_ra);
        }
        if (j.contains("solver"))
            cfg.plan = plan_from_json(j.at("solver"));
        if (j.contains("profiler"))
        {
            const auto& p = j.at("profiler");
            check_keys(p, {"probes", "inner", "workers", "normalization"}, "profiler");
            cfg.profiler.probes = p.value("probes", cfg.profiler.probes);
            cfg.profiler.inner = p.value("inner", cfg.profiler.inner);
            cfg.profiler.workers = p.value("workers", cfg.profiler.workers);
            if (p.contains("normalization"))
                cfg.normalization = normalization_from_string(p.at("normalization").get<std::string>());
        }
        if (j.contains("output"))
        {
            std::filesystem::path out(j.at("output").get<std::string>());
            cfg.output_dir = out.is_relative() ? base_dir / out : out;
        }
        return cfg;
    }
    catch (const Json::exception& e)
    {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

RunConfig load_run_config(const std::filesystem::path& path)
{
    return parse_run_config(read_json(path), path.parent_path());
}

}  // namespace svl
