#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "stablevel/io.hpp"

using namespace svl;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test
{
  protected:
    void SetUp() override
    {
        dir_ = fs::temp_directory_path()
               / (std::string("svl_cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    // Runs svlab with the given arguments and returns its exit status.
    int run(const std::string& args) const
    {
        const std::string cmd = std::string(SVLAB_PATH) + " " + args + " > " + (dir_ / "stdout.txt").string()
                                + " 2> " + (dir_ / "stderr.txt").string();
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    void write(const std::string& name, const std::string& text) const
    {
        std::ofstream(dir_ / name) << text;
    }

    std::string read(const std::string& name) const
    {
        std::ifstream in(dir_ / name, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    fs::path dir_;
};

std::vector<std::string> lines(const std::string& text)
{
    std::vector<std::string> out;
    std::stringstream ss(text);
    for (std::string line; std::getline(ss, line);)
        out.push_back(line);
    return out;
}

}  // namespace

TEST_F(CliTest, MakeGmmIsDeterministic)
{
    ASSERT_EQ(run("make-gmm --dim 10 --modes 100 --seed 7 --out " + path("a.json") + " --samples 500 --dataset "
                  + path("a.svl")),
              0);
    ASSERT_EQ(run("make-gmm --dim 10 --modes 100 --seed 7 --out " + path("b.json") + " --samples 500 --dataset "
                  + path("b.svl")),
              0);
    EXPECT_EQ(read("a.json"), read("b.json"));
    EXPECT_EQ(read("a.svl"), read("b.svl"));
    EXPECT_EQ(fs::file_size(path("a.svl")), 16u + 4u * 500 * 10);
    const GmmSpec spec = load_spec(path("a.json"));
    double total = 0.0;
    for (double w : spec.weights)
        total += w;
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_EQ(spec.modes(), 100u);

    ASSERT_EQ(run("make-gmm --dim 2 --modes 6 --seed 1 --classes 3 --out " + path("c.json") + " --samples 60 --dataset "
                  + path("c.svl")),
              0);
    const Dataset ds = read_svl(path("c.svl"));
    EXPECT_EQ(ds.num_classes, 3u);
    EXPECT_EQ(ds.labels.size(), 60u);
}

TEST_F(CliTest, UsageErrorsExitOne)
{
    EXPECT_EQ(run("make-gmm --dim 2"), 1);
    EXPECT_EQ(run("no-such-command"), 1);
    EXPECT_EQ(run("make-gmm --dim 2 --modes 2 --seed 1 --out /nonexistent/dir/x.json"), 1);
    write("noseed.json", R"({"schedule": {"kind": "linear"}})");
    EXPECT_EQ(run("variance-curve --config " + path("noseed.json") + " --out " + path("c.csv")), 1);
    EXPECT_EQ(run("--help"), 0);
    EXPECT_NE(read("stdout.txt").find("Exit codes"), std::string::npos);
}

TEST_F(CliTest, VarianceCurveOnDeltaDataset)
{
    Matrix pts(100, 2);
    for (std::size_t i = 0; i < 100; ++i)
    {
        pts(i, 0) = 0.5;
        pts(i, 1) = -0.25;
    }
    write_svl(path("delta.svl"), pts);
    write("run.json", R"({"seed": 3, "data": {"dataset": "delta.svl"}, "profiler": {"probes": 64}})");
    ASSERT_EQ(run("variance-curve --config " + path("run.json") + " --grid 0.05:0.95:10 --estimator empirical --out "
                  + path("c.csv") + " --svg " + path("c.svg")),
              0);
    const VarianceCurve c = read_curve_csv(path("c.csv"));
    ASSERT_EQ(c.t.size(), 10u);
    for (double v : c.values)
        EXPECT_LT(v, 1e-10);
    EXPECT_NE(read("c.svg").find("<svg"), std::string::npos);
    // Oracle mode without a spec is a configuration error.
    EXPECT_EQ(run("variance-curve --config " + path("run.json") + " --estimator oracle --out " + path("d.csv")), 1);
}

TEST_F(CliTest, VarianceCurveSeedReproducible)
{
    save_spec(path("s.json"), standard_normal_spec(2));
    write("run.json", R"({"seed": 3, "data": {"spec": "s.json"}, "profiler": {"probes": 128}})");
    const std::string base = "variance-curve --config " + path("run.json") + " --grid 0.1:0.9:5 --estimator oracle ";
    ASSERT_EQ(run(base + "--out " + path("a.csv")), 0);
    ASSERT_EQ(run(base + "--out " + path("b.csv")), 0);
    ASSERT_EQ(run(base + "--seed 4 --out " + path("c.csv")), 0);
    EXPECT_EQ(read("a.csv"), read("b.csv"));
    EXPECT_NE(read("a.csv"), read("c.csv"));
}

TEST_F(CliTest, SampleDeltaAndEulerEquivalence)
{
    save_spec(path("delta.json"), delta_spec(Vector{1.0, -2.0}));
    write("svs.json", R"({"seed": 9, "data": {"spec": "delta.json"},
                          "solver": {"xi": 1.0, "low_steps": 5}})");
    ASSERT_EQ(run("sample --config " + path("svs.json") + " --count 50 --out " + path("e.svl")), 0);
    const Dataset e = read_svl(path("e.svl"));
    ASSERT_EQ(e.points.rows(), 50u);
    for (std::size_t i = 0; i < 50; ++i)
    {
        EXPECT_NEAR(e.points(i, 0), 1.0, 1e-6);
        EXPECT_NEAR(e.points(i, 1), -2.0, 1e-6);
    }
    const Json summary = read_json(path("e.svl.json"));
    EXPECT_EQ(summary.at("count"), 50);
    EXPECT_TRUE(summary.contains("avg_log_likelihood"));

    save_spec(path("two.json"), symmetric_two_mode_spec(2, 1.0, 0.05));
    write("a.json", R"({"seed": 9, "data": {"spec": "two.json"}, "solver": {"xi": 0.85, "f_beta": 0.0}})");
    write("b.json", R"({"seed": 9, "data": {"spec": "two.json"}, "solver": {"xi": 0.85, "low": "base"}})");
    ASSERT_EQ(run("sample --config " + path("a.json") + " --count 200 --out " + path("a.svl")), 0);
    ASSERT_EQ(run("sample --config " + path("b.json") + " --count 200 --out " + path("b.svl")), 0);
    EXPECT_EQ(read("a.svl"), read("b.svl"));
}

TEST_F(CliTest, SampleStandardNormalCovariance)
{
    save_spec(path("n.json"), standard_normal_spec(2));
    // The default 9-step low segment is first-order on Gaussian data (variance near 0.8),
    // so the recovery check uses a refined low segment.
    write("run.json", R"({"seed": 2, "data": {"spec": "n.json"}, "solver": {"low_steps": 400}})");
    ASSERT_EQ(run("sample --config " + path("run.json") + " --count 40000 --out " + path("n.svl")), 0);
    const Json s = read_json(path("n.svl.json"));
    const auto cov = s.at("covariance").get<std::vector<std::vector<double>>>();
    EXPECT_NEAR(cov[0][0], 1.0, 0.05);
    EXPECT_NEAR(cov[1][1], 1.0, 0.05);
    EXPECT_NEAR(cov[0][1], 0.0, 0.05);
}

TEST_F(CliTest, SolverBench)
{
    save_spec(path("n.json"), standard_normal_spec(2));
    write("run.json", R"({"seed": 2, "data": {"spec": "n.json"}})");
    write("plans.json", R"([
        {"id": "svs9", "xi": 0.85, "high_steps": 19, "low_steps": 9},
        {"id": "base28", "xi": 0.001, "high_steps": 28}
    ])");
    ASSERT_EQ(run("solver-bench --config " + path("run.json") + " --plans " + path("plans.json")
                  + " --reference-steps 2000 --count 100 --out " + path("b.csv")),
              0);
    const auto rows = lines(read("b.csv"));
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0], "plan_id,total_steps,mean_error,p95_error");
    EXPECT_EQ(rows[1].rfind("svs9,28,", 0), 0u);
    EXPECT_EQ(rows[2].rfind("base28,28,", 0), 0u);
}

TEST_F(CliTest, TrainWritesArtifactsAndResumes)
{
    save_spec(path("s.json"), standard_normal_spec(2));
    write("run.json", R"({"seed": 4, "data": {"spec": "s.json"}, "targets": {"loss": "stablevm", "n": 8},
                          "train": {"batch": 16, "iterations": 10, "lr": 0.001, "probe_times": [0.3],
                                    "probe_interval": 5, "probe_samples": 32, "model": {"hidden": [8, 8]}}})");
    ASSERT_EQ(run("train --config " + path("run.json") + " --out " + path("full")), 0);
    ASSERT_EQ(run("train --config " + path("run.json") + " --out " + path("part") + " --iterations 6"), 0);
    ASSERT_EQ(run("train --config " + path("run.json") + " --out " + path("part") + " --resume "
                  + path("part/model.ckpt")),
              0);
    const auto full = lines(read("full/metrics.csv"));
    const auto part = lines(read("part/metrics.csv"));
    ASSERT_EQ(full.size(), 11u);
    ASSERT_EQ(part.size(), 11u);
    // Iteration and loss columns match; the interrupted run also probed at its last iteration.
    for (std::size_t i = 1; i < part.size(); ++i)
    {
        EXPECT_EQ(part[i].substr(0, part[i].find(',')), std::to_string(i));
        const auto cut = [](const std::string& s) { return s.substr(0, s.rfind(',')); };
        EXPECT_EQ(cut(part[i]), cut(full[i]));
    }
    EXPECT_EQ(load_checkpoint(path("full/model.ckpt")).params, load_checkpoint(path("part/model.ckpt")).params);
    EXPECT_TRUE(fs::exists(path("full/events.log")));
}

TEST_F(CliTest, ConditionalTrainLogsBankFill)
{
    ASSERT_EQ(run("make-gmm --dim 2 --modes 8 --seed 1 --classes 4 --out " + path("s.json") + " --samples 2000 --dataset "
                  + path("d.svl")),
              0);
    write("run.json", R"({"seed": 4, "data": {"dataset": "d.svl"}, "targets": {"loss": "stablevm", "n": 1},
                          "bank": {"capacity": 256, "p_cfg": 0.1},
                          "train": {"batch": 16, "iterations": 3, "model": {"hidden": [8, 8]}}})");
    ASSERT_EQ(run("train --config " + path("run.json") + " --out " + path("o")), 0);
    EXPECT_NE(read("o/events.log").find("bank"), std::string::npos);
}

TEST_F(CliTest, NonFiniteTrainingExitsTwo)
{
    Matrix pts(4, 1, Vector{1.0, 2.0, 3.0, 4.0});
    write_svl(path("d.svl"), pts);
    // Patch one float to NaN after writing a valid file.
    {
        std::fstream f(path("d.svl"), std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(16 + 4);
        const unsigned char nan_bytes[4] = {0x00, 0x00, 0xc0, 0x7f};
        f.write(reinterpret_cast<const char*>(nan_bytes), 4);
    }
    write("run.json", R"({"seed": 4, "data": {"dataset": "d.svl"},
                          "train": {"batch": 16, "iterations": 3, "model": {"hidden": [4, 4]}}})");
    EXPECT_EQ(run("train --config " + path("run.json") + " --out " + path("o")), 2);
}
