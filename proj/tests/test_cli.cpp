#include "dtet/cli.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

namespace {

using namespace dtet;

struct TempDir {
    fs::path path;
    TempDir()
    {
        path = fs::temp_directory_path() / ("dtet_cli_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

int run(std::vector<std::string> args, std::string* err_text = nullptr)
{
    std::ostringstream out, err;
    const int rc = run_cli(args, out, err);
    if (err_text) *err_text = err.str();
    return rc;
}

class Cli : public ::testing::Test {
protected:
    TempDir dir;
    fs::path bench() const { return dir.path / "bench"; }
    fs::path rig() const { return bench() / "template.json"; }
    fs::path shots() const { return bench() / "shots"; }

    void SetUp() override
    {
        ASSERT_EQ(run({"generate", "--template", "cylinder-2-bone", "--shots", "2", "--seed", "4", "--out", bench().string(),
                       "--resolution", "24", "--eval-views", "3", "--eval-resolution", "24", "--gt-resolution", "24"}),
                  0);
        write_config(dir.path / "cfg.json", R"({"iterations": 8, "grid_resolution": 12, "checkpoint_every": 4, "lr": {"steps": [4]}})");
    }

    static void write_config(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

    int fit(const fs::path& out, const fs::path& config, std::vector<std::string> extra = {})
    {
        std::vector<std::string> a = {"fit", "--config", config.string(), "--shots", shots().string(), "--template", rig().string(),
                                      "--out", out.string()};
        a.insert(a.end(), extra.begin(), extra.end());
        return run(a);
    }
};

TEST_F(Cli, WorkflowProducesEveryOutput)
{
    const fs::path f = dir.path / "fit";
    ASSERT_EQ(fit(f, dir.path / "cfg.json"), 0);
    for (const char* name : {"checkpoint.bin", "checkpoint_0004.bin", "loss_log.csv", "config.json", "mesh.obj", "timing.json"})
        EXPECT_TRUE(fs::exists(f / name)) << name;
    EXPECT_EQ(fit_config_from_json(detail::read_json(f / "config.json")).iterations, 8);

    const std::string ck = (f / "checkpoint.bin").string(), cam = (bench() / "eval/0/camera.txt").string();
    EXPECT_EQ(run({"render", "--checkpoint", ck, "--template", rig().string(), "--camera", cam, "--pose",
                   (shots() / "0/pose.txt").string(), "--out", (dir.path / "r.png").string(), "--mask-out", (dir.path / "m.png").string()}),
              0);
    EXPECT_EQ(read_png(dir.path / "r.png", 3).width, 24);
    EXPECT_TRUE(fs::exists(dir.path / "m.png"));

    std::ofstream(dir.path / "seq.txt") << "0 0 0 0 0 0 0 0 0 0\n0 0 0 0 0 1.0 0.5 0 0 0\n";
    EXPECT_EQ(run({"animate", "--checkpoint", ck, "--template", rig().string(), "--poses", (dir.path / "seq.txt").string(), "--camera",
                   cam, "--out", (dir.path / "anim").string(), "--meshes"}),
              0);
    int pngs = 0;
    for (const auto& e : fs::directory_iterator(dir.path / "anim")) pngs += e.path().extension() == ".png";
    EXPECT_EQ(pngs, 2);
    EXPECT_TRUE(fs::exists(dir.path / "anim/frame_0001.obj"));

    EXPECT_EQ(run({"eval", "--checkpoint", ck, "--template", rig().string(), "--benchmark", bench().string(), "--out",
                   (dir.path / "ev").string(), "--config", (f / "config.json").string(), "--samples", "500"}),
              0);
    const nlohmann::json rep = detail::read_json(dir.path / "ev/report.json");
    EXPECT_EQ(rep.at("views").size(), 3u);
    EXPECT_EQ(rep.at("config").at("iterations"), 8);
    EXPECT_FALSE(rep.contains("runtime_seconds"));
    EXPECT_TRUE(detail::read_json(dir.path / "ev/timing.json").contains("seconds"));
}

TEST_F(Cli, GenerateAndFitAreByteIdentical)
{
    const fs::path b2 = dir.path / "bench2";
    ASSERT_EQ(run({"generate", "--template", "cylinder-2-bone", "--shots", "2", "--seed", "4", "--out", b2.string(), "--resolution",
                   "24", "--eval-views", "3", "--eval-resolution", "24", "--gt-resolution", "24"}),
              0);
    for (const auto& e : fs::recursive_directory_iterator(bench()))
        if (e.is_regular_file()) EXPECT_EQ(slurp(e.path()), slurp(b2 / fs::relative(e.path(), bench()))) << e.path();

    ASSERT_EQ(fit(dir.path / "a", dir.path / "cfg.json"), 0);
    ASSERT_EQ(fit(dir.path / "b", dir.path / "cfg.json"), 0);
    for (const char* name : {"checkpoint.bin", "checkpoint_0004.bin", "loss_log.csv", "config.json", "mesh.obj"})
        EXPECT_EQ(slurp(dir.path / "a" / name), slurp(dir.path / "b" / name)) << name;
}

TEST_F(Cli, ResumeMatchesUninterruptedRun)
{
    ASSERT_EQ(fit(dir.path / "full", dir.path / "cfg.json"), 0);
    write_config(dir.path / "half.json", R"({"iterations": 4, "grid_resolution": 12, "lr": {"steps": [4]}})");
    ASSERT_EQ(fit(dir.path / "split", dir.path / "half.json"), 0);
    fs::copy_file(dir.path / "split/checkpoint.bin", dir.path / "half.bin");
    ASSERT_EQ(fit(dir.path / "split", dir.path / "cfg.json", {"--resume", (dir.path / "half.bin").string()}), 0);
    EXPECT_EQ(slurp(dir.path / "full/checkpoint.bin"), slurp(dir.path / "split/checkpoint.bin"));
    EXPECT_EQ(slurp(dir.path / "full/loss_log.csv"), slurp(dir.path / "split/loss_log.csv"));
}

TEST_F(Cli, ValidationFailuresReturnNonzero)
{
    std::string err;
    EXPECT_NE(run({"generate", "--template", "octopus", "--shots", "2", "--out", (dir.path / "g1").string()}, &err), 0);
    EXPECT_NE(err.find("octopus"), std::string::npos);
    EXPECT_NE(run({"generate", "--template", "sphere-1-bone", "--shots", "0", "--out", (dir.path / "g2").string()}), 0);
    EXPECT_NE(run({"generate", "--template", "sphere-1-bone", "--shots", "2", "--out", bench().string()}), 0);
    EXPECT_NE(run({"generate", "--template", "sphere-1-bone", "--shots", "2", "--layout", "spiral", "--out", (dir.path / "g3").string()}),
              0);
    EXPECT_NE(run({"generate", "--shots", "2", "--out", (dir.path / "g4").string()}), 0);
    EXPECT_NE(run({}), 0);
    EXPECT_NE(run({"frobnicate"}), 0);

    write_config(dir.path / "typo.json", R"({"iteratons": 8})");
    EXPECT_NE(fit(dir.path / "f1", dir.path / "typo.json"), 0);
    write_config(dir.path / "neg.json", R"({"iterations": -1})");
    EXPECT_NE(fit(dir.path / "f2", dir.path / "neg.json"), 0);
    write_config(dir.path / "three.json", R"({"shots": 3, "iterations": 2, "grid_resolution": 12})");
    EXPECT_NE(fit(dir.path / "f3", dir.path / "three.json"), 0);
    // Guidance without a benchmark description to rebuild the oracle from.
    fs::create_directories(dir.path / "loose");
    fs::copy(shots(), dir.path / "loose/shots", fs::copy_options::recursive);
    EXPECT_NE(run({"fit", "--config", (dir.path / "cfg.json").string(), "--shots", (dir.path / "loose/shots").string(), "--template",
                   rig().string(), "--out", (dir.path / "f4").string()},
                  &err),
              0);
    EXPECT_NE(err.find("benchmark.json"), std::string::npos);
    std::ofstream(dir.path / "garbage.bin") << "not a checkpoint";
    EXPECT_NE(fit(dir.path / "f5", dir.path / "cfg.json", {"--resume", (dir.path / "garbage.bin").string()}), 0);
    std::ofstream(shots() / "1/pose.txt") << "0 0 0\n";
    EXPECT_NE(fit(dir.path / "f6", dir.path / "cfg.json"), 0);

    const std::string cam = (bench() / "eval/0/camera.txt").string();
    EXPECT_NE(run({"render", "--checkpoint", (dir.path / "garbage.bin").string(), "--template", rig().string(), "--camera", cam, "--out",
                   (dir.path / "r.png").string()}),
              0);
    EXPECT_NE(run({"eval", "--checkpoint", (dir.path / "garbage.bin").string(), "--template", rig().string(), "--benchmark",
                   dir.path.string(), "--out", (dir.path / "ev").string()}),
              0);
}

TEST_F(Cli, AnimateAndRenderRejectBadPoses)
{
    write_config(dir.path / "zero.json", R"({"iterations": 1, "grid_resolution": 12, "lambda_sds": 0})");
    ASSERT_EQ(fit(dir.path / "f", dir.path / "zero.json"), 0);
    const std::string ck = (dir.path / "f/checkpoint.bin").string(), cam = (bench() / "eval/0/camera.txt").string();
    std::ofstream(dir.path / "empty.txt") << "# nothing\n";
    EXPECT_NE(run({"animate", "--checkpoint", ck, "--template", rig().string(), "--poses", (dir.path / "empty.txt").string(), "--camera",
                   cam, "--out", (dir.path / "a").string()}),
              0);
    std::ofstream(dir.path / "short.txt") << "0 0 0 0 0 0\n";
    EXPECT_NE(run({"animate", "--checkpoint", ck, "--template", rig().string(), "--poses", (dir.path / "short.txt").string(), "--camera",
                   cam, "--out", (dir.path / "a").string()}),
              0);
    std::ofstream(dir.path / "two.txt") << "0 0 0 0 0 0 0 0 0 0\n0 0 0 0 0 0 0 0 0 0\n";
    EXPECT_NE(run({"render", "--checkpoint", ck, "--template", rig().string(), "--camera", cam, "--pose", (dir.path / "two.txt").string(),
                   "--out", (dir.path / "r.png").string()}),
              0);
    std::ofstream(dir.path / "badcam.txt") << "{\"width\": 3}";
    EXPECT_NE(run({"render", "--checkpoint", ck, "--template", rig().string(), "--camera", (dir.path / "badcam.txt").string(), "--out",
                   (dir.path / "r.png").string()}),
              0);
}

}  // namespace
