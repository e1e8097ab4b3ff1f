#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <sstream>

#include "vv/cli/cli.hpp"
#include "vv/common/fs.hpp"
#include "vv/inference/inference.hpp"

namespace vv {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome vvseg(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("vvseg_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string tiny_config() { return std::string(VV_SOURCE_DIR) + "/configs/tiny.cfg"; }

TEST(Cli, HelpExitsZeroWithUsage) {
  const auto r = vvseg({"--help"});
  EXPECT_EQ(r.code, cli::kExitOk);
  for (const char* sub : {"gen", "sample", "train", "predict", "eval", "baseline", "ablate", "export-ply",
                          "gradcheck"}) {
    EXPECT_NE(r.out.find(sub), std::string::npos) << sub;
  }
  const auto sub = vvseg({"train", "--help"});
  EXPECT_EQ(sub.code, cli::kExitOk);
  EXPECT_NE(sub.out.find("--resume"), std::string::npos);
}

TEST(Cli, UsageErrorsExitOneWithHelp) {
  for (const auto& args : std::vector<std::vector<std::string>>{
           {"frobnicate"}, {}, {"train", "--data", "x"}, {"gen", "--out", "x", "--bogus"},
           {"ablate", "--suite", "colors", "--out", "x"}, {"gen", "--out", "x", "--scenes", "0"}}) {
    const auto r = vvseg(args);
    EXPECT_EQ(r.code, cli::kExitUsage) << (args.empty() ? "(none)" : args.front());
    EXPECT_NE(r.err.find("Usage"), std::string::npos);
  }
  EXPECT_NE(vvseg({"frobnicate"}).err.find("unknown subcommand"), std::string::npos);
}

TEST(Cli, BaselineNeedsExactlyOneLabelSource) {
  const auto r = vvseg({"baseline", "--scene", "s", "--out", "p"});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_EQ(vvseg({"baseline", "--oracle", "--model", "m", "--scene", "s", "--out", "p"}).code,
            cli::kExitUsage);
}

TEST(Cli, RuntimeFailuresExitTwoWithDiagnostic) {
  const auto dir = fresh_dir("runtime");
  const auto r = vvseg({"eval", "--pred", (dir / "missing.vvpred").string(), "--scene",
                        (dir / "missing.vvscn").string(), "--report", (dir / "r.csv").string()});
  EXPECT_EQ(r.code, cli::kExitRuntime);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "r.csv"));
  EXPECT_EQ(vvseg({"gen", "--out", dir.string(), "--set", "scene.size_x=-3"}).code, cli::kExitRuntime);
}

TEST(Cli, LogsResolvedConfigSeedAndUnusedKeys) {
  const auto dir = fresh_dir("logs");
  const auto r = vvseg({"gen", "--config", tiny_config(), "--set", "scene.n_views=4", "--set",
                        "scene.colour=red", "--out", dir.string(), "--seed", "7"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_NE(r.err.find("seed 7"), std::string::npos);
  EXPECT_NE(r.err.find("scene.n_views=4"), std::string::npos);
  EXPECT_NE(r.err.find("not used by this command: "), std::string::npos);
  EXPECT_NE(r.err.find("scene.colour"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "scene_000.vvscn.view003"));
  EXPECT_FALSE(fs::exists(dir / "scene_000.vvscn.view004"));
}

TEST(Cli, GradcheckPasses) {
  const auto r = vvseg({"gradcheck", "--seed", "2"});
  EXPECT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_NE(r.out.find("joint_network_end"), std::string::npos);
}

TEST(Cli, SmokePipelineCompletesUnderTenMinutes) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = fresh_dir("smoke");
  const auto cfg = tiny_config();
  const auto p = [&](const char* name) { return (dir / name).string(); };
  auto ok = [](const Outcome& r) { return r.code == cli::kExitOk; };

  auto r = vvseg({"gen", "--config", cfg, "--out", p("scenes"), "--scenes", "2", "--seed", "1"});
  ASSERT_TRUE(ok(r)) << r.err;
  r = vvseg({"sample", "--config", cfg, "--scenes", p("scenes/scenes.manifest"), "--out",
             p("data/train.manifest"), "--per-scene", "8"});
  ASSERT_TRUE(ok(r)) << r.err;
  r = vvseg({"train", "--config", cfg, "--data", p("data/train.manifest"), "--out", p("run"), "--set",
             "train.max_iterations=200"});
  ASSERT_TRUE(ok(r)) << r.err;
  EXPECT_NE(r.out.find("at iteration 200"), std::string::npos);
  const auto metrics = read_file(dir / "run/metrics.csv");
  EXPECT_EQ(metrics.substr(0, metrics.find('\n')), "iteration,batch_loss,proxy_loss,lr,wall_clock_s");
  r = vvseg({"predict", "--model", p("run/checkpoint.vvckpt"), "--scene", p("scenes/scene_001.vvscn"),
             "--out", p("pred.vvpred")});
  ASSERT_TRUE(ok(r)) << r.err;
  EXPECT_NE(r.out.find("784 columns predicted"), std::string::npos);
  r = vvseg({"eval", "--pred", p("pred.vvpred"), "--scene", p("scenes/scene_001.vvscn"), "--report",
             p("report.csv")});
  ASSERT_TRUE(ok(r)) << r.err;
  const auto report = read_file(dir / "report.csv");
  EXPECT_EQ(report.substr(0, report.find('\n')), "metric,value");
  EXPECT_NE(report.find("accuracy_cube_a,"), std::string::npos);

  r = vvseg({"baseline", "--model", p("run/checkpoint.vvckpt"), "--scene", p("scenes/scene_001.vvscn"),
             "--out", p("base.vvpred"), "--views", "1"});
  ASSERT_TRUE(ok(r)) << r.err;
  r = vvseg({"export-ply", "--scene", p("scenes/scene_001.vvscn"), "--pred", p("pred.vvpred"), "--out",
             p("pred.ply")});
  ASSERT_TRUE(ok(r)) << r.err;
  EXPECT_EQ(read_file(dir / "pred.ply").substr(0, 4), "ply\n");

  const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
  EXPECT_LT(dt.count(), 600.0);
}

TEST(Cli, ResumeContinuesToTheSameWeights) {
  const auto dir = fresh_dir("resume");
  const auto cfg = tiny_config();
  const auto p = [&](const char* name) { return (dir / name).string(); };
  ASSERT_EQ(vvseg({"gen", "--config", cfg, "--out", p("scenes"), "--set", "scene.n_views=6"}).code, 0);
  ASSERT_EQ(vvseg({"sample", "--config", cfg, "--scenes", p("scenes/scenes.manifest"), "--out",
                   p("train.manifest"), "--per-scene", "2", "--set", "sample.rotations=2"})
                .code,
            0);
  const std::vector<std::string> common{"--config", cfg, "--data", p("train.manifest"), "--set",
                                        "train.eval_every=5"};
  auto with = [&](std::vector<std::string> extra) {
    std::vector<std::string> a{"train"};
    a.insert(a.end(), common.begin(), common.end());
    a.insert(a.end(), extra.begin(), extra.end());
    return vvseg(a);
  };
  ASSERT_EQ(with({"--out", p("full"), "--set", "train.max_iterations=10"}).code, 0);
  ASSERT_EQ(with({"--out", p("half"), "--set", "train.max_iterations=5"}).code, 0);
  const auto r = with({"--out", p("rest"), "--set", "train.max_iterations=10", "--resume",
                       p("half/checkpoint.vvckpt")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_file(dir / "full/checkpoint.vvckpt"), read_file(dir / "rest/checkpoint.vvckpt"));
}

TEST(Cli, AblateRunsTheSuiteVariantsDeterministically) {
  const auto dir = fresh_dir("ablate");
  const std::vector<std::string> args{
      "ablate", "--config", tiny_config(), "--suite", "views", "--set", "train.max_iterations=4",
      "--set", "bench.train_scenes=1", "--set", "bench.samples_per_scene=4", "--set",
      "bench.test_scenes=1", "--set", "scene.n_views=6", "--threads", "2", "--out"};
  auto a = args;
  a.push_back((dir / "a").string());
  auto b = args;
  b.push_back((dir / "b").string());
  const auto ra = vvseg(a);
  ASSERT_EQ(ra.code, cli::kExitOk) << ra.err;
  ASSERT_EQ(vvseg(b).code, cli::kExitOk);
  const auto csv = read_file(dir / "a/views.csv");
  EXPECT_EQ(csv, read_file(dir / "b/views.csv"));
  std::vector<std::string> names;
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line.rfind("variant,status,mean_accuracy,", 0), 0u);
  while (std::getline(lines, line)) names.push_back(line.substr(0, line.find(',')));
  EXPECT_EQ(names, (std::vector<std::string>{"1_views", "3_views", "5_views"}));
}

}  // namespace
}  // namespace vv
