#include <cstdlib>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "cli_app.hpp"
#include "hadlrr/hsi_io.hpp"
#include "hadlrr/unfolded.hpp"
#include "temp_dir.hpp"

namespace fs = std::filesystem;
using hadlrr::testing::TempDir;
namespace cli = hadlrr::cli;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

double read_auc(const fs::path& roc_csv) {
  std::ifstream f(roc_csv);
  std::string line;
  std::getline(f, line);
  const auto eq = line.find('=');
  return std::stod(line.substr(eq + 1));
}

std::vector<double> read_loss_history(const fs::path& csv) {
  std::ifstream f(csv);
  std::string line;
  std::getline(f, line);
  std::vector<double> out;
  while (std::getline(f, line)) out.push_back(std::stod(line.substr(line.find(',') + 1)));
  return out;
}

class CliTest : public ::testing::Test {
 protected:
  CliTest() : dir_("cli") {}

  void SetUp() override {
    ASSERT_EQ(cli::run({"synth", "--rows", "16", "--cols", "16", "--anomalies", "3",
                        "--anomaly-fraction", "0.015625", "--out", scene().string()}),
              0);
  }

  fs::path scene() const { return dir_ / "scene"; }
  std::string cube() const { return (scene() / "cube.hdr").string(); }
  std::string mask() const { return (scene() / "mask.pgm").string(); }
  std::string out(const std::string& name) const { return (dir_ / name).string(); }

  TempDir dir_;
};

}  // namespace

TEST_F(CliTest, SynthWritesSceneAndManifest) {
  for (const char* f : {"cube.hdr", "cube.raw", "mask.pgm", "manifest.json"})
    EXPECT_TRUE(fs::exists(scene() / f)) << f;
  const std::string manifest = slurp(scene() / "manifest.json");
  EXPECT_NE(manifest.find("\"seed\": 7"), std::string::npos);
  EXPECT_NE(manifest.find("\"command\": \"synth\""), std::string::npos);
  auto cube = hadlrr::load_envi(scene() / "cube.hdr", scene() / "cube.raw");
  EXPECT_EQ(cube.bands(), 30);
  EXPECT_EQ(cube.rows(), 16);
}

TEST_F(CliTest, SynthIsDeterministicPerSeed) {
  ASSERT_EQ(cli::run({"synth", "--rows", "16", "--cols", "16", "--anomalies", "3",
                      "--anomaly-fraction", "0.015625", "--out", out("again")}),
            0);
  EXPECT_EQ(slurp(scene() / "cube.raw"), slurp(dir_ / "again" / "cube.raw"));
  ASSERT_EQ(cli::run({"synth", "--rows", "16", "--cols", "16", "--anomalies", "3",
                      "--anomaly-fraction", "0.015625", "--seed", "8", "--out", out("other")}),
            0);
  EXPECT_NE(slurp(scene() / "cube.raw"), slurp(dir_ / "other" / "cube.raw"));
}

TEST_F(CliTest, SynthAcceptsSparseAnomalyFraction) {
  EXPECT_EQ(cli::run({"synth", "--rows", "100", "--cols", "100", "--anomaly-fraction", "0.0009",
                      "--out", out("sparse")}),
            0);
}

TEST_F(CliTest, GlobalRxDetectsPlantedAnomalies) {
  ASSERT_EQ(cli::run({"detect", "--method", "grx", "--input", cube(), "--mask", mask(), "--out",
                      out("grx")}),
            0);
  EXPECT_GE(read_auc(dir_ / "grx" / "roc.csv"), 0.90);
  EXPECT_TRUE(fs::exists(dir_ / "grx" / "scores.pgm"));
  EXPECT_FALSE(fs::exists(dir_ / "grx" / "trace.csv"));
}

TEST_F(CliTest, MissingMaskSkipsRoc) {
  ASSERT_EQ(cli::run({"detect", "--method", "lrx", "--input", cube(), "--out", out("lrx")}), 0);
  EXPECT_TRUE(fs::exists(dir_ / "lrx" / "scores.csv"));
  EXPECT_FALSE(fs::exists(dir_ / "lrx" / "roc.csv"));
}

TEST_F(CliTest, AdmmDefaultsAreRecorded) {
  ASSERT_EQ(cli::run({"detect", "--method", "lrr-admm", "--input", cube(), "--mask", mask(),
                      "--out", out("admm")}),
            0);
  const std::string manifest = slurp(dir_ / "admm" / "manifest.json");
  for (const char* kv : {"\"lambda1\": 0.5", "\"lambda2\": 1.2e-05", "\"lambda3\": 1e-05",
                         "\"mu\": 1.0", "\"rho\": 1.5", "\"mu-max\": 1000000.0",
                         "\"max-iters\": 100", "\"atoms\": 15"})
    EXPECT_NE(manifest.find(kv), std::string::npos) << kv;
  EXPECT_TRUE(fs::exists(dir_ / "admm" / "trace.csv"));
  EXPECT_GE(read_auc(dir_ / "admm" / "roc.csv"), 0.9);
}

TEST_F(CliTest, TrainImprovesAndCheckpointReproducesDetection) {
  ASSERT_EQ(cli::run({"train", "--input", cube(), "--mask", mask(), "--stages", "5", "--budget",
                      "100", "--atoms", "6", "--out", out("train")}),
            0);
  const auto history = read_loss_history(dir_ / "train" / "loss_history.csv");
  ASSERT_FALSE(history.empty());
  EXPECT_LE(history.back(), history.front());

  const auto model = hadlrr::load_checkpoint(dir_ / "train" / "checkpoint.json");
  EXPECT_EQ(model.depth(), 5);

  ASSERT_EQ(cli::run({"detect", "--method", "lrr-net+", "--checkpoint",
                      (dir_ / "train" / "checkpoint.json").string(), "--input", cube(), "--mask",
                      mask(), "--out", out("reuse")}),
            0);
  EXPECT_EQ(read_auc(dir_ / "train" / "roc.csv"), read_auc(dir_ / "reuse" / "roc.csv"));
  EXPECT_EQ(slurp(dir_ / "train" / "scores.csv"), slurp(dir_ / "reuse" / "scores.csv"));
}

TEST_F(CliTest, TrainRejectsBadStagesAndBudget) {
  EXPECT_EQ(cli::run({"train", "--input", cube(), "--stages", "0", "--out", out("t0")}),
            cli::kExitUsage);
  EXPECT_EQ(cli::run({"train", "--input", cube(), "--stages", "5", "--budget", "19", "--out",
                      out("t1")}),
            cli::kExitUsage);
  EXPECT_FALSE(fs::exists(dir_ / "t0"));
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(cli::run({"detect", "--method", "nope", "--input", cube(), "--out", out("x")}),
            cli::kExitUsage);
  EXPECT_EQ(cli::run({"detect", "--method", "grx", "--input", cube(), "--lambda1", "abc",
                      "--out", out("x")}),
            cli::kExitUsage);
  EXPECT_EQ(cli::run({}), cli::kExitUsage);
  EXPECT_EQ(cli::run({"--help"}), cli::kExitOk);
  EXPECT_EQ(cli::run({"detect", "--method", "grx", "--input", out("missing.hdr"), "--out",
                      out("x")}),
            cli::kExitData);
  EXPECT_EQ(cli::run({"detect", "--method", "grx", "--input", cube(), "--mask",
                      out("missing.pgm"), "--out", out("x")}),
            cli::kExitData);

  // Magnitudes whose squares overflow drive every solver to a numerical abort.
  const auto src = hadlrr::load_envi(scene() / "cube.hdr", scene() / "cube.raw");
  std::vector<double> big = src.data();
  for (double& v : big) v *= 1e200;
  hadlrr::save_envi(hadlrr::HsiCube(src.bands(), src.rows(), src.cols(), big),
                    dir_ / "big.hdr", dir_ / "big.raw");
  for (const char* m : {"grx", "lrr-admm", "lrr-net+"})
    EXPECT_EQ(cli::run({"detect", "--method", m, "--input", out("big.hdr"), "--atoms", "4",
                        "--out", out(std::string("big_") + m)}),
              cli::kExitNumerical)
        << m;
}

TEST_F(CliTest, ReplayIsBitIdentical) {
  ASSERT_EQ(cli::run({"train", "--input", cube(), "--mask", mask(), "--stages", "3", "--budget",
                      "40", "--atoms", "5", "--lambda3", "2e-5", "--out", out("run")}),
            0);
  ASSERT_EQ(cli::run({"replay", (dir_ / "run" / "manifest.json").string(), "--out",
                      out("rerun")}),
            0);
  for (const char* f : {"checkpoint.json", "loss_history.csv", "trace.csv", "scores.csv",
                        "scores.pgm", "roc.csv"})
    EXPECT_EQ(slurp(dir_ / "run" / f), slurp(dir_ / "rerun" / f)) << f;
}

TEST_F(CliTest, EvalMatchesDetect) {
  ASSERT_EQ(cli::run({"detect", "--method", "grx", "--input", cube(), "--mask", mask(), "--out",
                      out("grx")}),
            0);
  ASSERT_EQ(cli::run({"eval", "--scores", (dir_ / "grx" / "scores.csv").string(), "--mask",
                      mask(), "--out", out("eval")}),
            0);
  EXPECT_EQ(slurp(dir_ / "grx" / "roc.csv"), slurp(dir_ / "eval" / "roc.csv"));
}

TEST_F(CliTest, ConfigFileWithFlagAndEnvPrecedence) {
  {
    std::ofstream f(dir_ / "run.toml");
    f << "[detect]\nmethod = \"lrx\"\nw-out = 9\nw-in = 3\n";
  }
  const std::string cfg = (dir_ / "run.toml").string();
  ASSERT_EQ(cli::run({"detect", "--config", cfg, "--input", cube(), "--out", out("c1")}), 0);
  std::string manifest = slurp(dir_ / "c1" / "manifest.json");
  EXPECT_NE(manifest.find("\"method\": \"lrx\""), std::string::npos);
  EXPECT_NE(manifest.find("\"w-out\": 9"), std::string::npos);

  ::setenv("HADLRR_W_OUT", "11", 1);
  ASSERT_EQ(cli::run({"detect", "--config", cfg, "--input", cube(), "--out", out("c2")}), 0);
  ASSERT_EQ(cli::run({"detect", "--config", cfg, "--w-out", "5", "--input", cube(), "--out",
                      out("c3")}),
            0);
  ::unsetenv("HADLRR_W_OUT");
  EXPECT_NE(slurp(dir_ / "c2" / "manifest.json").find("\"w-out\": 11"), std::string::npos);
  EXPECT_NE(slurp(dir_ / "c3" / "manifest.json").find("\"w-out\": 5"), std::string::npos);

  {
    std::ofstream f(dir_ / "bad.toml");
    f << "[detect]\nmethod = \"grx\"\nwindow = 9\n";
  }
  EXPECT_EQ(cli::run({"detect", "--config", (dir_ / "bad.toml").string(), "--input", cube(),
                      "--out", out("c4")}),
            cli::kExitUsage);
}
