#include <filesystem>
#include <gtest/gtest.h>
#include <vector>

#include "cli.hpp"
#include "qfedtd/io_util.hpp"
#include "qfedtd/plot.hpp"

namespace fs = std::filesystem;

namespace {

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "qfedtd");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return qfedtd::cli_main(static_cast<int>(argv.size()), argv.data());
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("qfedtd_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, MissingConfigIsValidationError) {
  EXPECT_EQ(run_cli({"run", "--config", (dir_ / "missing.toml").string()}), 1);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run_cli({}), 1);
  EXPECT_EQ(run_cli({"launch"}), 1);
  EXPECT_EQ(run_cli({"run", "--format", "parquet"}), 1);
  EXPECT_EQ(run_cli({"figures", "fig9"}), 1);
  EXPECT_EQ(run_cli({"plot", (dir_ / "none.csv").string()}), 1);
}

TEST_F(CliTest, SweepWritesCsvAndPlotRendersIt) {
  const auto cfg = dir_ / "tiny.toml";
  qfedtd::write_file_atomically(cfg, R"(name = "tiny"
seeds = 3
[model]
n = 6
m = 2
[run]
N = 2
T = 40
alpha = 0.2
bits = 3
[sweep]
p = [0.5, 1.0]
)");
  const auto out = dir_ / "out";
  ASSERT_EQ(run_cli({"sweep", "--config", cfg.string(), "--out", out.string(), "--threads", "2"}), 0);
  const auto csv = qfedtd::read_file(out / "tiny.csv");
  EXPECT_EQ(qfedtd::read_sweep_csv(csv).size(), 2u);
  ASSERT_EQ(run_cli({"plot", (out / "tiny.csv").string()}), 0);
  EXPECT_TRUE(fs::exists(out / "tiny.svg"));

  ASSERT_EQ(run_cli({"sweep", "--config", cfg.string(), "--out", out.string(), "--threads", "1"}), 0);
  EXPECT_EQ(qfedtd::read_file(out / "tiny.csv"), csv);
  ASSERT_EQ(run_cli({"sweep", "--config", cfg.string(), "--out", out.string(), "--seed", "9"}), 0);
  EXPECT_NE(qfedtd::read_file(out / "tiny.csv"), csv);
}

TEST_F(CliTest, RunUsesBaseConfigOnly) {
  const auto cfg = dir_ / "one.toml";
  qfedtd::write_file_atomically(cfg, "name = \"one\"\nseeds = 2\n[run]\nT = 30\n[sweep]\nN = [1, 2]\n");
  ASSERT_EQ(run_cli({"run", "--config", cfg.string(), "--out", dir_.string()}), 0);
  EXPECT_EQ(qfedtd::read_sweep_csv(qfedtd::read_file(dir_ / "one.csv")).size(), 1u);
}

TEST_F(CliTest, VerifyPassesOnDefaultModel) {
  EXPECT_EQ(run_cli({"verify", "--trials", "500", "--out", dir_.string()}), 0);
  EXPECT_TRUE(fs::exists(dir_ / "verify.json"));
}

TEST_F(CliTest, BadConfigValueIsValidationError) {
  const auto cfg = dir_ / "bad.toml";
  qfedtd::write_file_atomically(cfg, "[run]\np = 1.5\n");
  EXPECT_EQ(run_cli({"run", "--config", cfg.string()}), 1);
}
