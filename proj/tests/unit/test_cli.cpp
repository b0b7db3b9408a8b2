#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"

namespace fs = std::filesystem;
using rfmsim::cli::run_cli;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("rfmsim_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name, const std::string& text) const {
    std::ofstream(path / name) << text;
    return (path / name).string();
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int cli(std::vector<std::string> args, std::string* out = nullptr, std::string* err = nullptr) {
  std::ostringstream o, e;
  const int rc = run_cli(args, o, e);
  if (out) *out = o.str();
  if (err) *err = e.str();
  return rc;
}

}  // namespace

TEST(Cli, MalformedConfigExitsWithTwo) {
  TempDir d;
  std::string err;
  const auto cfg = d.file("bad.json", R"({"rfm": {"raaimt": 20}})");
  EXPECT_EQ(cli({"run", "-c", cfg, "-o", d.path.string()}, nullptr, &err), 2);
  EXPECT_NE(err.find("rfm.raaimt"), std::string::npos);
  const auto broken = d.file("broken.json", "{ not json");
  EXPECT_EQ(cli({"run", "-c", broken, "-o", d.path.string()}), 2);
  EXPECT_EQ(cli({"run", "-c", (d.path / "missing.json").string()}), 2);
}

TEST(Cli, UnknownVerbFails) { EXPECT_NE(cli({"explode"}), 0); }

TEST(Cli, RunWritesReportAndTrace) {
  TempDir d;
  const auto cfg = d.file("c.json", R"({"kind": "COVERT", "covert": {"message_bits": 64}})");
  std::string out;
  ASSERT_EQ(cli({"run", "-c", cfg, "-o", (d.path / "a").string(), "--trace"}, &out), 0);
  EXPECT_NE(out.find("accuracy 1"), std::string::npos);
  ASSERT_TRUE(fs::exists(d.path / "a" / "report.json"));
  ASSERT_TRUE(fs::exists(d.path / "a" / "trace.csv"));

  ASSERT_EQ(cli({"run", "-c", cfg, "-o", (d.path / "b").string(), "--trace"}), 0);
  EXPECT_EQ(slurp(d.path / "a" / "report.json"), slurp(d.path / "b" / "report.json"));
  EXPECT_EQ(slurp(d.path / "a" / "trace.csv"), slurp(d.path / "b" / "trace.csv"));

  // A report is accepted as config and reproduces itself.
  ASSERT_EQ(cli({"run", "-c", (d.path / "a" / "report.json").string(), "-o", (d.path / "c").string()}), 0);
  EXPECT_EQ(slurp(d.path / "a" / "report.json"), slurp(d.path / "c" / "report.json"));
}

TEST(Cli, SeedOverride) {
  TempDir d;
  const auto cfg = d.file("c.json", R"({"kind": "COVERT", "covert": {"message_bits": 16}})");
  ASSERT_EQ(cli({"run", "-c", cfg, "-o", d.path.string(), "--seed", "77"}), 0);
  EXPECT_NE(slurp(d.path / "report.json").find("\"seed\": 77"), std::string::npos);
}

TEST(Cli, ValidateModelPrintsTable) {
  TempDir d;
  std::string out;
  ASSERT_EQ(cli({"validate-model", "-o", d.path.string()}, &out), 0);
  EXPECT_NE(out.find("3106/1178"), std::string::npos);
  EXPECT_NE(out.find("2722/1946"), std::string::npos);
}

TEST(Cli, SweepWritesTables) {
  TempDir d;
  const auto cfg = d.file("s.json", R"({"kind": "SWEEP", "sweep": {
      "base": {"kind": "COVERT", "covert": {"message_bits": 32}},
      "grid": {"seed": [1, 2]}}})");
  ASSERT_EQ(cli({"sweep", "-c", cfg, "-o", d.path.string(), "-j", "2"}), 0);
  const auto table = slurp(d.path / "sweep.csv");
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 3);
  EXPECT_TRUE(fs::exists(d.path / "sweep_summary.csv"));
}

TEST(Cli, EmptySweepIsHeaderOnly) {
  TempDir d;
  const auto cfg = d.file("s.json", R"({"kind": "SWEEP", "sweep": {"base": {"kind": "COVERT"}}})");
  ASSERT_EQ(cli({"sweep", "-c", cfg, "-o", d.path.string()}), 0);
  const auto table = slurp(d.path / "sweep.csv");
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 1);
}

TEST(Cli, ProbeFailureExitsWithFour) {
  TempDir d;
  // No REF falls inside the probe's search budget.
  const auto cfg = d.file("c.json", R"({"kind": "COVERT", "timing": {"tREFI": 20000000},
      "covert": {"message_bits": 4, "sync_shortcut": false}})");
  std::string err;
  EXPECT_EQ(cli({"run", "-c", cfg, "-o", d.path.string()}, nullptr, &err), 4);
  EXPECT_NE(err.find("synchronization"), std::string::npos);
}
