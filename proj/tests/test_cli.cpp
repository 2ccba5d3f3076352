// Runs the beltrami_lab binary and checks exit codes and outputs.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

const fs::path kLab = BELTRAMI_LAB_PATH;
const fs::path kScenarios = BELTRAMI_SCENARIO_DIR;

fs::path scratch(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("beltrami_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int lab(const std::string& args, const fs::path& log) {
  const std::string cmd = "'" + kLab.string() + "' " + args + " > '" + log.string() + "' 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

}  // namespace

TEST(Cli, UsageErrorsExitOne) {
  const auto d = scratch("usage");
  EXPECT_EQ(lab("", d / "log"), 1);
  EXPECT_EQ(lab("frobnicate", d / "log"), 1);
  EXPECT_EQ(lab("check only_field.csv", d / "log"), 1);
  EXPECT_EQ(lab("--help", d / "log"), 0);
}

TEST(Cli, RunBundledScenarioAndRerunIdentically) {
  const auto d = scratch("run");
  ASSERT_EQ(lab("run '" + (kScenarios / "abc-residual.json").string() + "' --out '" + (d / "a").string() + "'", d / "log"), 0)
      << slurp(d / "log");
  ASSERT_EQ(lab("run '" + (kScenarios / "abc-residual.json").string() + "' --out '" + (d / "b").string() + "'", d / "log"), 0);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(d / "a" / "abc-residual")) {
    EXPECT_EQ(slurp(e.path()), slurp(d / "b" / "abc-residual" / e.path().filename())) << e.path();
    ++files;
  }
  EXPECT_GE(files, 5u);
}

TEST(Cli, OutputRootFromEnvironment) {
  const auto d = scratch("env");
  const std::string cmd =
      "BELTRAMI_OUT='" + (d / "env").string() + "' '" + kLab.string() + "' run '" + (kScenarios / "compatibility.json").string() + "' > /dev/null 2>&1";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(d / "env" / "compatibility" / "manifest.json"));
}

TEST(Cli, ScenarioExitCodes) {
  const auto d = scratch("codes");
  const std::string base = R"({"name": "x", "seed": 1, "stages": [
      {"id": "abc", "op": "generate", "family": "abc", "n": 12},
      {"id": "res", "op": "diagnose", "check": "beltrami-residual", "field": "abc", "max": {"curl_minus_fu": LIMIT}}]})";
  auto with = [&](const std::string& limit) {
    auto s = base;
    s.replace(s.find("LIMIT"), 5, limit);
    return s;
  };
  write(d / "ok.json", with("10"));
  write(d / "viol.json", with("1e-9"));
  write(d / "cyclic.json", R"({"name": "c", "stages": [
      {"id": "res", "op": "diagnose", "check": "beltrami-residual", "field": "abc"},
      {"id": "abc", "op": "generate", "family": "abc", "n": 12}]})");
  write(d / "unknown.json", R"({"name": "u", "stages": [{"id": "abc", "op": "generate", "family": "abc", "grid": 12}]})");
  write(d / "num.json", R"({"name": "n", "stages": [
      {"id": "ring", "op": "solve", "kind": "vortex-ring", "gamma": 0.5, "l": 2, "box": 4, "h": 0.16},
      {"id": "level", "op": "extract", "source": "ring", "level_fraction": 0.4, "samples": 32},
      {"id": "chart", "op": "evolve-chart", "curves": "level", "sweep_fraction": 0.3, "steps": 10, "tol_flow": 1e-16}]})");
  const std::string out = " --out '" + (d / "out").string() + "'";
  EXPECT_EQ(lab("run '" + (d / "ok.json").string() + "'" + out, d / "log"), 0);
  EXPECT_EQ(lab("run '" + (d / "viol.json").string() + "'" + out, d / "log"), 3);
  EXPECT_NE(slurp(d / "log").find("curl_minus_fu"), std::string::npos);
  EXPECT_EQ(lab("run '" + (d / "cyclic.json").string() + "'" + out, d / "log"), 1);
  EXPECT_NE(slurp(d / "log").find("cyclic or forward reference"), std::string::npos);
  EXPECT_EQ(lab("run '" + (d / "unknown.json").string() + "'" + out, d / "log"), 1);
  EXPECT_NE(slurp(d / "log").find("unknown key 'grid'"), std::string::npos);
  EXPECT_EQ(lab("run '" + (d / "num.json").string() + "'" + out, d / "log"), 2);
  EXPECT_EQ(lab("run '" + (d / "absent.json").string() + "'" + out, d / "log"), 1);
}

TEST(Cli, GenerateCheckAndRender) {
  const auto d = scratch("gen");
  ASSERT_EQ(lab("generate abc --n 16 --name abc --out '" + d.string() + "'", d / "log"), 0) << slurp(d / "log");
  ASSERT_TRUE(fs::exists(d / "abc_u.csv"));
  ASSERT_TRUE(fs::exists(d / "abc_f.json"));
  const std::string chk = "check '" + (d / "abc_u.csv").string() + "' --factor '" + (d / "abc_f.json").string() + "'";
  EXPECT_EQ(lab(chk, d / "log"), 0);
  EXPECT_NE(slurp(d / "log").find("curl_minus_fu"), std::string::npos);
  EXPECT_EQ(lab(chk + " --max 10", d / "log"), 0);
  EXPECT_EQ(lab(chk + " --max 1e-12", d / "log"), 3);
  EXPECT_EQ(lab("check '" + (d / "abc_u.csv").string() + "' --factor '" + (d / "none.json").string() + "'", d / "log"), 1);
  EXPECT_EQ(lab("generate hopf --out '" + d.string() + "'", d / "log"), 1);

  // Other generator families are reachable through the same subcommand.
  ASSERT_EQ(lab("generate rotated-harmonic --n 24 --nz 5 --name rh --out '" + d.string() + "'", d / "log"), 0) << slurp(d / "log");

  // Render a ring stream function twice: identical bytes.
  const auto run = d / "ring";
  write(d / "ring.json", R"({"name": "ring", "stages": [
      {"id": "ring", "op": "solve", "kind": "vortex-ring", "gamma": 0.5, "l": 2, "box": 4, "h": 0.16}]})");
  ASSERT_EQ(lab("run '" + (d / "ring.json").string() + "' --out '" + run.string() + "'", d / "log"), 0);
  const auto psi = run / "ring" / "ring_psi.csv";
  ASSERT_EQ(lab("render '" + psi.string() + "' -o '" + (d / "a.svg").string() + "' --contour 0.01", d / "log"), 0) << slurp(d / "log");
  ASSERT_EQ(lab("render '" + psi.string() + "' -o '" + (d / "b.svg").string() + "' --contour 0.01", d / "log"), 0);
  const auto svg = slurp(d / "a.svg");
  EXPECT_EQ(svg, slurp(d / "b.svg"));
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  // Report with a residual history renders as a line plot.
  EXPECT_EQ(lab("render '" + (run / "ring" / "ring_report.json").string() + "' -o '" + (d / "h.svg").string() + "'", d / "log"), 0)
      << slurp(d / "log");
  EXPECT_NE(slurp(d / "h.svg").find("<polyline"), std::string::npos);
  EXPECT_EQ(lab("render '" + (d / "abc_f.json").string() + "' -o '" + (d / "x.svg").string() + "'", d / "log"), 1);
  EXPECT_EQ(lab("render '" + (d / "abc_u.csv").string() + "' -o '" + (d / "x.svg").string() + "'", d / "log"), 1);
}
