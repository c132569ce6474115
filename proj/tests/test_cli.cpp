#include "morphlab/spec_file.hpp"

#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace morphlab;
namespace fs = std::filesystem;

namespace {

const std::string kMinimal = R"([domain]
dim = 2

[map]
components = ["x1", "x2"]
)";

std::size_t error_line(const std::string& text) {
  try {
    parse_spec(text);
  } catch (const SpecError& e) {
    return e.line();
  }
  ADD_FAILURE() << "no SpecError for:\n" << text;
  return 0;
}

fs::path temp_dir() {
  fs::path d = fs::temp_directory_path() / "morphlab_cli_test";
  fs::create_directories(d);
  return d;
}

int run(const std::string& args, const std::string& out = "/dev/null") {
  const std::string cmd = std::string(MORPHLAB_CLI) + " " + args + " > " + out + " 2>/dev/null";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string sample(const char* name) { return std::string(MORPHLAB_SAMPLES) + "/" + name; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(SpecFile, Minimal) {
  MapSpec s = parse_spec(kMinimal, "min.morph");
  EXPECT_EQ(s.map.chart().names(), (std::vector<std::string>{"x1", "x2"}));
  EXPECT_EQ(s.map.name, "min.morph");  // load_spec strips the extension, parse_spec does not
  EXPECT_FALSE(s.expected);
  EXPECT_EQ(s.options.samples, 32u);
  EXPECT_EQ(s.map.chart().box()[0].lo, -2);
}

TEST(SpecFile, ParamsAndWarpedMetric) {
  MapSpec s = load_spec(sample("warped.morph"));
  EXPECT_EQ(s.map.name, "warped-projection");
  ASSERT_TRUE(s.expected);
  EXPECT_TRUE(s.expected->any_ghm);
  EXPECT_EQ(s.map.chart().names(), (std::vector<std::string>{"x", "y", "z"}));
  const double b = std::pow(1 + 2 * 1 + 1, -2) * 3;
  EXPECT_NEAR(eval(s.map.domain.g(2, 2), {{"x", 1}, {"y", 1}, {"z", 0}}), 1 / (b * b), 1e-12);
}

TEST(SpecFile, Aliases) {
  EXPECT_TRUE(parse_expectation("GHM")->matches(Verdict::ProperGHM));
  EXPECT_TRUE(parse_expectation("ghm")->matches(Verdict::HarmonicMorphism));
  EXPECT_FALSE(parse_expectation("ghm")->matches(Verdict::BiharmonicOnly));
  EXPECT_TRUE(parse_expectation("hm")->matches(Verdict::HarmonicMorphism));
  EXPECT_FALSE(parse_expectation("proper")->matches(Verdict::HarmonicMorphism));
  EXPECT_TRUE(parse_expectation("BiharmonicHWC_notGHM")->matches(Verdict::BiharmonicHWC_notGHM));
  EXPECT_FALSE(parse_expectation("maybe"));
}

TEST(SpecFile, ErrorsCarryLineNumbers) {
  EXPECT_EQ(error_line(kMinimal + "colour = red\n"), 6u);
  EXPECT_EQ(error_line("[domain]\ndim = 2\n[map]\ncomponents = [\"x1 +\", \"x2\"]\n"), 4u);
  EXPECT_EQ(error_line("[domain]\ndim = 2\n\n[stuff]\na = 1\n"), 4u);
  EXPECT_EQ(error_line("[domain]\ndim = 2\nbox = [[0, 1]]\n[map]\ncomponents = [\"x1\"]\n"), 3u);
  EXPECT_EQ(error_line("[domain]\ndim = 2\n[map]\ncomponents = [\"x1\"]\nexpected_verdict = sure\n"), 5u);
  EXPECT_EQ(error_line("[domain]\ndim = 2\n[map]\ncomponents = [\"y\"]\n"), 4u);
  EXPECT_EQ(error_line("[domain]\ndim = 2\ndim = 3\n[map]\ncomponents = [\"x1\"]\n"), 3u);
}

TEST(SpecFile, MissingFile) {
  try {
    load_spec("/nonexistent/x.morph");
    FAIL();
  } catch (const SpecError& e) {
    EXPECT_EQ(std::string(e.what()), "/nonexistent/x.morph:0: cannot open file");
  }
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run("check " + sample("ex1.morph")), 0);
  EXPECT_EQ(run("check " + sample("identity2.morph")), 0);
  EXPECT_EQ(run("check " + sample("bfo.morph")), 0);
  EXPECT_EQ(run("check " + sample("bfo.morph") + " --expect ghm"), 1);
  EXPECT_EQ(run("check /nonexistent.morph"), 2);
  EXPECT_EQ(run("catalog no-such-map"), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("warped --family S2 --C 1 --C1 1 --C2 0 --expect ghm"), 0);
  EXPECT_EQ(run("warped --beta \"exp(x^2)\" --expect ghm"), 1);
}

TEST(Cli, BadSpecReportsLine) {
  const fs::path p = temp_dir() / "bad.morph";
  std::ofstream(p) << "[domain]\ndim = 2\n[map]\ncomponents = [\"x1 *\"]\n";
  const fs::path err = temp_dir() / "bad.err";
  const std::string cmd = std::string(MORPHLAB_CLI) + " check " + p.string() + " > /dev/null 2> " + err.string();
  const int st = std::system(cmd.c_str());
  EXPECT_EQ(WEXITSTATUS(st), 2);
  EXPECT_NE(slurp(err).find("bad.morph:4:"), std::string::npos);
}

TEST(Cli, JsonReport) {
  const fs::path out = temp_dir() / "ex1.json";
  ASSERT_EQ(run("check " + sample("ex1.morph") + " --json -", out.string()), 0);
  auto j = nlohmann::json::parse(slurp(out));
  EXPECT_EQ(j["schema"], 1);
  EXPECT_EQ(j["command"], "check");
  EXPECT_EQ(j["report"]["verdict"], "ProperGHM");
  EXPECT_TRUE(j["verdict_matches"].get<bool>());
}

TEST(Cli, CatalogJsonIsDeterministic) {
  const fs::path a = temp_dir() / "cat_a.json", b = temp_dir() / "cat_b.json";
  ASSERT_EQ(run("catalog ex1 --seed 7 --json -", a.string()), 0);
  ASSERT_EQ(run("catalog ex1 --seed 7 --json -", b.string()), 0);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_EQ(nlohmann::json::parse(slurp(a))["seed"], 7);
}
