#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "kflow/cli.hpp"

using namespace kflow;
namespace fs = std::filesystem;

namespace {

struct Invocation {
  int status = -1;
  std::string log;
};

Invocation invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "kflow");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream log;
  Invocation r;
  r.status = dispatch(static_cast<int>(argv.size()), argv.data(), log);
  r.log = log.str();
  return r;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = fs::temp_directory_path() / ("kflow-test-" + tag + "-" + std::to_string(::getpid()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  std::string file(const std::string& name, const std::string& content) const {
    std::ofstream(path_ / name) << content;
    return (path_ / name).string();
  }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

const char* kReferenceConfig = R"({"name": "ref", "initial": {"family": "legendre2", "amplitude": 0.0}, "end_time": 1.0})";

}  // namespace

TEST(Cli, UnknownCommandPrintsUsage) {
  const Invocation r = invoke({"frobnicate"});
  EXPECT_EQ(r.status, kExitConfig);
  EXPECT_NE(r.log.find("usage:"), std::string::npos);
  EXPECT_NE(r.log.find("cli/dispatch"), std::string::npos);
  EXPECT_EQ(invoke({}).status, kExitConfig);
  EXPECT_EQ(invoke({"run", "--no-such-flag"}).status, kExitConfig);
}

TEST(Cli, HelpExitsCleanly) {
  const Invocation r = invoke({"--help"});
  EXPECT_EQ(r.status, kExitPass);
  EXPECT_NE(r.log.find("report"), std::string::npos);
}

TEST(Cli, InvertedStepBoundsNameTheFields) {
  TempDir d("steps");
  const auto cfg = d.file("bad.json", R"({"dt_min": 1.0, "dt_max": 0.1})");
  const Invocation r = invoke({"run", "-c", cfg, "-o", (d.path() / "out").string()});
  EXPECT_EQ(r.status, kExitConfig);
  EXPECT_NE(r.log.find("dt_min"), std::string::npos);
  EXPECT_NE(r.log.find("dt_max"), std::string::npos);
  EXPECT_NE(r.log.find("flow/config"), std::string::npos);
}

TEST(Cli, RejectsUnknownKeysWrongTypesAndMissingFiles) {
  TempDir d("schema");
  const auto out = (d.path() / "out").string();
  Invocation r = invoke({"run", "-c", d.file("a.json", R"({"initial": {"famly": "legendre2"}})"), "-o", out});
  EXPECT_EQ(r.status, kExitConfig);
  EXPECT_NE(r.log.find("initial.famly"), std::string::npos);
  r = invoke({"run", "-c", d.file("b.json", R"({"nodes": "many"})"), "-o", out});
  EXPECT_EQ(r.status, kExitConfig);
  EXPECT_NE(r.log.find("'nodes'"), std::string::npos);
  r = invoke({"run", "-c", d.file("c.json", "{not json"), "-o", out});
  EXPECT_EQ(r.status, kExitConfig);
  r = invoke({"run", "-c", (d.path() / "missing.json").string(), "-o", out});
  EXPECT_EQ(r.status, kExitConfig);
}

TEST(Cli, RunWritesOrderedTraceAndCheckpoints) {
  TempDir d("run");
  const auto cfg = d.file("ref.json", R"({"name": "ref", "initial": {"family": "legendre2", "amplitude": 0.0},
                                          "end_time": 1.0, "checkpoints": [0.5]})");
  const Invocation r = invoke({"run", "-c", cfg, "-o", (d.path() / "out").string(), "-q"});
  ASSERT_EQ(r.status, kExitPass) << r.log;
  const std::string csv = slurp(d.path() / "out" / "trace.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "t,Y,b,c,M,u_c0,grad_u_c0,grad_u_l2,Rn_c0,Rn_l2,lambda,mu,noncollapse,futaki");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 12);
  EXPECT_TRUE(fs::exists(d.path() / "out" / "checkpoint_t0.500.json"));
  const Json run = Json::parse(slurp(d.path() / "out" / "run.json"));
  EXPECT_TRUE(run["passed"].get<bool>());
}

TEST(Cli, NumericalFailureExitsThree) {
  TempDir d("fail");
  const auto cfg = d.file("f.json", R"({"end_time": 0.5, "tolerance": 1e-30, "dt_min": 1e-3, "dt_init": 1e-2})");
  const Invocation r = invoke({"run", "-c", cfg, "-o", (d.path() / "out").string()});
  EXPECT_EQ(r.status, kExitNumerical);
  EXPECT_NE(r.log.find("flow/"), std::string::npos) << r.log;
}

TEST(Cli, OutputDirectoryPrecedence) {
  TempDir d("env");
  const auto cfg = d.file("ref.json", kReferenceConfig);
  ::setenv("KFLOW_OUTPUT_DIR", (d.path() / "from-env").c_str(), 1);
  EXPECT_EQ(invoke({"run", "-c", cfg, "-q"}).status, kExitPass);
  EXPECT_TRUE(fs::exists(d.path() / "from-env" / "trace.csv"));
  EXPECT_EQ(invoke({"run", "-c", cfg, "-q", "-o", (d.path() / "from-flag").string()}).status, kExitPass);
  EXPECT_TRUE(fs::exists(d.path() / "from-flag" / "trace.csv"));
  ::unsetenv("KFLOW_OUTPUT_DIR");
}

TEST(Cli, UnwritableOutputIsAConfigError) {
  TempDir d("ro");
  const auto cfg = d.file("ref.json", kReferenceConfig);
  const auto blocker = d.file("blocker", "x");
  EXPECT_EQ(invoke({"run", "-c", cfg, "-o", blocker + "/sub"}).status, kExitConfig);
}

TEST(Cli, ReportOnShippedDefaultPassesEveryCheck) {
  TempDir d("report");
  const auto out = d.path() / "out";
  const Invocation r = invoke({"report", "-c", KFLOW_SOURCE_DIR "/configs/default.json", "-o", out.string(), "-q"});
  ASSERT_EQ(r.status, kExitPass) << r.log;
  const Json rep = Json::parse(slurp(out / "report.json"));
  EXPECT_TRUE(rep["passed"].get<bool>());
  for (const auto& c : rep["checks"]) EXPECT_TRUE(c["passed"].get<bool>()) << c["name"];
  for (const char* f : {"summary.txt", "Y.svg", "spectra.svg", "R_profiles.svg", "trace.csv"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
}

TEST(Cli, IdenticalInputsGiveIdenticalReports) {
  TempDir d("det");
  const auto cfg = d.file("g.json", R"({"initial": {"family": "random", "target_u_c0": 0.05}, "end_time": 2.0})");
  ASSERT_EQ(invoke({"report", "-c", cfg, "--seed", "4", "-o", (d.path() / "a").string(), "-q"}).status, kExitCheckFailed);
  ASSERT_EQ(invoke({"report", "-c", cfg, "--seed", "4", "-o", (d.path() / "b").string(), "-q"}).status, kExitCheckFailed);
  ASSERT_EQ(invoke({"report", "-c", cfg, "--seed", "5", "-o", (d.path() / "c").string(), "-q"}).status, kExitCheckFailed);
  EXPECT_EQ(slurp(d.path() / "a" / "report.json"), slurp(d.path() / "b" / "report.json"));
  EXPECT_EQ(slurp(d.path() / "a" / "trace.csv"), slurp(d.path() / "b" / "trace.csv"));
  EXPECT_NE(slurp(d.path() / "a" / "trace.csv"), slurp(d.path() / "c" / "trace.csv"));
}

TEST(Cli, SpectrumAndSmoothingCommands) {
  TempDir d("spec");
  const auto out = d.path() / "out";
  ASSERT_EQ(invoke({"spectrum", "-o", out.string(), "-q"}).status, kExitPass);
  const Json s = Json::parse(slurp(out / "spectrum.json"));
  EXPECT_EQ(s["vector_laplacian"]["kernel_dimension"].get<int>(), 3);
  EXPECT_EQ(s["poincare"]["kernel_dimension"].get<int>(), 1);
  const auto cfg = d.file("sm.json", R"({"smoothing": {"epsilons": [0.01, 0.005]}})");
  ASSERT_EQ(invoke({"smoothing", "-c", cfg, "-o", out.string(), "-q"}).status, kExitPass);
  const Json sm = Json::parse(slurp(out / "smoothing.json"));
  EXPECT_EQ(sm["cases"].size(), 2u);
  EXPECT_TRUE(sm["passed"].get<bool>());
}

TEST(Config, SweepEntriesMergeOverTheBase) {
  const FileConfig fc = parse_config(R"({"nodes": 48, "end_time": 4,
      "sweep": [{"name": "x", "initial": {"family": "legendre3", "target_u_c0": 0.05}}, {"end_time": 2}]})");
  ASSERT_EQ(fc.sweep.size(), 2u);
  EXPECT_EQ(fc.sweep[0].name, "x");
  EXPECT_EQ(fc.sweep[0].nodes, 48);
  EXPECT_EQ(fc.sweep[0].initial.family, "legendre3");
  EXPECT_DOUBLE_EQ(fc.sweep[1].end_time, 2.0);
  EXPECT_EQ(fc.sweep[1].name, "default-1");
  EXPECT_THROW(parse_config(R"({"sweep": {"nodes": 3}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"sweep": [3]})"), ConfigError);
}

TEST(Config, AmplitudeReplacesDefaultTarget) {
  const FileConfig fc = parse_config(R"({"initial": {"amplitude": 0.02}})");
  ASSERT_TRUE(fc.flow.initial.amplitude.has_value());
  EXPECT_FALSE(fc.flow.initial.target_u_c0.has_value());
}

TEST(Io, NumbersAreRoundedAndNonFiniteIsNull) {
  EXPECT_EQ(fixed(0.1 + 0.2).dump(), "0.3");
  EXPECT_TRUE(fixed(NAN).is_null());
  EXPECT_EQ(csv_number(INFINITY), "inf");
}
