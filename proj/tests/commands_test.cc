#include "casualgaze/commands.h"

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <gtest/gtest.h>

#include "casualgaze/demo_service.h"
#include "casualgaze/scene_io.h"
#include "casualgaze/trial_log.h"

namespace casualgaze {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result Invoke(std::vector<std::string> args, const std::string& input = "") {
  args.insert(args.begin(), "casualgaze");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::istringstream in(input);
  std::ostringstream out, err;
  Result r;
  r.code = RunCli(static_cast<int>(argv.size()), argv.data(), in, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("casualgaze_cli_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string operator/(const std::string& name) const {
    return (path_ / name).string();
  }

 private:
  fs::path path_;
};

std::string Slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(ParseProfileMix, Forms) {
  ProfileMix m = ParseProfileMix("normal=0.5,overshoot=0.25,undershoot=0.25");
  EXPECT_EQ(m.normal, 0.5);
  EXPECT_EQ(m.undershoot, 0.25);
  m = ParseProfileMix("0.8,0.1,0.1");
  EXPECT_EQ(m.overshoot, 0.1);
  m = ParseProfileMix("overshoot");
  EXPECT_EQ(m.normal, 0.0);
  EXPECT_EQ(m.overshoot, 1.0);
  EXPECT_THROW(ParseProfileMix("sideways"), Error);
  EXPECT_THROW(ParseProfileMix("0,0,0"), Error);
  EXPECT_THROW(ParseProfileMix("normal=-1,overshoot=2"), Error);
}

TEST(ExitCodeFor, Mapping) {
  EXPECT_EQ(ExitCodeFor(ErrorCode::kInvalidConfig), kExitUsage);
  EXPECT_EQ(ExitCodeFor(ErrorCode::kNotFound), kExitUsage);
  EXPECT_EQ(ExitCodeFor(ErrorCode::kInsufficientData), kExitData);
  EXPECT_EQ(ExitCodeFor(ErrorCode::kParseError), kExitData);
  EXPECT_EQ(ExitCodeFor(ErrorCode::kIo), kExitRuntime);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(Invoke({}).code, kExitUsage);
  EXPECT_EQ(Invoke({"bogus"}).code, kExitUsage);
  EXPECT_EQ(Invoke({"simulate", "--trials", "0"}).code, kExitUsage);
  EXPECT_EQ(Invoke({"simulate", "--trials", "-5"}).code, kExitUsage);
  EXPECT_EQ(Invoke({"evaluate", "--techniques", "magic"}).code, kExitUsage);
  EXPECT_EQ(Invoke({"predict", "--technique", "magic"}).code, kExitUsage);
  EXPECT_EQ(Invoke({"serve", "--port", "70000"}).code, kExitUsage);
  EXPECT_EQ(Invoke({"fit"}).code, kExitUsage);
}

TEST(Cli, MissingSceneNamesThePath) {
  const Result r = Invoke({"evaluate", "--scene", "/no/such/room.json"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("/no/such/room.json"), std::string::npos);
}

TEST(Cli, HelpListsEveryFlag) {
  const std::map<std::string, std::vector<std::string>> flags = {
      {"simulate",
       {"--scene", "--coeffs", "--seed", "--trials", "--profiles",
        "--frame-rate", "--out", "--workers", "--endpoints-per-device"}},
      {"evaluate",
       {"--scene", "--coeffs", "--truth", "--seed", "--trials", "--techniques",
        "--profiles", "--frame-rate", "--out", "--replay", "--workers",
        "--training", "--stability"}},
      {"fit", {"--scene", "--coeffs", "--data", "--out"}},
      {"predict", {"--scene", "--coeffs", "--technique", "--stability"}},
      {"serve",
       {"--scene", "--coeffs", "--address", "--port", "--seed", "--technique",
        "--stability", "--metrics-log"}},
  };
  for (const auto& [cmd, list] : flags) {
    const Result r = Invoke({cmd, "--help"});
    EXPECT_EQ(r.code, kExitOk) << cmd;
    for (const std::string& f : list)
      EXPECT_NE(r.out.find(f), std::string::npos) << cmd << " " << f;
  }
  EXPECT_NE(Invoke({"--help"}).out.find("--config"), std::string::npos);
}

TEST(Cli, SimulateIsDeterministic) {
  TempDir d;
  ASSERT_EQ(Invoke({"simulate", "--trials", "40", "--seed", "9", "--out", d / "a"})
                .code,
            kExitOk);
  ASSERT_EQ(Invoke({"simulate", "--trials", "40", "--seed", "9", "--out", d / "b",
                 "--workers", "4"})
                .code,
            kExitOk);
  EXPECT_EQ(Slurp(d / "a/trials.csv"), Slurp(d / "b/trials.csv"));
  EXPECT_EQ(Slurp(d / "a/streams.csv"), Slurp(d / "b/streams.csv"));
  EXPECT_FALSE(Slurp(d / "a/streams.csv").empty());
  EXPECT_EQ(ReadTrialLog(d / "a").size(), 40u);
}

TEST(Cli, EvaluateIsDeterministic) {
  const std::vector<std::string> base = {
      "evaluate", "--scene", "office10", "--trials", "120", "--training", "300"};
  auto with = [&](std::vector<std::string> extra) {
    auto args = base;
    args.insert(args.end(), extra.begin(), extra.end());
    return args;
  };
  const Result a = Invoke(base);
  const Result b = Invoke(with({"--workers", "3"}));
  ASSERT_EQ(a.code, kExitOk) << a.err;
  EXPECT_EQ(a.out, b.out);
  const json report = json::parse(a.out);
  EXPECT_EQ(report["techniques"].size(), 4u);
  EXPECT_EQ(report["config"]["n_trials"], 120);
  EXPECT_EQ(report["config"]["inputs"]["scene"], "office10");

  TempDir d;
  const Result c = Invoke(with({"--out", d / "r/report.json"}));
  ASSERT_EQ(c.code, kExitOk);
  EXPECT_EQ(Slurp(d / "r/report.json"), a.out);
  EXPECT_EQ(Slurp(d / "r/report.csv").substr(0, 15), "technique,case,");
}

TEST(Cli, EvaluateReplayMatchesGeneratedRun) {
  TempDir d;
  ASSERT_EQ(Invoke({"simulate", "--scene", "living12", "--trials", "60", "--seed",
                 "4", "--out", d / "log"})
                .code,
            kExitOk);
  const std::vector<std::string> common = {"--scene", "living12", "--seed", "4",
                                           "--techniques", "knn,casualgaze"};
  auto args = [&](std::vector<std::string> extra) {
    std::vector<std::string> a{"evaluate"};
    a.insert(a.end(), common.begin(), common.end());
    a.insert(a.end(), extra.begin(), extra.end());
    return a;
  };
  const json live = json::parse(Invoke(args({"--trials", "60"})).out);
  const json replay = json::parse(Invoke(args({"--replay", d / "log"})).out);
  EXPECT_EQ(live["techniques"], replay["techniques"]);
}

TEST(Cli, EvaluateTechniqueSubset) {
  const Result r =
      Invoke({"evaluate", "--scene", "office10", "--trials", "30", "--techniques",
           "precise,knn"});
  ASSERT_EQ(r.code, kExitOk);
  const json j = json::parse(r.out);
  EXPECT_EQ(j["techniques"].size(), 2u);
  EXPECT_TRUE(j["techniques"].contains("precise"));
}

TEST(Cli, ConfigFileSuppliesDefaults) {
  TempDir d;
  std::ofstream(d / "run.toml") << "[evaluate]\nscene = \"office10\"\n"
                                   "trials = 25\ntechniques = [\"knn\"]\n";
  const Result r = Invoke({"--config", d / "run.toml", "evaluate"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["config"]["n_trials"], 25);
  // Flags beat the file.
  const Result f =
      Invoke({"--config", d / "run.toml", "evaluate", "--trials", "30"});
  EXPECT_EQ(json::parse(f.out)["config"]["n_trials"], 30);
}

TEST(Cli, FitRoundTrip) {
  TempDir d;
  ASSERT_EQ(Invoke({"simulate", "--scene", "study1_pairs", "--trials", "1",
                 "--endpoints-per-device", "400", "--out", d / "sim"})
                .code,
            kExitOk);
  const Result fitted =
      Invoke({"fit", "--scene", "study1_pairs", "--data", d / "sim/endpoints.csv",
           "--out", d / "coeffs.json"});
  ASSERT_EQ(fitted.code, kExitOk) << fitted.err;
  EXPECT_NE(fitted.err.find("paired conditions"), std::string::npos);
  const CoefficientSet set = LoadCoefficients(d / "coeffs.json");
  EXPECT_NEAR(set.coeffs.mean_shift.phi.a, 0.15, 0.05);
  EXPECT_FALSE(set.device_models.empty());

  // Predictions with the written file equal predictions with the fit printed
  // to stdout.
  const Result printed = Invoke({"fit", "--scene", "study1_pairs", "--data",
                              d / "sim/endpoints.csv"});
  std::ofstream(d / "printed.json") << printed.out;
  std::ostringstream stream;
  WriteStreamHeader(stream, false);
  for (int i = 1; i <= 30; ++i) {
    StreamRecord r;
    r.t = 0.04 * i;
    r.gaze_dir = ToDirection(Angular{-15.0 + i, 2.0});
    r.eye_pos = Vec3d(0, 1.2, 0);
    r.head_pos = r.eye_pos;
    WriteStreamRecord(stream, r);
  }
  const Result p1 = Invoke({"predict", "--scene", "study1_pairs", "--coeffs",
                         d / "coeffs.json"},
                        stream.str());
  const Result p2 = Invoke({"predict", "--scene", "study1_pairs", "--coeffs",
                         d / "printed.json"},
                        stream.str());
  ASSERT_EQ(p1.code, kExitOk);
  EXPECT_EQ(p1.out, p2.out);
  const Result ps = Invoke({"predict", "--scene", "study1_pairs", "--coeffs",
                         d / "coeffs.json", "--technique", "specific"},
                        stream.str());
  EXPECT_EQ(ps.code, kExitOk);
}

TEST(Cli, FitDataErrors) {
  TempDir d;
  std::ofstream(d / "empty.csv")
      << "trial_id,target_id,gaze_phi,gaze_theta,timestamp_ms\n";
  EXPECT_EQ(Invoke({"fit", "--scene", "study1_pairs", "--data", d / "empty.csv"})
                .code,
            kExitData);
  std::ofstream(d / "bad.csv") << "1,2,x,0,0\n";
  EXPECT_EQ(
      Invoke({"fit", "--scene", "study1_pairs", "--data", d / "bad.csv"}).code,
      kExitData);
}

TEST(Cli, PredictMatchesReplay) {
  TempDir d;
  ASSERT_EQ(Invoke({"simulate", "--scene", "office20", "--trials", "8", "--out",
                 d / "log"})
                .code,
            kExitOk);
  const Result r = Invoke({"predict", "--scene", "office20"},
                       Slurp(d / "log/streams.csv"));
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(r.err.empty()) << r.err;

  const Scene scene = *BuiltinScene("office20");
  std::vector<json> want;
  for (const TrialRecord& t : ReadTrialLog(d / "log")) {
    const auto preds = Replay(scene, RecognizerConfig{}, t);
    for (size_t i = 0; i < t.samples.size(); ++i) {
      json j = PredictionToJson(preds[i]);
      j["t"] = t.samples[i].t;
      j["trial_id"] = t.trial_id;
      want.push_back(j);
    }
  }
  std::istringstream lines(r.out);
  std::string line;
  size_t k = 0;
  while (std::getline(lines, line)) {
    ASSERT_LT(k, want.size());
    EXPECT_EQ(json::parse(line), want[k++]);
  }
  EXPECT_EQ(k, want.size());
}

TEST(Cli, PredictSkipsBadLines) {
  const std::string good = "0.04,0,0,1,0,1.2,0,0,0,1,0,1.2,0\n";
  const std::string input = good + "garbage\n" + good +
                            "0.08,0,0,1,0,1.2,0,0,0,1,0,1.2,0\n";
  const Result r = Invoke({"predict", "--scene", "office10"}, input);
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 2);
  EXPECT_NE(r.err.find("line 2"), std::string::npos);
  EXPECT_NE(r.err.find("line 3"), std::string::npos);
  EXPECT_EQ(Invoke({"predict"}, "").code, kExitOk);
  EXPECT_EQ(Invoke({"predict", "--technique", "specific"}, good).code, kExitUsage);
}

// Spawns the real binary so that signal handling is exercised end to end.
struct Child {
  pid_t pid = -1;
  FILE* out = nullptr;
};

Child Spawn(const std::vector<std::string>& args) {
  int pipefd[2];
  if (pipe(pipefd) != 0) return {};
  const pid_t pid = fork();
  if (pid == 0) {
    dup2(pipefd[1], STDOUT_FILENO);
    close(pipefd[0]);
    close(pipefd[1]);
    std::vector<char*> argv;
    std::string bin = CASUALGAZE_CLI;
    argv.push_back(bin.data());
    std::vector<std::string> copy = args;
    for (auto& a : copy) argv.push_back(a.data());
    argv.push_back(nullptr);
    execv(bin.c_str(), argv.data());
    _exit(127);
  }
  close(pipefd[1]);
  return {pid, fdopen(pipefd[0], "r")};
}

int Wait(pid_t pid) {
  int status = 0;
  waitpid(pid, &status, 0);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(CliProcess, ServeStopsCleanlyOnSigint) {
  Child c = Spawn({"serve", "--port", "0"});
  ASSERT_GT(c.pid, 0);
  char buf[256] = {0};
  ASSERT_NE(fgets(buf, sizeof buf, c.out), nullptr);
  EXPECT_NE(std::string(buf).find("listening on ws://127.0.0.1:"),
            std::string::npos);
  kill(c.pid, SIGINT);
  EXPECT_EQ(Wait(c.pid), kExitOk);
  fclose(c.out);
}

TEST(CliProcess, ServeBindFailureExitsWithRuntimeError) {
  ServiceConfig cfg;
  cfg.scene = *BuiltinScene("office10");
  DemoServer holder(cfg);
  const unsigned short port = holder.Listen("127.0.0.1", 0);
  Child c = Spawn({"serve", "--port", std::to_string(port)});
  ASSERT_GT(c.pid, 0);
  EXPECT_EQ(Wait(c.pid), kExitRuntime);
  fclose(c.out);
}

}  // namespace
}  // namespace casualgaze
