#include "casualgaze/commands.h"

#include <pthread.h>
#include <signal.h>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "casualgaze/demo_service.h"
#include "casualgaze/fitting.h"
#include "casualgaze/scene_io.h"
#include "casualgaze/trial_log.h"

namespace casualgaze {

namespace fs = std::filesystem;
using nlohmann::json;

int ExitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound:
    case ErrorCode::kInvalidConfig:
    case ErrorCode::kInvalidProfile:
      return kExitUsage;
    case ErrorCode::kInsufficientData:
    case ErrorCode::kDegenerateDesign:
    case ErrorCode::kParseError:
    case ErrorCode::kSchemaVersionMismatch:
    case ErrorCode::kValidationError:
    case ErrorCode::kEmptyInput:
    case ErrorCode::kLengthMismatch:
    case ErrorCode::kNonMonotonicTimestamp:
      return kExitData;
    default:
      return kExitRuntime;
  }
}

ProfileMix ParseProfileMix(std::string_view text) {
  auto bad = [&](std::string_view why) {
    return Error(ErrorCode::kInvalidProfile,
                 fmt::format("bad profile mix '{}': {}", text, why));
  };
  auto number = [&](std::string_view s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
      throw bad(fmt::format("'{}' is not a number", s));
    return v;
  };

  std::vector<std::string_view> parts;
  for (size_t begin = 0;;) {
    const size_t end = text.find(',', begin);
    parts.push_back(text.substr(begin, end - begin));
    if (end == std::string_view::npos) break;
    begin = end + 1;
  }

  ProfileMix mix{0.0, 0.0, 0.0};
  auto slot = [&](ProfileKind k) -> double& {
    switch (k) {
      case ProfileKind::kOvershootFoldback: return mix.overshoot;
      case ProfileKind::kUndershootThrough: return mix.undershoot;
      default: return mix.normal;
    }
  };
  if (parts.size() == 1 && parts[0].find('=') == std::string_view::npos) {
    const auto kind = ParseProfileKind(parts[0]);
    if (!kind) throw bad("unknown profile name");
    slot(*kind) = 1.0;
  } else if (parts.size() == 3 &&
             text.find('=') == std::string_view::npos) {
    mix = {number(parts[0]), number(parts[1]), number(parts[2])};
  } else {
    for (std::string_view p : parts) {
      const size_t eq = p.find('=');
      if (eq == std::string_view::npos) throw bad("expected name=weight");
      const auto kind = ParseProfileKind(p.substr(0, eq));
      if (!kind) throw bad(fmt::format("unknown profile '{}'", p.substr(0, eq)));
      slot(*kind) = number(p.substr(eq + 1));
    }
  }
  mix.Validate();
  return mix;
}

namespace {

constexpr const char* kDefaultScene = "study2_room";
constexpr const char* kDefaultMix = "normal=0.8,overshoot=0.1,undershoot=0.1";

struct CommonArgs {
  std::string scene = kDefaultScene;
  std::string coeffs;
};

struct SimulateArgs {
  CommonArgs common;
  std::uint64_t seed = 1;
  int trials = 100;
  std::string profiles = kDefaultMix;
  double frame_rate = 25.0;
  std::string out = "casualgaze_sim";
  int workers = 1;
  int endpoints_per_device = 0;
};

struct EvaluateArgs {
  CommonArgs common;
  std::string truth;
  std::uint64_t seed = 1;
  int trials = 2000;
  std::vector<std::string> techniques = {"precise", "knn", "casualgaze",
                                         "specific"};
  std::string profiles = kDefaultMix;
  double frame_rate = 25.0;
  std::string out;
  std::string replay;
  int workers = 1;
  int training = 2000;
  int stability = 3;
};

struct FitArgs {
  CommonArgs common;
  std::string data;
  std::string out;
};

struct PredictArgs {
  CommonArgs common;
  std::string technique = "casualgaze";
  int stability = 3;
};

struct ServeArgs {
  CommonArgs common;
  std::string address = "127.0.0.1";
  int port = 8765;
  std::uint64_t seed = 1;
  std::string technique = "casualgaze";
  int stability = 3;
  std::string metrics_log;
};

void AddCommon(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--scene", a.scene,
                  "Scene file or built-in name (" +
                      fmt::format("{}", fmt::join(BuiltinSceneNames(), ", ")) +
                      ")")
      ->capture_default_str();
  cmd->add_option("--coeffs", a.coeffs,
                  "Coefficient file (built-in defaults when omitted)");
}

Scene LoadSceneArg(const CommonArgs& a, std::ostream& err) {
  std::vector<std::string> warnings;
  Scene scene = ResolveScene(a.scene, &warnings);
  for (const std::string& w : warnings) err << "warning: " << w << '\n';
  return scene;
}

CoefficientSet LoadCoeffsArg(const std::string& path) {
  if (path.empty()) return CoefficientSet{};
  if (!fs::exists(path))
    throw Error(ErrorCode::kNotFound, "coefficient file not found: " + path);
  return LoadCoefficients(path);
}

Technique TechniqueArg(const std::string& name) {
  const auto t = ParseTechnique(name);
  if (!t) throw Error(ErrorCode::kInvalidConfig, "unknown technique " + name);
  return *t;
}

std::vector<std::string> TechniqueNames() {
  std::vector<std::string> names;
  for (Technique t : AllTechniques()) names.emplace_back(TechniqueName(t));
  return names;
}

std::string Fixed(const std::optional<double>& v) {
  return v ? fmt::format("{:.3f}", *v) : std::string("-");
}

void PrintSummaryTable(const ExperimentReport& report, std::ostream& out) {
  out << fmt::format("{:<11} {:>7} {:>9} {:>7} {:>7} {:>7} {:>7}\n",
                     "technique", "trials", "accuracy", "dt", "ct", "st",
                     "errors");
  for (const auto& [t, s] : report.overall) {
    out << fmt::format("{:<11} {:>7} {:>9.4f} {:>7} {:>7} {:>7} {:>7.3f}\n",
                       TechniqueName(t), s.trials, s.accuracy, Fixed(s.mean_dt),
                       Fixed(s.mean_ct), Fixed(s.mean_st), s.mean_errors);
  }
}

int RunSimulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  const Scene scene = LoadSceneArg(a.common, err);
  SimulationConfig sim;
  sim.n_trials = a.trials;
  sim.seed = a.seed;
  sim.truth = LoadCoeffsArg(a.common.coeffs).coeffs;
  sim.mix = ParseProfileMix(a.profiles);
  sim.profile.frame_rate = a.frame_rate;
  const std::vector<TrialRecord> trials =
      GenerateTrials(scene, sim, a.workers);
  const fs::path dir(a.out);
  WriteTrialLog(trials, dir);

  std::map<ProfileKind, int> by_profile;
  size_t samples = 0;
  for (const TrialRecord& t : trials) {
    ++by_profile[t.profile];
    samples += t.samples.size();
  }
  out << fmt::format("scene: {} ({} devices)\n", scene.name,
                     scene.devices.size());
  out << fmt::format("trials: {}  samples: {}  seed: {}\n", trials.size(),
                     samples, a.seed);
  for (const auto& [kind, n] : by_profile)
    out << fmt::format("  {:<10} {}\n", ProfileKindName(kind), n);
  out << "wrote " << (dir / kTrialsFile).string() << ", "
      << (dir / kStreamsFile).string() << '\n';

  if (a.endpoints_per_device > 0) {
    const auto rows =
        GenerateEndpoints(scene, sim.truth, a.endpoints_per_device, a.seed);
    const fs::path path = dir / "endpoints.csv";
    std::ofstream f(path);
    if (!f) throw Error(ErrorCode::kIo, "cannot write " + path.string());
    WriteEndpointHeader(f);
    for (const EndpointRow& r : rows) WriteEndpointRow(f, r);
    out << "wrote " << path.string() << " (" << rows.size() << " endpoints)\n";
  }
  return kExitOk;
}

int RunEvaluate(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  const Scene scene = LoadSceneArg(a.common, err);
  const CoefficientSet believed = LoadCoeffsArg(a.common.coeffs);

  ExperimentConfig cfg;
  cfg.sim.n_trials = a.trials;
  cfg.sim.seed = a.seed;
  cfg.sim.truth =
      a.truth.empty() ? believed.coeffs : LoadCoeffsArg(a.truth).coeffs;
  cfg.sim.mix = ParseProfileMix(a.profiles);
  cfg.sim.profile.frame_rate = a.frame_rate;
  cfg.techniques.clear();
  for (const std::string& name : a.techniques)
    cfg.techniques.push_back(TechniqueArg(name));
  cfg.recognizer.coeffs = believed.coeffs;
  cfg.recognizer.stability_n = a.stability;
  cfg.recognizer.device_models = believed.device_models;
  cfg.training_per_device = a.training;
  cfg.workers = a.workers;

  ExperimentReport report;
  if (a.replay.empty()) {
    report = RunExperiment(scene, cfg);
  } else {
    const std::vector<TrialRecord> trials = ReadTrialLog(a.replay);
    report = EvaluateTrials(scene, trials, cfg);
  }
  report.config["inputs"] = {{"scene", a.common.scene},
                             {"coeffs", a.common.coeffs},
                             {"truth", a.truth},
                             {"replay", a.replay}};

  const std::string text = ReportToJson(report).dump(2) + "\n";
  if (a.out.empty()) {
    out << text;
    return kExitOk;
  }
  const fs::path json_path(a.out);
  fs::path csv_path = json_path;
  csv_path.replace_extension(".csv");
  if (json_path.has_parent_path()) fs::create_directories(json_path.parent_path());
  std::ofstream jf(json_path);
  std::ofstream cf(csv_path);
  if (!jf || !cf) throw Error(ErrorCode::kIo, "cannot write " + a.out);
  jf << text;
  cf << ReportToCsv(report);
  PrintSummaryTable(report, out);
  out << "wrote " << json_path.string() << ", " << csv_path.string() << '\n';
  return kExitOk;
}

int RunFit(const FitArgs& a, std::ostream& out, std::ostream& err) {
  const Scene scene = LoadSceneArg(a.common, err);
  const CoefficientSet base = LoadCoeffsArg(a.common.coeffs);
  const std::vector<EndpointRow> rows = ReadEndpoints(fs::path(a.data));
  FitSummary summary;
  const CoefficientSet fitted =
      FitFromEndpoints(scene, rows, base.coeffs, &summary);
  err << fmt::format("fit: {} rows, {} paired conditions, {} isolated\n",
                     summary.rows, summary.pair_conditions,
                     summary.isolated_conditions);
  if (a.out.empty()) {
    out << CoefficientsToJson(fitted).dump(2) << '\n';
  } else {
    SaveCoefficients(fitted, a.out);
    out << "wrote " << a.out << '\n';
  }
  return kExitOk;
}

int RunPredict(const PredictArgs& a, std::istream& in, std::ostream& out,
               std::ostream& err) {
  const Scene scene = LoadSceneArg(a.common, err);
  const CoefficientSet set = LoadCoeffsArg(a.common.coeffs);
  RecognizerConfig cfg;
  cfg.coeffs = set.coeffs;
  cfg.device_models = set.device_models;
  cfg.technique = TechniqueArg(a.technique);
  cfg.stability_n = a.stability;
  if (cfg.technique == Technique::kSpecific && cfg.device_models.empty())
    throw Error(ErrorCode::kInvalidConfig,
                "technique specific needs device_models in --coeffs");
  Recognizer recognizer(scene, cfg);

  std::optional<int> trial;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::optional<StreamRecord> record;
    try {
      record = ParseStreamRecord(line);
    } catch (const Error& e) {
      err << fmt::format("warning: line {}: {}; skipped\n", line_no, e.what());
      continue;
    }
    if (!record) continue;
    if (record->trial_id != trial) {
      recognizer.Reset();
      trial = record->trial_id;
    }
    Prediction p;
    try {
      p = recognizer.RecognizeFrame(ToGazeSample(*record));
    } catch (const Error& e) {
      err << fmt::format("warning: line {}: {}; skipped\n", line_no, e.what());
      continue;
    }
    json j = PredictionToJson(p);
    j["t"] = record->t;
    if (record->trial_id) j["trial_id"] = *record->trial_id;
    out << j.dump() << '\n';
    out.flush();
  }
  return kExitOk;
}

int RunServe(const ServeArgs& a, std::ostream& out, std::ostream& err) {
  ServiceConfig cfg;
  cfg.scene = LoadSceneArg(a.common, err);
  cfg.coeffs = LoadCoeffsArg(a.common.coeffs);
  cfg.seed = a.seed;
  cfg.stability_n = a.stability;
  cfg.technique = TechniqueArg(a.technique);
  if (!a.metrics_log.empty()) cfg.metrics_log = a.metrics_log;

  // Block the stop signals before any thread starts so that only sigwait
  // below sees them.
  sigset_t stop;
  sigemptyset(&stop);
  sigaddset(&stop, SIGINT);
  sigaddset(&stop, SIGTERM);
  sigset_t previous;
  pthread_sigmask(SIG_BLOCK, &stop, &previous);

  DemoServer server(std::move(cfg));
  unsigned short port = 0;
  try {
    port = server.Listen(a.address, static_cast<unsigned short>(a.port));
  } catch (...) {
    pthread_sigmask(SIG_SETMASK, &previous, nullptr);
    throw;
  }
  out << fmt::format("listening on ws://{}:{}\n", a.address, port);
  out.flush();

  std::thread runner([&server] { server.Run(); });
  int sig = 0;
  sigwait(&stop, &sig);
  err << "shutting down\n";
  server.Stop();
  runner.join();
  pthread_sigmask(SIG_SETMASK, &previous, nullptr);
  return kExitOk;
}

}  // namespace

int RunCli(int argc, const char* const* argv, std::istream& in,
           std::ostream& out, std::ostream& err) {
  CLI::App app{"Gaze-target recognition for casual selection"};
  app.name("casualgaze");
  app.set_config("--config", "",
                 "TOML/INI file with defaults; command-line flags win");
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* simulate =
      app.add_subcommand("simulate", "Generate synthetic selection trials");
  AddCommon(simulate, sim.common);
  simulate->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
  simulate->add_option("--trials", sim.trials, "Number of trials")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  simulate->add_option("--profiles", sim.profiles,
                       "Trajectory mix, e.g. normal=0.8,overshoot=0.1,"
                       "undershoot=0.1")
      ->capture_default_str();
  simulate->add_option("--frame-rate", sim.frame_rate, "Samples per second")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  simulate->add_option("--out", sim.out, "Output directory")
      ->capture_default_str();
  simulate->add_option("--workers", sim.workers, "Worker threads")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  simulate->add_option("--endpoints-per-device", sim.endpoints_per_device,
                       "Also write endpoints.csv with this many draws per "
                       "device")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();

  EvaluateArgs ev;
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "Compare recognition techniques on simulated trials");
  AddCommon(evaluate, ev.common);
  evaluate->add_option("--truth", ev.truth,
                       "Coefficients used to simulate users (default: "
                       "--coeffs)");
  evaluate->add_option("--seed", ev.seed, "Random seed")->capture_default_str();
  evaluate->add_option("--trials", ev.trials, "Number of trials")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  evaluate->add_option("--techniques", ev.techniques, "Techniques to compare")
      ->delimiter(',')
      ->check(CLI::IsMember(TechniqueNames()))
      ->capture_default_str();
  evaluate->add_option("--profiles", ev.profiles, "Trajectory mix")
      ->capture_default_str();
  evaluate->add_option("--frame-rate", ev.frame_rate, "Samples per second")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  evaluate->add_option("--out", ev.out,
                       "JSON report path; a CSV is written next to it "
                       "(stdout when omitted)");
  evaluate->add_option("--replay", ev.replay,
                       "Evaluate a trial log directory instead of simulating");
  evaluate->add_option("--workers", ev.workers, "Worker threads")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  evaluate->add_option("--training", ev.training,
                       "Held-out endpoints per device for the specific model")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  evaluate->add_option("--stability", ev.stability,
                       "Consecutive frames before a winner is stable")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  FitArgs fit;
  CLI::App* fit_cmd = app.add_subcommand(
      "fit", "Fit behavior coefficients to an endpoint dataset");
  AddCommon(fit_cmd, fit.common);
  fit_cmd->add_option("--data", fit.data, "Endpoint CSV")
      ->required()
      ->check(CLI::ExistingFile);
  fit_cmd->add_option("--out", fit.out,
                      "Coefficient file to write (stdout when omitted)");

  PredictArgs pr;
  CLI::App* predict = app.add_subcommand(
      "predict", "Recognize targets for a sample stream on stdin");
  AddCommon(predict, pr.common);
  predict->add_option("--technique", pr.technique, "Recognition technique")
      ->check(CLI::IsMember(TechniqueNames()))
      ->capture_default_str();
  predict->add_option("--stability", pr.stability,
                      "Consecutive frames before a winner is stable")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  ServeArgs sv;
  CLI::App* serve =
      app.add_subcommand("serve", "Run the WebSocket demo service");
  AddCommon(serve, sv.common);
  serve->add_option("--address", sv.address, "Listen address")
      ->capture_default_str();
  serve->add_option("--port", sv.port, "Listen port (0 picks a free port)")
      ->check(CLI::Range(0, 65535))
      ->capture_default_str();
  serve->add_option("--seed", sv.seed, "Task sequence seed")
      ->capture_default_str();
  serve->add_option("--technique", sv.technique, "Initial technique")
      ->check(CLI::IsMember({"precise", "knn", "casualgaze"}))
      ->capture_default_str();
  serve->add_option("--stability", sv.stability,
                    "Consecutive frames before a winner is stable")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  serve->add_option("--metrics-log", sv.metrics_log,
                    "Append task results as JSON lines");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*simulate) return RunSimulate(sim, out, err);
    if (*evaluate) return RunEvaluate(ev, out, err);
    if (*fit_cmd) return RunFit(fit, out, err);
    if (*predict) return RunPredict(pr, in, out, err);
    if (*serve) return RunServe(sv, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return ExitCodeFor(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace casualgaze
