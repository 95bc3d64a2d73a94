#include "casualgaze/simulator.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "casualgaze/error.h"

namespace casualgaze {

std::string_view ProfileKindName(ProfileKind kind) {
  switch (kind) {
    case ProfileKind::kNormal: return "normal";
    case ProfileKind::kOvershootFoldback: return "overshoot";
    case ProfileKind::kUndershootThrough: return "undershoot";
  }
  return "unknown";
}

std::optional<ProfileKind> ParseProfileKind(std::string_view name) {
  if (name == "normal") return ProfileKind::kNormal;
  if (name == "overshoot" || name == "overshoot_foldback")
    return ProfileKind::kOvershootFoldback;
  if (name == "undershoot" || name == "undershoot_through")
    return ProfileKind::kUndershootThrough;
  return std::nullopt;
}

Rng MakeStream(std::uint64_t seed, std::uint64_t stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id),
                    static_cast<std::uint32_t>(stream_id >> 32)};
  return Rng(seq);
}

void TrajectoryProfile::Validate() const {
  auto bad = [](const char* what) {
    throw Error(ErrorCode::kInvalidProfile, what);
  };
  if (!(frame_rate > 0.0) || !std::isfinite(frame_rate))
    bad("frame_rate must be positive");
  if (!(base_s > 0.0) || !(s_per_degree >= 0.0))
    bad("trajectory duration must be positive");
  if (!(noise_std >= 0.0)) bad("noise_std must be nonnegative");
  if (!(excursion_min >= 0.0) || !(excursion_max >= excursion_min))
    bad("excursion range is invalid");
  if (!(foldback_fraction > 0.0 && foldback_fraction < 1.0) ||
      !(hold_fraction > 0.0 && hold_fraction < 1.0))
    bad("foldback and hold fractions must lie in (0, 1)");
}

void ProfileMix::Validate() const {
  if (!(normal >= 0.0) || !(overshoot >= 0.0) || !(undershoot >= 0.0) ||
      !(normal + overshoot + undershoot > 0.0))
    throw Error(ErrorCode::kInvalidProfile,
                "profile mix needs nonnegative weights with a positive sum");
}

ProfileKind ProfileMix::Sample(Rng& rng) const {
  const double total = normal + overshoot + undershoot;
  const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
  if (u < normal) return ProfileKind::kNormal;
  if (u < normal + overshoot) return ProfileKind::kOvershootFoldback;
  return ProfileKind::kUndershootThrough;
}

const Device* NearestInterferer(const Scene& scene, const Device& target,
                                const std::vector<int>& context) {
  const Vec3d& eye = scene.user.eye_pos;
  const Vec3d to_target = target.position - eye;
  const Device* best = nullptr;
  double best_angle = std::numeric_limits<double>::infinity();
  for (const Device* d : scene.Members(context)) {
    if (d->id == target.id) continue;
    const double angle = AngleBetween<double>(to_target, d->position - eye);
    if (angle < best_angle || (angle == best_angle && best && d->id < best->id)) {
      best_angle = angle;
      best = d;
    }
  }
  return best;
}

Gaussian TruthModel(const Scene& scene, int target_id,
                    const BehaviorCoefficients& truth,
                    const std::vector<int>& context) {
  const Device& target = scene.Get(target_id);
  const Vec3d& eye = scene.user.eye_pos;
  const Device* other = NearestInterferer(scene, target, context);
  if (other && AngleBetween<double>(target.position - eye,
                                    other->position - eye) <
                   2.0 * truth.gate_gaze)
    return PairModel(target, *other, eye, truth);
  return IsolatedModel(target, truth);
}

Angular SynthEndpoint(const Scene& scene, int target_id,
                      const BehaviorCoefficients& truth, Rng& rng,
                      const std::vector<int>& context) {
  const Gaussian model = TruthModel(scene, target_id, truth, context);
  const Angular center =
      ToAngular(scene.user.eye_pos, scene.Get(target_id).position);
  std::normal_distribution<double> unit(0.0, 1.0);
  const double dphi = model.mean.dphi + model.std_phi * unit(rng);
  const double dtheta = model.mean.dtheta + model.std_theta * unit(rng);
  Angular out = ApplyOffset(center, {dphi, dtheta});
  out.theta = std::clamp(out.theta, -90.0, 90.0);
  return out;
}

namespace {

double Smoothstep(double s) { return s * s * (3.0 - 2.0 * s); }

}  // namespace

std::vector<GazeSample> SynthTrajectory(const Angular& start,
                                        const Angular& endpoint,
                                        const TrajectoryProfile& profile,
                                        const TrajectoryPose& pose, Rng& rng,
                                        double start_t) {
  profile.Validate();
  const Offset delta = OffsetBetween(endpoint, start);
  const double amplitude = std::hypot(delta.dphi, delta.dtheta);
  const double duration = profile.base_s + profile.s_per_degree * amplitude;
  const int frames =
      std::max(2, static_cast<int>(std::lround(duration * profile.frame_rate)));

  double excursion = 0.0;
  if (profile.kind != ProfileKind::kNormal) {
    excursion = std::uniform_real_distribution<double>(
        profile.excursion_min, profile.excursion_max)(rng);
  }

  // Position along the path for frame i (1-based), as an offset from start.
  auto path = [&](int i) -> Offset {
    switch (profile.kind) {
      case ProfileKind::kNormal:
        return delta * Smoothstep(static_cast<double>(i) / frames);
      case ProfileKind::kOvershootFoldback: {
        const int fold = std::clamp(
            static_cast<int>(std::lround(frames * profile.foldback_fraction)),
            1, frames - 1);
        const int main = frames - fold;
        const Offset over = delta * (1.0 + excursion);
        if (i <= main)
          return over * Smoothstep(static_cast<double>(i) / main);
        return over + (delta - over) *
                          Smoothstep(static_cast<double>(i - main) / fold);
      }
      case ProfileKind::kUndershootThrough: {
        const int hold = std::clamp(
            static_cast<int>(std::lround(frames * profile.hold_fraction)), 1,
            frames - 1);
        const int move = frames - hold;
        const Offset shortfall = delta * (1.0 - excursion);
        return shortfall *
               Smoothstep(std::min(1.0, static_cast<double>(i) / move));
      }
    }
    return {};
  };

  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<GazeSample> out;
  out.reserve(frames);
  for (int i = 1; i <= frames; ++i) {
    Angular gaze = ApplyOffset(start, path(i));
    if (i == frames && profile.kind != ProfileKind::kUndershootThrough)
      gaze = endpoint;
    if (profile.noise_std > 0.0) {
      gaze = ApplyOffset(gaze, {profile.noise_std * noise(rng),
                                profile.noise_std * noise(rng)});
    }
    gaze.theta = std::clamp(gaze.theta, -90.0, 90.0);
    GazeSample s;
    s.t = start_t + static_cast<double>(i) / profile.frame_rate;
    s.gaze_dir = ToDirection(gaze);
    s.eye_pos = pose.eye_pos;
    s.head_pos = pose.head_pos;
    s.head_forward = pose.head_forward;
    out.push_back(s);
  }
  return out;
}

TrialRecord GenerateTrial(const Scene& scene, const SimulationConfig& config,
                          int trial_id) {
  Rng rng = MakeStream(config.seed, static_cast<std::uint64_t>(trial_id));
  std::vector<int> context;
  if (!scene.contexts.empty()) {
    std::uniform_int_distribution<size_t> pick(0, scene.contexts.size() - 1);
    context = scene.contexts[pick(rng)];
  }
  const std::vector<const Device*> members = scene.Members(context);
  std::uniform_int_distribution<size_t> pick(0, members.size() - 1);
  const Device& target = *members[pick(rng)];

  TrialRecord trial;
  trial.trial_id = trial_id;
  trial.target_id = target.id;
  trial.profile = config.mix.Sample(rng);
  trial.endpoint = SynthEndpoint(scene, target.id, config.truth, rng, context);

  const UserPose& user = scene.user;
  const Angular forward = ToAngular(user.head_forward);
  const Angular center = ToAngular(user.eye_pos, target.position);
  TrajectoryPose pose{user.eye_pos, user.head_pos, user.head_forward};
  if (std::abs(WrapDegrees(center.phi - forward.phi)) >
      config.head_turn_threshold)
    pose.head_forward = ToDirection(Angular{center.phi, 0.0});
  const Angular start = ToAngular(pose.head_forward);

  TrajectoryProfile profile = config.profile;
  profile.kind = trial.profile;
  trial.start_t = 0.0;
  trial.samples =
      SynthTrajectory(start, trial.endpoint, profile, pose, rng, trial.start_t);
  trial.confirm_t = trial.samples.back().t;
  return trial;
}

namespace {

// Runs fn(i) for i in [0, n) over |workers| threads; each index is handled by
// exactly one worker.
template <typename Fn>
void ParallelFor(int n, int workers, Fn fn) {
  workers = std::clamp(workers, 1, std::max(1, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers);
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (int i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

std::vector<TrialRecord> GenerateTrials(const Scene& scene,
                                        const SimulationConfig& config,
                                        int workers) {
  if (config.n_trials <= 0)
    throw Error(ErrorCode::kInvalidConfig, "n_trials must be positive");
  config.truth.Validate();
  config.mix.Validate();
  config.profile.Validate();
  std::vector<TrialRecord> trials(config.n_trials);
  ParallelFor(config.n_trials, workers, [&](int i) {
    trials[i] = GenerateTrial(scene, config, i + 1);
  });
  return trials;
}

std::vector<EndpointRow> GenerateEndpoints(const Scene& scene,
                                           const BehaviorCoefficients& truth,
                                           int per_device, std::uint64_t seed) {
  if (per_device <= 0)
    throw Error(ErrorCode::kInvalidConfig, "per_device must be positive");
  std::vector<std::vector<int>> contexts = scene.contexts;
  if (contexts.empty()) contexts.push_back({});
  std::vector<EndpointRow> rows;
  int trial = 0;
  for (size_t c = 0; c < contexts.size(); ++c) {
    for (const Device* d : scene.Members(contexts[c])) {
      Rng rng = MakeStream(seed, (static_cast<std::uint64_t>(c) << 32) |
                                     static_cast<std::uint32_t>(d->id));
      for (int k = 0; k < per_device; ++k) {
        EndpointRow row;
        row.trial_id = ++trial;
        row.target_id = d->id;
        row.gaze = SynthEndpoint(scene, d->id, truth, rng, contexts[c]);
        row.timestamp_ms = 40.0 * trial;
        row.context = contexts[c];
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

DeviceModels TrainSpecificModels(const Scene& scene,
                                 const BehaviorCoefficients& truth,
                                 int per_device, std::uint64_t seed) {
  // Separate seed domain from the trial streams.
  constexpr std::uint64_t kTrainingDomain = 0x7472'6169'6e00'0000ULL;
  DeviceModels models;
  for (const Device& d : scene.devices) {
    Rng rng = MakeStream(seed ^ kTrainingDomain,
                         static_cast<std::uint64_t>(static_cast<std::uint32_t>(d.id)));
    const Angular center = ToAngular(scene.user.eye_pos, d.position);
    std::vector<Offset> offsets;
    offsets.reserve(per_device);
    for (int k = 0; k < per_device; ++k)
      offsets.push_back(
          OffsetBetween(SynthEndpoint(scene, d.id, truth, rng), center));
    models[d.id] = FitGaussian(offsets);
  }
  return models;
}

std::vector<Prediction> Replay(const Scene& scene, const RecognizerConfig& cfg,
                               const TrialRecord& trial) {
  Recognizer recognizer(scene, cfg);
  std::vector<Prediction> out;
  out.reserve(trial.samples.size());
  for (const GazeSample& s : trial.samples)
    out.push_back(recognizer.RecognizeFrame(s));
  return out;
}

namespace {

nlohmann::json ConfigEcho(const Scene& scene, const ExperimentConfig& config,
                          int n_trials) {
  nlohmann::json techniques = nlohmann::json::array();
  for (Technique t : config.techniques) techniques.push_back(TechniqueName(t));
  const SimulationConfig& sim = config.sim;
  CoefficientSet truth{sim.truth, {}};
  CoefficientSet believed{config.recognizer.coeffs, {}};
  return {
      {"scene", scene.name},
      {"n_trials", n_trials},
      {"seed", sim.seed},
      {"techniques", techniques},
      {"profile_mix",
       {{"normal", sim.mix.normal},
        {"overshoot", sim.mix.overshoot},
        {"undershoot", sim.mix.undershoot}}},
      {"profile",
       {{"base_s", sim.profile.base_s},
        {"s_per_degree", sim.profile.s_per_degree},
        {"noise_std", sim.profile.noise_std},
        {"frame_rate", sim.profile.frame_rate},
        {"excursion_min", sim.profile.excursion_min},
        {"excursion_max", sim.profile.excursion_max}}},
      {"head_turn_threshold", sim.head_turn_threshold},
      {"stability_n", config.recognizer.stability_n},
      {"prediction_gain", config.recognizer.weights.gain},
      {"training_per_device", config.training_per_device},
      {"truth", CoefficientsToJson(truth)},
      {"coeffs", CoefficientsToJson(believed)},
  };
}

}  // namespace

ExperimentReport EvaluateTrials(const Scene& scene,
                                const std::vector<TrialRecord>& trials,
                                const ExperimentConfig& config,
                                std::vector<TrialOutcome>* outcomes) {
  if (trials.empty())
    throw Error(ErrorCode::kEmptyInput, "no trials to evaluate");
  std::map<int, DeviceCase> cases;
  for (const Device& d : scene.devices)
    cases[d.id] = ClassifyDeviceCase(d, scene, config.recognizer.coeffs.gate_gaze,
                                     config.case_thresholds);

  std::vector<RecognizerConfig> configs;
  for (Technique t : config.techniques) {
    RecognizerConfig cfg = config.recognizer;
    cfg.technique = t;
    if (t == Technique::kSpecific && cfg.device_models.empty())
      cfg.device_models = TrainSpecificModels(
          scene, config.sim.truth, config.training_per_device, config.sim.seed);
    configs.push_back(std::move(cfg));
  }

  const int n = static_cast<int>(trials.size());
  const size_t per_trial = configs.size();
  std::vector<TrialOutcome> all(static_cast<size_t>(n) * per_trial);
  ParallelFor(n, config.workers, [&](int i) {
    const TrialRecord& trial = trials[i];
    for (size_t k = 0; k < per_trial; ++k) {
      const std::vector<Prediction> preds = Replay(scene, configs[k], trial);
      all[i * per_trial + k] = ScoreTrial(trial, preds, configs[k].technique,
                                          cases.at(trial.target_id));
    }
  });

  ExperimentReport report = Aggregate(all);
  report.seed = config.sim.seed;
  report.config = ConfigEcho(scene, config, n);
  if (outcomes) *outcomes = std::move(all);
  return report;
}

ExperimentReport RunExperiment(const Scene& scene,
                               const ExperimentConfig& config,
                               std::vector<TrialOutcome>* outcomes) {
  const std::vector<TrialRecord> trials =
      GenerateTrials(scene, config.sim, config.workers);
  return EvaluateTrials(scene, trials, config, outcomes);
}

}  // namespace casualgaze
