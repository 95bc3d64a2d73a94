#ifndef CASUALGAZE_SIMULATOR_H_
#define CASUALGAZE_SIMULATOR_H_

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "casualgaze/behavior_model.h"
#include "casualgaze/evaluation.h"
#include "casualgaze/recognizer.h"
#include "casualgaze/scene.h"
#include "casualgaze/scene_io.h"
#include "casualgaze/trial.h"

namespace casualgaze {

using Rng = std::mt19937_64;

// Independent stream for (seed, stream id). Used per trial so that trials can
// be generated in any order or in parallel with identical results.
Rng MakeStream(std::uint64_t seed, std::uint64_t stream_id);

struct TrajectoryProfile {
  ProfileKind kind = ProfileKind::kNormal;
  double base_s = 0.25;
  double s_per_degree = 0.004;
  double noise_std = 0.5;    // degrees, per axis per frame
  double frame_rate = 25.0;  // Hz
  // Overshoot / undershoot magnitude as a fraction of the amplitude.
  double excursion_min = 0.10;
  double excursion_max = 0.25;
  // Fraction of frames spent folding back (overshoot) or holding (undershoot).
  double foldback_fraction = 0.20;
  double hold_fraction = 0.15;

  // Throws kInvalidProfile.
  void Validate() const;
};

struct ProfileMix {
  double normal = 0.8;
  double overshoot = 0.1;
  double undershoot = 0.1;

  // Throws kInvalidProfile for negative or all-zero weights.
  void Validate() const;
  ProfileKind Sample(Rng& rng) const;
};

// Head and eye placement held fixed during a trajectory.
struct TrajectoryPose {
  Vec3d eye_pos = Vec3d::Zero();
  Vec3d head_pos = Vec3d::Zero();
  Vec3d head_forward = Vec3d::UnitZ();
};

// Nearest other device by great-circle angle from the eye, restricted to
// |context| (empty = whole scene). Returns null when there is none.
const Device* NearestInterferer(const Scene& scene, const Device& target,
                                const std::vector<int>& context = {});

// Ground-truth gaze model for |target_id|: the pair model against the nearest
// interferer when it lies within twice the gaze gate, the isolated model
// otherwise. Offsets are relative to the target's angular center.
Gaussian TruthModel(const Scene& scene, int target_id,
                    const BehaviorCoefficients& truth,
                    const std::vector<int>& context = {});

Angular SynthEndpoint(const Scene& scene, int target_id,
                      const BehaviorCoefficients& truth, Rng& rng,
                      const std::vector<int>& context = {});

// Samples at start_t + i / frame_rate for i = 1..N. Throws kInvalidProfile.
std::vector<GazeSample> SynthTrajectory(const Angular& start,
                                        const Angular& endpoint,
                                        const TrajectoryProfile& profile,
                                        const TrajectoryPose& pose, Rng& rng,
                                        double start_t = 0.0);

struct SimulationConfig {
  int n_trials = 100;
  std::uint64_t seed = 1;
  BehaviorCoefficients truth = BehaviorCoefficients::Defaults();
  ProfileMix mix;
  TrajectoryProfile profile;
  // Targets further than this from the scene forward (yaw) are selected after
  // turning the head toward them.
  double head_turn_threshold = 60.0;
};

TrialRecord GenerateTrial(const Scene& scene, const SimulationConfig& config,
                          int trial_id);
std::vector<TrialRecord> GenerateTrials(const Scene& scene,
                                        const SimulationConfig& config,
                                        int workers = 1);

// Endpoint dataset: for each trial context (or the whole scene) and each
// device in it, |per_device| draws from the truth model.
std::vector<EndpointRow> GenerateEndpoints(const Scene& scene,
                                           const BehaviorCoefficients& truth,
                                           int per_device, std::uint64_t seed);

struct ExperimentConfig {
  SimulationConfig sim;
  std::vector<Technique> techniques = AllTechniques();
  // What the recognizers believe; defaults to the truth coefficients.
  RecognizerConfig recognizer;
  // Held-out endpoints per device used to fit the specific models.
  int training_per_device = 2000;
  int workers = 1;
  CaseThresholds case_thresholds;
};

// Fits one Gaussian per device from held-out endpoints drawn from the truth.
DeviceModels TrainSpecificModels(const Scene& scene,
                                 const BehaviorCoefficients& truth,
                                 int per_device, std::uint64_t seed);

std::vector<Prediction> Replay(const Scene& scene, const RecognizerConfig& cfg,
                               const TrialRecord& trial);

// Replays |trials| through every technique and aggregates the outcomes.
ExperimentReport EvaluateTrials(const Scene& scene,
                                const std::vector<TrialRecord>& trials,
                                const ExperimentConfig& config,
                                std::vector<TrialOutcome>* outcomes = nullptr);

// Generates n_trials trials and evaluates them. Deterministic for a fixed
// seed regardless of |workers|.
ExperimentReport RunExperiment(const Scene& scene,
                               const ExperimentConfig& config,
                               std::vector<TrialOutcome>* outcomes = nullptr);

}  // namespace casualgaze

#endif  // CASUALGAZE_SIMULATOR_H_
