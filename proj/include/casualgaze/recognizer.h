#ifndef CASUALGAZE_RECOGNIZER_H_
#define CASUALGAZE_RECOGNIZER_H_

#include <array>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "casualgaze/behavior_model.h"
#include "casualgaze/gaussian.h"
#include "casualgaze/geometry.h"
#include "casualgaze/scene.h"

namespace casualgaze {

struct GazeSample {
  double t = 0.0;  // seconds, strictly increasing within a session
  Vec3d gaze_dir = Vec3d::UnitZ();
  Vec3d head_pos = Vec3d::Zero();
  Vec3d head_forward = Vec3d::UnitZ();
  Vec3d eye_pos = Vec3d::Zero();
};

// Weights over the frame-to-frame gaze motion vectors, most recent first.
struct PredictionWeights {
  std::array<double, 5> k{5.0 / 15, 4.0 / 15, 3.0 / 15, 2.0 / 15, 1.0 / 15};
  double gain = 1.0;

  // Throws kInvalidConfig unless the weights are nonnegative, non-increasing
  // and sum to one within 1e-9.
  void Validate() const;
};

struct Prediction {
  std::optional<int> winner;
  std::map<int, int> votes;
  std::map<int, double> scores;
  Angular predicted_gaze;
  std::vector<int> candidates;
  bool stable = false;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

enum class Technique { kPrecise, kKnn, kCasualGaze, kSpecific };

std::string_view TechniqueName(Technique t);
std::optional<Technique> ParseTechnique(std::string_view name);
std::vector<Technique> AllTechniques();

// Number of samples kept for prediction: five motion vectors need six frames.
inline constexpr size_t kPredictionFrames = 6;

// Extrapolates the current gaze along the weighted recent motion. |buffer| is
// oldest first; only the last kPredictionFrames samples are used and the
// weights are renormalized when fewer vectors exist. Throws kEmptyBuffer.
Angular PredictGaze(std::span<const GazeSample> buffer,
                    const PredictionWeights& weights);

// Devices passing both the head-field gate and the gaze-cone gate around
// |predicted|, in ascending id order.
std::vector<int> CandidateSet(const Scene& scene, const GazeSample& sample,
                              const Angular& predicted,
                              const BehaviorCoefficients& coeffs);

// Supplies the gaze distribution used for each side of a pairwise comparison.
class ModelSource {
 public:
  virtual ~ModelSource() = default;
  virtual Gaussian Pair(const Device& target, const Device& disturb) const = 0;
  virtual Gaussian Isolated(const Device& target) const = 0;
};

// Context-dependent models built from behavior coefficients.
class ContextModelSource : public ModelSource {
 public:
  ContextModelSource(const BehaviorCoefficients& coeffs, const Vec3d& eye)
      : coeffs_(coeffs), eye_(eye) {}

  Gaussian Pair(const Device& target, const Device& disturb) const override;
  Gaussian Isolated(const Device& target) const override;

 private:
  BehaviorCoefficients coeffs_;
  Vec3d eye_;
};

// Per-device fitted Gaussians that ignore the competing device. Devices
// without a fitted model fall back to |fallback|.
class SpecificModelSource : public ModelSource {
 public:
  SpecificModelSource(const DeviceModels& models, const ModelSource& fallback)
      : models_(models), fallback_(fallback) {}

  Gaussian Pair(const Device& target, const Device& disturb) const override;
  Gaussian Isolated(const Device& target) const override;

 private:
  const DeviceModels& models_;
  const ModelSource& fallback_;
};

// Pairwise Mahalanobis tournament over |candidates|. Ties within a pair go to
// the lower id; the overall winner is the vote maximum, then the smallest
// summed distance, then the smallest great-circle distance to |predicted|,
// then the lowest id. An empty candidate list yields no winner.
Prediction Vote(std::span<const int> candidates, const Angular& predicted,
                const Scene& scene, const Vec3d& eye,
                const ModelSource& models);

// Nearest device center by great-circle angle from the raw gaze.
Prediction KnnBaseline(const Scene& scene, const GazeSample& sample);

// Device whose angular radius contains the raw gaze; nearest by angle when
// several do, none when no device does.
Prediction PreciseBaseline(const Scene& scene, const GazeSample& sample);

struct RecognizerConfig {
  BehaviorCoefficients coeffs = BehaviorCoefficients::Defaults();
  PredictionWeights weights;
  int stability_n = 3;
  double max_sample_age = 0.4;  // seconds
  Technique technique = Technique::kCasualGaze;
  DeviceModels device_models;  // used by Technique::kSpecific
};

// Per-session streaming state. Not safe for concurrent use; independent
// instances may run on different threads.
class Recognizer {
 public:
  // |scene| must outlive the recognizer.
  Recognizer(const Scene& scene, RecognizerConfig config);

  // Throws kNonMonotonicTimestamp when |sample| is not newer than the last
  // accepted sample.
  Prediction RecognizeFrame(const GazeSample& sample);

  void Reset();

  const RecognizerConfig& config() const { return config_; }
  const std::deque<GazeSample>& buffer() const { return buffer_; }

 private:
  Prediction Classify(const GazeSample& sample) const;

  const Scene& scene_;
  RecognizerConfig config_;
  std::deque<GazeSample> buffer_;
  std::optional<int> streak_id_;
  int streak_frames_ = 0;
};

}  // namespace casualgaze

#endif  // CASUALGAZE_RECOGNIZER_H_
