#include "casualgaze/recognizer.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "casualgaze/error.h"

namespace casualgaze {

std::string_view TechniqueName(Technique t) {
  switch (t) {
    case Technique::kPrecise: return "precise";
    case Technique::kKnn: return "knn";
    case Technique::kCasualGaze: return "casualgaze";
    case Technique::kSpecific: return "specific";
  }
  return "unknown";
}

std::optional<Technique> ParseTechnique(std::string_view name) {
  for (Technique t : AllTechniques()) {
    if (TechniqueName(t) == name) return t;
  }
  return std::nullopt;
}

std::vector<Technique> AllTechniques() {
  return {Technique::kPrecise, Technique::kKnn, Technique::kCasualGaze,
          Technique::kSpecific};
}

void PredictionWeights::Validate() const {
  double sum = 0.0;
  for (size_t i = 0; i < k.size(); ++i) {
    if (!(k[i] >= 0.0))
      throw Error(ErrorCode::kInvalidConfig, "prediction weights must be >= 0");
    if (i > 0 && k[i] > k[i - 1])
      throw Error(ErrorCode::kInvalidConfig,
                  "prediction weights must not increase with age");
    sum += k[i];
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw Error(ErrorCode::kInvalidConfig, "prediction weights must sum to 1");
  if (!std::isfinite(gain))
    throw Error(ErrorCode::kInvalidConfig, "prediction gain must be finite");
}

Angular PredictGaze(std::span<const GazeSample> buffer,
                    const PredictionWeights& weights) {
  if (buffer.empty())
    throw Error(ErrorCode::kEmptyBuffer, "no gaze samples to predict from");
  const size_t frames = std::min(buffer.size(), kPredictionFrames);
  const auto recent = buffer.subspan(buffer.size() - frames);
  const Angular current = ToAngular(recent.back().gaze_dir);
  if (frames < 2) return current;

  Offset motion;
  double weight_sum = 0.0;
  // j = 0 is the newest motion vector.
  for (size_t j = 0; j + 1 < frames; ++j) {
    const Angular newer = ToAngular(recent[frames - 1 - j].gaze_dir);
    const Angular older = ToAngular(recent[frames - 2 - j].gaze_dir);
    motion = motion + OffsetBetween(newer, older) * weights.k[j];
    weight_sum += weights.k[j];
  }
  if (!(weight_sum > 0.0)) return current;
  Angular predicted =
      ApplyOffset(current, motion * (weights.gain / weight_sum));
  predicted.theta = std::clamp(predicted.theta, -90.0, 90.0);
  return predicted;
}

std::vector<int> CandidateSet(const Scene& scene, const GazeSample& sample,
                              const Angular& predicted,
                              const BehaviorCoefficients& coeffs) {
  const Vec3d gaze = ToDirection(predicted);
  std::vector<int> out;
  for (const Device& d : scene.devices) {
    const Vec3d from_head = d.position - sample.head_pos;
    const Vec3d from_eye = d.position - sample.eye_pos;
    if (from_head.squaredNorm() == 0.0 || from_eye.squaredNorm() == 0.0)
      continue;
    if (AngleBetween(sample.head_forward, from_head) >= coeffs.gate_head)
      continue;
    if (AngleBetween(gaze, from_eye) >= coeffs.gate_gaze) continue;
    out.push_back(d.id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

Gaussian ContextModelSource::Pair(const Device& target,
                                  const Device& disturb) const {
  return PairModel(target, disturb, eye_, coeffs_);
}

Gaussian ContextModelSource::Isolated(const Device& target) const {
  return IsolatedModel(target, coeffs_);
}

Gaussian SpecificModelSource::Pair(const Device& target,
                                   const Device& disturb) const {
  auto it = models_.find(target.id);
  return it != models_.end() ? it->second : fallback_.Pair(target, disturb);
}

Gaussian SpecificModelSource::Isolated(const Device& target) const {
  auto it = models_.find(target.id);
  return it != models_.end() ? it->second : fallback_.Isolated(target);
}

Prediction Vote(std::span<const int> candidates, const Angular& predicted,
                const Scene& scene, const Vec3d& eye,
                const ModelSource& models) {
  Prediction p;
  p.predicted_gaze = predicted;
  p.candidates.assign(candidates.begin(), candidates.end());
  std::sort(p.candidates.begin(), p.candidates.end());
  p.candidates.erase(std::unique(p.candidates.begin(), p.candidates.end()),
                     p.candidates.end());
  if (p.candidates.empty()) return p;

  const size_t n = p.candidates.size();
  std::vector<const Device*> devs(n);
  std::vector<Offset> offsets(n);
  std::vector<double> raw_distance(n);
  std::vector<int> votes(n, 0);
  std::vector<double> scores(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    devs[i] = &scene.Get(p.candidates[i]);
    const Angular center = ToAngular(eye, devs[i]->position);
    offsets[i] = OffsetBetween(predicted, center);
    raw_distance[i] = GreatCircleDegrees(predicted, center);
  }

  if (n == 1) {
    scores[0] = Mahalanobis(offsets[0], models.Isolated(*devs[0]));
  } else {
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = i + 1; j < n; ++j) {
        const double di = Mahalanobis(offsets[i], models.Pair(*devs[i], *devs[j]));
        const double dj = Mahalanobis(offsets[j], models.Pair(*devs[j], *devs[i]));
        scores[i] += di;
        scores[j] += dj;
        ++votes[di <= dj ? i : j];
      }
    }
  }

  size_t best = 0;
  for (size_t i = 1; i < n; ++i) {
    if (votes[i] != votes[best]) {
      if (votes[i] > votes[best]) best = i;
    } else if (scores[i] != scores[best]) {
      if (scores[i] < scores[best]) best = i;
    } else if (raw_distance[i] < raw_distance[best]) {
      best = i;
    }
    // Remaining ties keep the lower id, which comes first.
  }
  for (size_t i = 0; i < n; ++i) {
    p.votes[p.candidates[i]] = votes[i];
    p.scores[p.candidates[i]] = scores[i];
  }
  p.winner = p.candidates[best];
  return p;
}

namespace {

Prediction SingleWinner(const Angular& gaze, std::optional<int> winner,
                        double distance) {
  Prediction p;
  p.predicted_gaze = gaze;
  if (winner) {
    p.winner = winner;
    p.candidates = {*winner};
    p.votes[*winner] = 0;
    p.scores[*winner] = distance;
  }
  return p;
}

// Devices in ascending id order so that strict comparisons keep the lowest
// id on ties.
std::vector<const Device*> ById(const Scene& scene) {
  std::vector<const Device*> devs;
  for (const Device& d : scene.devices) devs.push_back(&d);
  std::sort(devs.begin(), devs.end(),
            [](const Device* a, const Device* b) { return a->id < b->id; });
  return devs;
}

}  // namespace

Prediction KnnBaseline(const Scene& scene, const GazeSample& sample) {
  std::optional<int> best;
  double best_angle = std::numeric_limits<double>::infinity();
  for (const Device* d : ById(scene)) {
    const Vec3d v = d->position - sample.eye_pos;
    if (v.squaredNorm() == 0.0) continue;
    const double angle = AngleBetween(sample.gaze_dir, v);
    if (angle < best_angle) {
      best_angle = angle;
      best = d->id;
    }
  }
  return SingleWinner(ToAngular(sample.gaze_dir), best, best_angle);
}

Prediction PreciseBaseline(const Scene& scene, const GazeSample& sample) {
  std::optional<int> best;
  double best_angle = std::numeric_limits<double>::infinity();
  for (const Device* d : ById(scene)) {
    const Vec3d v = d->position - sample.eye_pos;
    const double dist = v.norm();
    double angular_radius = 90.0;
    if (dist > d->radius)
      angular_radius = RadToDeg(std::asin(d->radius / dist));
    const double angle = dist > 0.0 ? AngleBetween(sample.gaze_dir, v) : 0.0;
    if (angle <= angular_radius && angle < best_angle) {
      best_angle = angle;
      best = d->id;
    }
  }
  return SingleWinner(ToAngular(sample.gaze_dir), best,
                      best ? best_angle : 0.0);
}

Recognizer::Recognizer(const Scene& scene, RecognizerConfig config)
    : scene_(scene), config_(std::move(config)) {
  config_.coeffs.Validate();
  config_.weights.Validate();
  if (config_.stability_n < 1)
    throw Error(ErrorCode::kInvalidConfig, "stability_n must be at least 1");
}

void Recognizer::Reset() {
  buffer_.clear();
  streak_id_.reset();
  streak_frames_ = 0;
}

Prediction Recognizer::RecognizeFrame(const GazeSample& sample) {
  if (!buffer_.empty() && !(sample.t > buffer_.back().t))
    throw Error(ErrorCode::kNonMonotonicTimestamp,
                "gaze sample timestamp does not advance");
  buffer_.push_back(sample);
  while (buffer_.size() > kPredictionFrames) buffer_.pop_front();
  while (buffer_.size() > 1 &&
         buffer_.front().t < sample.t - config_.max_sample_age)
    buffer_.pop_front();

  Prediction p = Classify(sample);
  if (p.winner && p.winner == streak_id_) {
    ++streak_frames_;
  } else {
    streak_id_ = p.winner;
    streak_frames_ = p.winner ? 1 : 0;
  }
  p.stable = p.winner.has_value() && streak_frames_ >= config_.stability_n;
  return p;
}

Prediction Recognizer::Classify(const GazeSample& sample) const {
  switch (config_.technique) {
    case Technique::kPrecise:
      return PreciseBaseline(scene_, sample);
    case Technique::kKnn:
      return KnnBaseline(scene_, sample);
    case Technique::kCasualGaze:
    case Technique::kSpecific:
      break;
  }
  const std::vector<GazeSample> frames(buffer_.begin(), buffer_.end());
  const Angular predicted = PredictGaze(frames, config_.weights);
  const std::vector<int> candidates =
      CandidateSet(scene_, sample, predicted, config_.coeffs);
  const ContextModelSource context(config_.coeffs, sample.eye_pos);
  if (config_.technique == Technique::kSpecific) {
    const SpecificModelSource specific(config_.device_models, context);
    return Vote(candidates, predicted, scene_, sample.eye_pos, specific);
  }
  return Vote(candidates, predicted, scene_, sample.eye_pos, context);
}

}  // namespace casualgaze
