#ifndef CASUALGAZE_BEHAVIOR_MODEL_H_
#define CASUALGAZE_BEHAVIOR_MODEL_H_

#include <map>
#include <span>

#include "casualgaze/gaussian.h"
#include "casualgaze/geometry.h"
#include "casualgaze/scene.h"

namespace casualgaze {

template <typename T>
struct PerAxis {
  T phi;
  T theta;

  friend bool operator==(const PerAxis&, const PerAxis&) = default;
};

// mean = a * (target - disturb) + b, one line per axis.
struct MeanShiftLine {
  double a = 0.0;
  double b = 0.0;

  friend bool operator==(const MeanShiftLine&, const MeanShiftLine&) = default;
};

// std = a * normalized_size + b * separation_chord + c, one plane per axis.
struct StdPlane {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  friend bool operator==(const StdPlane&, const StdPlane&) = default;
};

struct BehaviorCoefficients {
  PerAxis<MeanShiftLine> mean_shift;
  PerAxis<StdPlane> std_plane;
  double isolated_std = 8.59;
  double gate_head = 96.0;
  double gate_gaze = 17.18;
  SizeNormMode size_norm_mode = SizeNormMode::kAsPrinted;

  // Engineering defaults: shift away from the interferer, compression with
  // proximity and small size. Not fitted to recorded human data.
  static BehaviorCoefficients Defaults();

  // Throws kInvalidConfig on nonpositive gates, isolated_std below
  // kStdEpsilon, or non-finite coefficients.
  void Validate() const;

  friend bool operator==(const BehaviorCoefficients&,
                         const BehaviorCoefficients&) = default;
};

// Per-device Gaussians fitted from observed endpoints, keyed by device id.
using DeviceModels = std::map<int, Gaussian>;

Offset PairMeanShift(const Angular& target, const Angular& disturb,
                     const BehaviorCoefficients& coeffs);

PerAxis<double> PairStd(double target_size, double eye_to_target,
                        double separation_phi, double separation_theta,
                        const BehaviorCoefficients& coeffs);

// Gaussian of gaze offsets around |target| when |disturb| is the competing
// device. The mean is relative to the target's angular center seen from
// |eye|.
Gaussian PairModel(const Device& target, const Device& disturb,
                   const Vec3d& eye, const BehaviorCoefficients& coeffs);

Gaussian IsolatedModel(const Device& target,
                       const BehaviorCoefficients& coeffs);

// Sample mean and unbiased per-axis standard deviation. Throws
// kInsufficientData for fewer than two samples.
Gaussian FitGaussian(std::span<const Offset> samples);

struct MeanShiftRow {
  double separation = 0.0;  // target - disturb along one axis, degrees
  double observed_mean = 0.0;
};

struct StdPlaneRow {
  double normalized_size = 0.0;
  double separation_chord = 0.0;
  double observed_std = 0.0;
};

// Ordinary least squares. Both throw kInsufficientData when there are too few
// rows and kDegenerateDesign when the design matrix is rank deficient.
MeanShiftLine FitMeanCoeffs(std::span<const MeanShiftRow> rows);
StdPlane FitStdCoeffs(std::span<const StdPlaneRow> rows);

}  // namespace casualgaze

#endif  // CASUALGAZE_BEHAVIOR_MODEL_H_
