#include "casualgaze/behavior_model.h"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

namespace casualgaze {
namespace {

// tan() blows up at 180 degrees; separations this wide only occur for devices
// straddling a pole, where the chord term is meaningless anyway.
constexpr double kMaxChordAngle = 179.0;

bool Finite(double v) { return std::isfinite(v); }

double SeparationChord(double separation) {
  return ChordAtReference(std::min(std::abs(separation), kMaxChordAngle));
}

}  // namespace

BehaviorCoefficients BehaviorCoefficients::Defaults() {
  BehaviorCoefficients c;
  c.mean_shift.phi = {0.15, 0.0};
  c.mean_shift.theta = {0.15, 0.0};
  c.std_plane.phi = {6.0, 1.2, 2.0};
  c.std_plane.theta = {5.0, 1.0, 1.8};
  c.isolated_std = 8.59;
  c.gate_head = 96.0;
  c.gate_gaze = 17.18;
  c.size_norm_mode = SizeNormMode::kAsPrinted;
  return c;
}

void BehaviorCoefficients::Validate() const {
  const double values[] = {
      mean_shift.phi.a,  mean_shift.phi.b,  mean_shift.theta.a,
      mean_shift.theta.b, std_plane.phi.a,  std_plane.phi.b,
      std_plane.phi.c,   std_plane.theta.a, std_plane.theta.b,
      std_plane.theta.c, isolated_std,      gate_head,
      gate_gaze};
  for (double v : values) {
    if (!Finite(v))
      throw Error(ErrorCode::kInvalidConfig, "non-finite coefficient");
  }
  if (gate_head <= 0.0 || gate_gaze <= 0.0)
    throw Error(ErrorCode::kInvalidConfig, "gates must be positive");
  if (isolated_std < kStdEpsilon)
    throw Error(ErrorCode::kInvalidConfig,
                "isolated_std must be at least " + std::to_string(kStdEpsilon));
}

Offset PairMeanShift(const Angular& target, const Angular& disturb,
                     const BehaviorCoefficients& coeffs) {
  const Offset sep = OffsetBetween(target, disturb);
  const auto& ms = coeffs.mean_shift;
  return {ms.phi.a * sep.dphi + ms.phi.b, ms.theta.a * sep.dtheta + ms.theta.b};
}

PerAxis<double> PairStd(double target_size, double eye_to_target,
                        double separation_phi, double separation_theta,
                        const BehaviorCoefficients& coeffs) {
  const double size =
      NormalizeSize(target_size, eye_to_target, coeffs.size_norm_mode);
  const auto& sp = coeffs.std_plane;
  const double phi =
      sp.phi.a * size + sp.phi.b * SeparationChord(separation_phi) + sp.phi.c;
  const double theta = sp.theta.a * size +
                       sp.theta.b * SeparationChord(separation_theta) +
                       sp.theta.c;
  return {Gaussian::ClampStd(phi), Gaussian::ClampStd(theta)};
}

Gaussian PairModel(const Device& target, const Device& disturb,
                   const Vec3d& eye, const BehaviorCoefficients& coeffs) {
  const Angular t = ToAngular(eye, target.position);
  const Angular d = ToAngular(eye, disturb.position);
  const Offset sep = OffsetBetween(t, d);
  const PerAxis<double> std =
      PairStd(target.diameter(), (target.position - eye).norm(), sep.dphi,
              sep.dtheta, coeffs);
  return Gaussian::Make(PairMeanShift(t, d, coeffs), std.phi, std.theta);
}

Gaussian IsolatedModel(const Device& /*target*/,
                       const BehaviorCoefficients& coeffs) {
  return Gaussian::Make({0.0, 0.0}, coeffs.isolated_std, coeffs.isolated_std);
}

Gaussian FitGaussian(std::span<const Offset> samples) {
  if (samples.size() < 2)
    throw Error(ErrorCode::kInsufficientData,
                "fitting a Gaussian needs at least 2 samples");
  const double n = static_cast<double>(samples.size());
  double mp = 0.0, mt = 0.0;
  for (const Offset& s : samples) {
    mp += s.dphi;
    mt += s.dtheta;
  }
  mp /= n;
  mt /= n;
  double vp = 0.0, vt = 0.0;
  for (const Offset& s : samples) {
    vp += (s.dphi - mp) * (s.dphi - mp);
    vt += (s.dtheta - mt) * (s.dtheta - mt);
  }
  return Gaussian::Make({mp, mt}, std::sqrt(vp / (n - 1.0)),
                        std::sqrt(vt / (n - 1.0)));
}

namespace {

Eigen::VectorXd SolveLeastSquares(const Eigen::MatrixXd& design,
                                  const Eigen::VectorXd& rhs) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  // Relative threshold on the pivots; exact duplicates in a column give
  // pivots at round-off level.
  qr.setThreshold(1e-10);
  if (qr.rank() < design.cols())
    throw Error(ErrorCode::kDegenerateDesign, "design matrix is rank deficient");
  return qr.solve(rhs);
}

}  // namespace

MeanShiftLine FitMeanCoeffs(std::span<const MeanShiftRow> rows) {
  if (rows.size() < 2)
    throw Error(ErrorCode::kInsufficientData,
                "mean-shift fit needs at least 2 rows");
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = rows[i].separation;
    x(i, 1) = 1.0;
    y(i) = rows[i].observed_mean;
  }
  const Eigen::VectorXd beta = SolveLeastSquares(x, y);
  return {beta(0), beta(1)};
}

StdPlane FitStdCoeffs(std::span<const StdPlaneRow> rows) {
  if (rows.size() < 3)
    throw Error(ErrorCode::kInsufficientData,
                "std-plane fit needs at least 3 rows");
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = rows[i].normalized_size;
    x(i, 1) = rows[i].separation_chord;
    x(i, 2) = 1.0;
    y(i) = rows[i].observed_std;
  }
  const Eigen::VectorXd beta = SolveLeastSquares(x, y);
  return {beta(0), beta(1), beta(2)};
}

}  // namespace casualgaze
