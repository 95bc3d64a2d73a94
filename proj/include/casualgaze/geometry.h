#ifndef CASUALGAZE_GEOMETRY_H_
#define CASUALGAZE_GEOMETRY_H_

// Angular coordinate helpers. World axes: +x right, +y up, +z forward, in
// meters. Angles are degrees everywhere outside of the trig calls.
//
//   phi   - horizontal angle, positive rightward, wrapped to (-180, 180]
//   theta - vertical angle, positive upward, in [-90, 90]

#include <cmath>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "casualgaze/error.h"

namespace casualgaze {

template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;

template <typename Scalar>
struct AngularCoord {
  Scalar phi = 0;
  Scalar theta = 0;

  friend bool operator==(const AngularCoord&, const AngularCoord&) = default;
};

template <typename Scalar>
struct AngularOffset {
  Scalar dphi = 0;
  Scalar dtheta = 0;

  AngularOffset operator+(const AngularOffset& o) const {
    return {dphi + o.dphi, dtheta + o.dtheta};
  }
  AngularOffset operator-(const AngularOffset& o) const {
    return {dphi - o.dphi, dtheta - o.dtheta};
  }
  AngularOffset operator*(Scalar s) const { return {dphi * s, dtheta * s}; }
  friend bool operator==(const AngularOffset&, const AngularOffset&) = default;
};

using Vec3d = Vec3<double>;
using Angular = AngularCoord<double>;
using Offset = AngularOffset<double>;

// Distance at which the behavior model's size and separation terms are
// normalized.
inline constexpr double kReferenceDistance = 3.0;

template <typename Scalar>
constexpr Scalar kPi = Scalar(3.14159265358979323846264338327950288L);

template <typename Scalar>
constexpr Scalar DegToRad(Scalar deg) {
  return deg * (kPi<Scalar> / Scalar(180));
}

template <typename Scalar>
constexpr Scalar RadToDeg(Scalar rad) {
  return rad * (Scalar(180) / kPi<Scalar>);
}

// Wraps into (-180, 180].
template <typename Scalar>
Scalar WrapDegrees(Scalar deg) {
  using std::fmod;
  Scalar w = fmod(deg, Scalar(360));
  if (w <= Scalar(-180)) w += Scalar(360);
  if (w > Scalar(180)) w -= Scalar(360);
  return w;
}

template <typename Scalar>
AngularCoord<Scalar> ToAngular(const Vec3<Scalar>& direction) {
  using std::atan2;
  using std::hypot;
  if (!(direction.squaredNorm() > Scalar(0)))
    throw Error(ErrorCode::kZeroDirection, "direction vector has zero length");
  const Scalar horizontal = hypot(direction.x(), direction.z());
  Scalar phi = RadToDeg(atan2(direction.x(), direction.z()));
  if (phi == Scalar(-180)) phi = Scalar(180);
  return {phi, RadToDeg(atan2(direction.y(), horizontal))};
}

template <typename Scalar>
AngularCoord<Scalar> ToAngular(const Vec3<Scalar>& origin,
                               const Vec3<Scalar>& target) {
  return ToAngular<Scalar>(target - origin);
}

// Unit vector pointing along |coord|.
template <typename Scalar>
Vec3<Scalar> ToDirection(const AngularCoord<Scalar>& coord) {
  using std::cos;
  using std::sin;
  const Scalar phi = DegToRad(coord.phi);
  const Scalar theta = DegToRad(coord.theta);
  return {cos(theta) * sin(phi), sin(theta), cos(theta) * cos(phi)};
}

// Offset of |gaze| relative to |device|, phi taken on the short way round.
template <typename Scalar>
AngularOffset<Scalar> OffsetBetween(const AngularCoord<Scalar>& gaze,
                                    const AngularCoord<Scalar>& device) {
  return {WrapDegrees(gaze.phi - device.phi), gaze.theta - device.theta};
}

template <typename Scalar>
AngularCoord<Scalar> ApplyOffset(const AngularCoord<Scalar>& base,
                                 const AngularOffset<Scalar>& offset) {
  return {WrapDegrees(base.phi + offset.dphi), base.theta + offset.dtheta};
}

// Angle between two directions in [0, 180]. The atan2 form stays accurate
// near 0 and 180 where arccos of the normalized dot product does not.
template <typename Scalar>
Scalar AngleBetween(const Vec3<Scalar>& v1, const Vec3<Scalar>& v2) {
  using std::atan2;
  if (!(v1.squaredNorm() > Scalar(0)) || !(v2.squaredNorm() > Scalar(0)))
    throw Error(ErrorCode::kZeroDirection, "angle with a zero-length vector");
  return RadToDeg(atan2(v1.cross(v2).norm(), v1.dot(v2)));
}

// Great-circle separation of two angular positions.
template <typename Scalar>
Scalar GreatCircleDegrees(const AngularCoord<Scalar>& a,
                          const AngularCoord<Scalar>& b) {
  return AngleBetween<Scalar>(ToDirection(a), ToDirection(b));
}

// Length of the chord subtending |delta| degrees at the reference distance.
template <typename Scalar>
Scalar ChordAtReference(Scalar delta) {
  using std::tan;
  if (!(delta >= Scalar(0)) || !(delta < Scalar(180)))
    throw Error(ErrorCode::kOutOfRange, "chord angle must lie in [0, 180)");
  return Scalar(2) * Scalar(kReferenceDistance) * tan(DegToRad(delta) / 2);
}

enum class SizeNormMode {
  // size * |P_t - P_e| / 3, the form used by the original fit.
  kAsPrinted,
  // size * 3 / |P_t - P_e|, the apparent size at the reference distance.
  kApparent,
};

template <typename Scalar>
Scalar NormalizeSize(Scalar size, Scalar eye_to_target,
                     SizeNormMode mode = SizeNormMode::kAsPrinted) {
  if (!(eye_to_target > Scalar(0)))
    throw Error(ErrorCode::kNonPositiveDistance,
                "eye-to-target distance must be positive");
  const Scalar ref = Scalar(kReferenceDistance);
  return mode == SizeNormMode::kAsPrinted ? size * eye_to_target / ref
                                          : size * ref / eye_to_target;
}

}  // namespace casualgaze

#endif  // CASUALGAZE_GEOMETRY_H_
