#ifndef CASUALGAZE_GAUSSIAN_H_
#define CASUALGAZE_GAUSSIAN_H_

#include <algorithm>
#include <cmath>

#include "casualgaze/geometry.h"

namespace casualgaze {

// Lower bound on either standard deviation, in degrees. Keeps the covariance
// invertible for degenerate fits.
inline constexpr double kStdEpsilon = 0.1;

// Axis-aligned bivariate normal over (dphi, dtheta). The covariance is
// diag(std_phi^2, std_theta^2); there is no cross term.
template <typename Scalar>
struct BivariateGaussian {
  AngularOffset<Scalar> mean;
  Scalar std_phi = Scalar(1);
  Scalar std_theta = Scalar(1);

  static BivariateGaussian Make(const AngularOffset<Scalar>& mean,
                                Scalar std_phi, Scalar std_theta) {
    return {mean, ClampStd(std_phi), ClampStd(std_theta)};
  }

  static Scalar ClampStd(Scalar s) {
    using std::isnan;
    if (isnan(s)) return Scalar(kStdEpsilon);
    return std::max(s, Scalar(kStdEpsilon));
  }

  friend bool operator==(const BivariateGaussian&,
                         const BivariateGaussian&) = default;
};

using Gaussian = BivariateGaussian<double>;

template <typename Scalar>
Scalar SquaredMahalanobis(const AngularOffset<Scalar>& x,
                          const BivariateGaussian<Scalar>& model) {
  const Scalar zp = (x.dphi - model.mean.dphi) / model.std_phi;
  const Scalar zt = (x.dtheta - model.mean.dtheta) / model.std_theta;
  return zp * zp + zt * zt;
}

template <typename Scalar>
Scalar Mahalanobis(const AngularOffset<Scalar>& x,
                   const BivariateGaussian<Scalar>& model) {
  using std::sqrt;
  return sqrt(SquaredMahalanobis(x, model));
}

template <typename Scalar>
Scalar PeakDensity(const BivariateGaussian<Scalar>& model) {
  return Scalar(1) / (Scalar(2) * kPi<Scalar> * model.std_phi * model.std_theta);
}

template <typename Scalar>
Scalar LogGaussianPdf(const AngularOffset<Scalar>& x,
                      const BivariateGaussian<Scalar>& model) {
  using std::log;
  return log(PeakDensity(model)) - SquaredMahalanobis(x, model) / Scalar(2);
}

template <typename Scalar>
Scalar GaussianPdf(const AngularOffset<Scalar>& x,
                   const BivariateGaussian<Scalar>& model) {
  using std::exp;
  return PeakDensity(model) * exp(-SquaredMahalanobis(x, model) / Scalar(2));
}

}  // namespace casualgaze

#endif  // CASUALGAZE_GAUSSIAN_H_
