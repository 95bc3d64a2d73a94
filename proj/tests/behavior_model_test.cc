#include "casualgaze/behavior_model.h"

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "casualgaze/error.h"
#include "casualgaze/fitting.h"
#include "casualgaze/gaussian.h"
#include "casualgaze/simulator.h"

namespace casualgaze {
namespace {

BehaviorCoefficients PlaneCoeffs(double a, double b, double c) {
  BehaviorCoefficients k = BehaviorCoefficients::Defaults();
  k.std_plane.phi = {a, b, c};
  k.std_plane.theta = {a, b, c};
  return k;
}

Device At(int id, const Angular& where, double dist, double radius) {
  return Device{id, "d" + std::to_string(id),
                Vec3d(0, 1.2, 0) + dist * ToDirection(where), radius};
}

TEST(PairMeanShift, ShiftAwayFromInterferer) {
  BehaviorCoefficients k = BehaviorCoefficients::Defaults();
  k.mean_shift.phi = {0.2, 0.0};
  const Offset o = PairMeanShift({0, 0}, {20, 0}, k);
  EXPECT_NEAR(o.dphi, -4.0, 1e-12);
}

TEST(PairMeanShift, ZeroSeparation) {
  BehaviorCoefficients k = BehaviorCoefficients::Defaults();
  const Offset o = PairMeanShift({12, -3}, {12, -3}, k);
  EXPECT_EQ(o.dphi, 0.0);
  EXPECT_EQ(o.dtheta, 0.0);
}

TEST(PairMeanShift, ThetaWithIntercept) {
  BehaviorCoefficients k = BehaviorCoefficients::Defaults();
  k.mean_shift.theta = {0.1, 0.5};
  EXPECT_NEAR(PairMeanShift({0, 10}, {0, -10}, k).dtheta, 2.5, 1e-12);
}

TEST(PairMeanShift, AcrossRearSeam) {
  BehaviorCoefficients k = BehaviorCoefficients::Defaults();
  k.mean_shift.phi = {0.2, 0.0};
  // Target at 170, interferer at -170: the interferer is 20 degrees to the
  // right, so the shift is to the left.
  EXPECT_NEAR(PairMeanShift({170, 0}, {-170, 0}, k).dphi, -4.0, 1e-9);
}

TEST(PairStd, PlaneSubstitution) {
  const BehaviorCoefficients k = PlaneCoeffs(10, 1, 2);
  const PerAxis<double> s = PairStd(0.5, 3.0, 20.0, 0.0, k);
  EXPECT_NEAR(s.phi, 10 * 0.5 + 6 * std::tan(10 * kPi<double> / 180) + 2,
              1e-9);
  EXPECT_NEAR(s.phi, 8.058, 5e-4);
  EXPECT_NEAR(s.theta, 7.0, 1e-9);
}

TEST(PairStd, InterceptOnly) {
  const PerAxis<double> s = PairStd(0.0, 3.0, 0.0, 0.0, PlaneCoeffs(10, 1, 2));
  EXPECT_NEAR(s.phi, 2.0, 1e-12);
  EXPECT_NEAR(s.theta, 2.0, 1e-12);
}

TEST(PairStd, ClampedAtEpsilon) {
  const PerAxis<double> s = PairStd(0.0, 3.0, 0.0, 0.0, PlaneCoeffs(0, 0, -1));
  EXPECT_EQ(s.phi, kStdEpsilon);
  EXPECT_EQ(s.theta, kStdEpsilon);
}

TEST(PairStd, SeparationBeyondChordDomainIsClamped) {
  const PerAxis<double> s = PairStd(0.5, 3.0, 180.0, -180.0,
                                    BehaviorCoefficients::Defaults());
  EXPECT_TRUE(std::isfinite(s.phi));
  EXPECT_TRUE(std::isfinite(s.theta));
}

TEST(PairModel, MirrorTwins) {
  const BehaviorCoefficients k = BehaviorCoefficients::Defaults();
  const Vec3d eye(0, 1.2, 0);
  const Device left = At(1, {-10, 2}, 3.0, 0.2);
  const Device right = At(2, {10, 2}, 3.0, 0.2);
  const Gaussian gl = PairModel(left, right, eye, k);
  const Gaussian gr = PairModel(right, left, eye, k);
  EXPECT_NEAR(gl.mean.dphi, -gr.mean.dphi, 1e-9);
  EXPECT_NEAR(gl.mean.dtheta, gr.mean.dtheta, 1e-9);
  EXPECT_NEAR(gl.std_phi, gr.std_phi, 1e-9);
  EXPECT_NEAR(gl.std_theta, gr.std_theta, 1e-9);
  EXPECT_LT(gl.mean.dphi, 0.0);
}

TEST(PairModel, CoincidentDirectionGivesIntercept) {
  BehaviorCoefficients k = BehaviorCoefficients::Defaults();
  k.mean_shift.phi.b = 0.7;
  k.mean_shift.theta.b = -0.3;
  const Vec3d eye(0, 1.2, 0);
  const Device near = At(1, {25, 5}, 2.0, 0.2);
  const Device far = At(2, {25, 5}, 4.0, 0.2);
  const Gaussian g = PairModel(near, far, eye, k);
  EXPECT_NEAR(g.mean.dphi, 0.7, 1e-9);
  EXPECT_NEAR(g.mean.dtheta, -0.3, 1e-9);
}

TEST(PairModel, StdAtLeastEpsilon) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-3, 3);
  std::uniform_real_distribution<double> r(0.01, 1.0);
  BehaviorCoefficients k = PlaneCoeffs(-5, -2, 0.5);
  const Vec3d eye(0, 1.2, 0);
  for (int i = 0; i < 1000; ++i) {
    const Device a{1, "a", Vec3d(u(rng), u(rng), u(rng)), r(rng)};
    const Device b{2, "b", Vec3d(u(rng), u(rng), u(rng)), r(rng)};
    if ((a.position - eye).norm() < 1e-3 || (b.position - eye).norm() < 1e-3)
      continue;
    const Gaussian g = PairModel(a, b, eye, k);
    EXPECT_GE(g.std_phi, kStdEpsilon);
    EXPECT_GE(g.std_theta, kStdEpsilon);
  }
}

TEST(PairModel, YawEquivariance) {
  const BehaviorCoefficients k = BehaviorCoefficients::Defaults();
  const Vec3d eye(0, 1.2, 0);
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> phi(-60, 60);
  std::uniform_real_distribution<double> theta(-40, 40);
  std::uniform_real_distribution<double> yaw(-100, 100);
  std::uniform_real_distribution<double> off(-15, 15);
  for (int i = 0; i < 1000; ++i) {
    const Angular ta{phi(rng), theta(rng)};
    const Angular da{ta.phi + off(rng), std::clamp(ta.theta + off(rng), -80.0, 80.0)};
    const Offset q{off(rng), off(rng)};
    const double y = yaw(rng);
    const Gaussian g0 = PairModel(At(1, ta, 3, 0.2), At(2, da, 2.5, 0.3), eye, k);
    const Gaussian g1 = PairModel(At(1, {ta.phi + y, ta.theta}, 3, 0.2),
                                  At(2, {da.phi + y, da.theta}, 2.5, 0.3), eye, k);
    EXPECT_NEAR(Mahalanobis(q, g0), Mahalanobis(q, g1), 1e-6);
  }
}

TEST(IsolatedModel, DefaultsAndSizeIndependence) {
  const BehaviorCoefficients k = BehaviorCoefficients::Defaults();
  const Gaussian small = IsolatedModel(At(1, {0, 0}, 3, 0.05), k);
  const Gaussian big = IsolatedModel(At(1, {40, 10}, 6, 1.5), k);
  EXPECT_EQ(small.std_phi, 8.59);
  EXPECT_EQ(small.std_theta, 8.59);
  EXPECT_EQ(small, big);
  // Circular contours: equal density at equal radius in every direction.
  const double p0 = GaussianPdf<double>({5, 0}, small);
  EXPECT_NEAR(GaussianPdf<double>({0, 5}, small), p0, 1e-15);
  EXPECT_NEAR(GaussianPdf<double>({-3, -4}, small), p0, 1e-15);
}

TEST(Gaussian, PeakAndOneSigma) {
  const Gaussian unit = Gaussian::Make({0, 0}, 1, 1);
  EXPECT_NEAR(GaussianPdf<double>({0, 0}, unit), 0.159155, 1e-6);
  const Gaussian g = Gaussian::Make({1, -2}, 3, 5);
  EXPECT_NEAR(GaussianPdf<double>({4, -2}, g),
              PeakDensity(g) * std::exp(-0.5), 1e-15);
}

TEST(Gaussian, MahalanobisExamples) {
  const Gaussian g = Gaussian::Make({1, -2}, 3, 5);
  EXPECT_EQ(Mahalanobis<double>({1, -2}, g), 0.0);
  EXPECT_NEAR(Mahalanobis<double>({7, -2}, g), 2.0, 1e-12);
  EXPECT_NEAR(Mahalanobis<double>({4, 3}, g), std::sqrt(2.0), 1e-12);
}

TEST(Gaussian, IntegratesToOne) {
  // Midpoint quadrature over +-8 sigma.
  const Gaussian g = Gaussian::Make({0.5, -1.0}, 2.0, 3.5);
  const int n = 800;
  const double hp = 16 * g.std_phi / n;
  const double ht = 16 * g.std_theta / n;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Offset x{g.mean.dphi - 8 * g.std_phi + (i + 0.5) * hp,
                     g.mean.dtheta - 8 * g.std_theta + (j + 0.5) * ht};
      sum += GaussianPdf(x, g) * hp * ht;
    }
  }
  EXPECT_NEAR(sum, 1.0, 1e-6);
}

TEST(Gaussian, LogPdfMatchesMahalanobis) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> m(-20, 20);
  std::uniform_real_distribution<double> s(0.1, 15);
  for (int i = 0; i < 10000; ++i) {
    const Gaussian g = Gaussian::Make({m(rng), m(rng)}, s(rng), s(rng));
    const Offset x{m(rng), m(rng)};
    const double d = Mahalanobis(x, g);
    EXPECT_NEAR(LogGaussianPdf(x, g) - std::log(PeakDensity(g)), -d * d / 2,
                1e-9 * std::max(1.0, d * d));
  }
}

TEST(Gaussian, PeakIsMaximum) {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> m(-20, 20);
  const Gaussian g = Gaussian::Make({1, 1}, 2, 7);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_LE(GaussianPdf<double>({m(rng), m(rng)}, g), PeakDensity(g));
  }
}

TEST(Gaussian, ClampStd) {
  EXPECT_EQ(Gaussian::ClampStd(0.0), kStdEpsilon);
  EXPECT_EQ(Gaussian::ClampStd(-3.0), kStdEpsilon);
  EXPECT_EQ(Gaussian::ClampStd(std::nan("")), kStdEpsilon);
  EXPECT_EQ(Gaussian::ClampStd(2.5), 2.5);
}

TEST(FitGaussian, IdenticalSamples) {
  const std::vector<Offset> s(10, Offset{1.5, -0.5});
  const Gaussian g = FitGaussian(s);
  EXPECT_EQ(g.mean.dphi, 1.5);
  EXPECT_EQ(g.mean.dtheta, -0.5);
  EXPECT_EQ(g.std_phi, kStdEpsilon);
  EXPECT_EQ(g.std_theta, kStdEpsilon);
}

TEST(FitGaussian, TwoSamples) {
  const std::vector<Offset> s{{0, 0}, {2, 0}};
  const Gaussian g = FitGaussian(s);
  EXPECT_NEAR(g.mean.dphi, 1.0, 1e-12);
  EXPECT_NEAR(g.mean.dtheta, 0.0, 1e-12);
  EXPECT_NEAR(g.std_phi, std::sqrt(2.0), 1e-12);
}

TEST(FitGaussian, TooFewSamples) {
  const std::vector<Offset> one{{1, 1}};
  try {
    FitGaussian(one);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientData);
  }
}

TEST(FitGaussian, MonteCarloRecovery) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> p(1.0, 3.0);
  std::normal_distribution<double> t(-2.0, 5.0);
  std::vector<Offset> s(100000);
  for (Offset& o : s) o = {p(rng), t(rng)};
  const Gaussian g = FitGaussian(s);
  EXPECT_NEAR(g.mean.dphi, 1.0, 0.1);
  EXPECT_NEAR(g.mean.dtheta, -2.0, 0.1);
  EXPECT_NEAR(g.std_phi / 3.0, 1.0, 0.02);
  EXPECT_NEAR(g.std_theta / 5.0, 1.0, 0.02);
}

TEST(FitGaussian, ShiftInvariance) {
  std::mt19937_64 rng(37);
  std::normal_distribution<double> n(0, 4);
  std::vector<Offset> s(500), shifted(500);
  for (size_t i = 0; i < s.size(); ++i) {
    s[i] = {n(rng), n(rng)};
    shifted[i] = {s[i].dphi + 7.25, s[i].dtheta - 3.5};
  }
  const Gaussian a = FitGaussian(s);
  const Gaussian b = FitGaussian(shifted);
  EXPECT_NEAR(b.mean.dphi, a.mean.dphi + 7.25, 1e-9);
  EXPECT_NEAR(b.mean.dtheta, a.mean.dtheta - 3.5, 1e-9);
  EXPECT_NEAR(b.std_phi, a.std_phi, 1e-9);
  EXPECT_NEAR(b.std_theta, a.std_theta, 1e-9);
}

TEST(FitMeanCoeffs, ExactLine) {
  std::vector<MeanShiftRow> rows;
  for (double s : {-30.0, -10.0, 5.0, 12.0, 40.0}) rows.push_back({s, 0.2 * s});
  const MeanShiftLine l = FitMeanCoeffs(rows);
  EXPECT_NEAR(l.a, 0.2, 1e-12);
  EXPECT_NEAR(l.b, 0.0, 1e-12);
}

TEST(FitMeanCoeffs, TwoPointsInterpolate) {
  const std::vector<MeanShiftRow> rows{{1.0, 3.0}, {3.0, 7.0}};
  const MeanShiftLine l = FitMeanCoeffs(rows);
  EXPECT_NEAR(l.a, 2.0, 1e-12);
  EXPECT_NEAR(l.b, 1.0, 1e-12);
}

TEST(FitMeanCoeffs, NoisySlope) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> sep(-40, 40);
  std::normal_distribution<double> noise(0, 0.5);
  std::vector<MeanShiftRow> rows(200);
  for (auto& r : rows) {
    r.separation = sep(rng);
    r.observed_mean = 0.2 * r.separation + noise(rng);
  }
  EXPECT_NEAR(FitMeanCoeffs(rows).a, 0.2, 0.02);
}

TEST(FitMeanCoeffs, Errors) {
  const std::vector<MeanShiftRow> one{{1.0, 1.0}};
  EXPECT_THROW(FitMeanCoeffs(one), Error);
  const std::vector<MeanShiftRow> same{{5.0, 1.0}, {5.0, 2.0}, {5.0, 3.0}};
  try {
    FitMeanCoeffs(same);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateDesign);
  }
}

TEST(FitStdCoeffs, ExactPlane) {
  std::vector<StdPlaneRow> rows;
  for (double s : {0.25, 0.5, 0.75, 1.0})
    for (double c : {0.5, 1.0, 2.0}) rows.push_back({s, c, 10 * s + c + 2});
  const StdPlane p = FitStdCoeffs(rows);
  EXPECT_NEAR(p.a, 10.0, 1e-9);
  EXPECT_NEAR(p.b, 1.0, 1e-9);
  EXPECT_NEAR(p.c, 2.0, 1e-9);
}

TEST(FitStdCoeffs, NoisyPlane) {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> size(0.2, 1.2);
  std::uniform_real_distribution<double> chord(0.1, 3.0);
  std::normal_distribution<double> noise(0, 0.3);
  std::vector<StdPlaneRow> rows(500);
  for (auto& r : rows) {
    r.normalized_size = size(rng);
    r.separation_chord = chord(rng);
    r.observed_std = 10 * r.normalized_size + r.separation_chord + 2 + noise(rng);
  }
  const StdPlane p = FitStdCoeffs(rows);
  auto close = [](double got, double want) {
    return std::abs(got - want) <= std::max(0.05 * std::abs(want), 0.05);
  };
  EXPECT_TRUE(close(p.a, 10.0)) << p.a;
  EXPECT_TRUE(close(p.b, 1.0)) << p.b;
  EXPECT_TRUE(close(p.c, 2.0)) << p.c;
}

TEST(FitStdCoeffs, EqualSizesAreDegenerate) {
  std::vector<StdPlaneRow> rows;
  for (double c : {0.5, 1.0, 2.0, 3.0}) rows.push_back({0.5, c, 3 + c});
  try {
    FitStdCoeffs(rows);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateDesign);
  }
}

TEST(BehaviorCoefficients, Validate) {
  BehaviorCoefficients k = BehaviorCoefficients::Defaults();
  EXPECT_NO_THROW(k.Validate());
  k.gate_gaze = 0;
  EXPECT_THROW(k.Validate(), Error);
  k = BehaviorCoefficients::Defaults();
  k.isolated_std = 0.05;
  EXPECT_THROW(k.Validate(), Error);
  k = BehaviorCoefficients::Defaults();
  k.std_plane.phi.a = std::nan("");
  EXPECT_THROW(k.Validate(), Error);
}

// Simulate endpoints from known coefficients over the paired grid and fit them
// back.
void ExpectRecovered(const BehaviorCoefficients& truth, std::uint64_t seed) {
  const Scene scene = *BuiltinScene("study1_pairs");
  const auto rows = GenerateEndpoints(scene, truth, 5000, seed);
  const CoefficientSet fit = FitFromEndpoints(scene, rows, truth);
  auto rel = [](double got, double want, double tol) {
    return std::abs(got - want) <= tol * std::abs(want);
  };
  auto plane_ok = [](double got, double want) {
    return std::abs(got - want) <= std::max(0.10 * std::abs(want), 0.05);
  };
  const auto& f = fit.coeffs;
  EXPECT_TRUE(rel(f.mean_shift.phi.a, truth.mean_shift.phi.a, 0.10))
      << f.mean_shift.phi.a;
  EXPECT_TRUE(rel(f.mean_shift.theta.a, truth.mean_shift.theta.a, 0.10))
      << f.mean_shift.theta.a;
  EXPECT_LT(std::abs(f.mean_shift.phi.b), 0.5);
  EXPECT_LT(std::abs(f.mean_shift.theta.b), 0.5);
  for (auto [got, want] :
       {std::pair{f.std_plane.phi, truth.std_plane.phi},
        std::pair{f.std_plane.theta, truth.std_plane.theta}}) {
    EXPECT_TRUE(plane_ok(got.a, want.a)) << got.a << " vs " << want.a;
    EXPECT_TRUE(plane_ok(got.b, want.b)) << got.b << " vs " << want.b;
    EXPECT_TRUE(plane_ok(got.c, want.c)) << got.c << " vs " << want.c;
  }
  EXPECT_NEAR(f.isolated_std / truth.isolated_std, 1.0, 0.05);
  // Shift direction on compliant data.
  EXPECT_GE(f.mean_shift.phi.a, 0.0);
  EXPECT_GE(f.mean_shift.theta.a, 0.0);
}

TEST(FitRecovery, DefaultCoefficients) {
  ExpectRecovered(BehaviorCoefficients::Defaults(), 101);
}

TEST(FitRecovery, OtherCoefficientsInRange) {
  BehaviorCoefficients k = BehaviorCoefficients::Defaults();
  k.mean_shift.phi = {0.10, 0.0};
  k.mean_shift.theta = {0.22, 0.0};
  k.std_plane.phi = {4.0, 0.8, 1.5};
  k.std_plane.theta = {3.0, 1.5, 2.5};
  k.isolated_std = 7.0;
  ExpectRecovered(k, 202);
}

}  // namespace
}  // namespace casualgaze
