#include "casualgaze/fitting.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "casualgaze/error.h"
#include "casualgaze/simulator.h"

namespace casualgaze {

CoefficientSet FitFromEndpoints(const Scene& scene,
                                std::span<const EndpointRow> rows,
                                const BehaviorCoefficients& base,
                                FitSummary* summary) {
  if (rows.empty())
    throw Error(ErrorCode::kInsufficientData, "endpoint dataset is empty");

  const Vec3d& eye = scene.user.eye_pos;
  using Key = std::pair<int, std::vector<int>>;
  std::map<Key, std::vector<Offset>> conditions;
  std::map<int, std::vector<Offset>> per_device;
  for (const EndpointRow& row : rows) {
    const Device& target = scene.Get(row.target_id);
    const Offset offset =
        OffsetBetween(row.gaze, ToAngular(eye, target.position));
    std::vector<int> context = row.context;
    std::sort(context.begin(), context.end());
    conditions[{row.target_id, std::move(context)}].push_back(offset);
    per_device[row.target_id].push_back(offset);
  }

  PerAxis<std::vector<MeanShiftRow>> mean_rows;
  PerAxis<std::vector<StdPlaneRow>> std_rows;
  double isolated_sum = 0.0;
  double isolated_weight = 0.0;
  FitSummary s;
  s.rows = static_cast<int>(rows.size());
  for (const auto& [key, offsets] : conditions) {
    if (offsets.size() < 2) continue;
    const Gaussian g = FitGaussian(offsets);
    const Device& target = scene.Get(key.first);
    const Device* other = NearestInterferer(scene, target, key.second);
    const bool paired =
        other && AngleBetween<double>(target.position - eye,
                                      other->position - eye) <
                     2.0 * base.gate_gaze;
    if (!paired) {
      const double w = static_cast<double>(offsets.size());
      isolated_sum += w * 0.5 * (g.std_phi + g.std_theta);
      isolated_weight += w;
      ++s.isolated_conditions;
      continue;
    }
    ++s.pair_conditions;
    const Offset sep = OffsetBetween(ToAngular(eye, target.position),
                                     ToAngular(eye, other->position));
    const double size = NormalizeSize(target.diameter(),
                                      (target.position - eye).norm(),
                                      base.size_norm_mode);
    mean_rows.phi.push_back({sep.dphi, g.mean.dphi});
    mean_rows.theta.push_back({sep.dtheta, g.mean.dtheta});
    std_rows.phi.push_back(
        {size, ChordAtReference(std::min(std::abs(sep.dphi), 179.0)), g.std_phi});
    std_rows.theta.push_back(
        {size, ChordAtReference(std::min(std::abs(sep.dtheta), 179.0)),
         g.std_theta});
  }
  if (s.pair_conditions < 3)
    throw Error(ErrorCode::kInsufficientData,
                "need at least 3 paired conditions to fit the model, found " +
                    std::to_string(s.pair_conditions));

  CoefficientSet out;
  out.coeffs = base;
  out.coeffs.mean_shift.phi = FitMeanCoeffs(mean_rows.phi);
  out.coeffs.mean_shift.theta = FitMeanCoeffs(mean_rows.theta);
  out.coeffs.std_plane.phi = FitStdCoeffs(std_rows.phi);
  out.coeffs.std_plane.theta = FitStdCoeffs(std_rows.theta);
  if (isolated_weight > 0.0)
    out.coeffs.isolated_std =
        std::max(kStdEpsilon, isolated_sum / isolated_weight);
  for (const auto& [id, offsets] : per_device) {
    if (offsets.size() >= 2) out.device_models[id] = FitGaussian(offsets);
  }
  if (summary) *summary = s;
  return out;
}

}  // namespace casualgaze
