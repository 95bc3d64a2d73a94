#ifndef CASUALGAZE_FITTING_H_
#define CASUALGAZE_FITTING_H_

#include <span>

#include "casualgaze/behavior_model.h"
#include "casualgaze/scene.h"
#include "casualgaze/scene_io.h"

namespace casualgaze {

struct FitSummary {
  int rows = 0;
  int pair_conditions = 0;
  int isolated_conditions = 0;
};

// Recovers behavior coefficients from an endpoint dataset recorded in |scene|.
// Rows are grouped into conditions by (target, context); each condition's
// interferer is its nearest device in angle. Conditions whose interferer lies
// within twice the gaze gate feed the mean-shift lines and std planes, the
// rest feed isolated_std. Gates and size_norm_mode are copied from |base|.
// Per-device Gaussians over all rows of each target are included.
//
// Throws kInsufficientData when there are no rows or too few pair conditions,
// kDegenerateDesign when the conditions do not span the model's inputs.
CoefficientSet FitFromEndpoints(const Scene& scene,
                                std::span<const EndpointRow> rows,
                                const BehaviorCoefficients& base,
                                FitSummary* summary = nullptr);

}  // namespace casualgaze

#endif  // CASUALGAZE_FITTING_H_
