#ifndef CASUALGAZE_TRIAL_H_
#define CASUALGAZE_TRIAL_H_

#include <optional>
#include <string_view>
#include <vector>

#include "casualgaze/geometry.h"
#include "casualgaze/recognizer.h"

namespace casualgaze {

enum class ProfileKind { kNormal, kOvershootFoldback, kUndershootThrough };

std::string_view ProfileKindName(ProfileKind kind);
std::optional<ProfileKind> ParseProfileKind(std::string_view name);

// One selection task: the task starts at |start_t|, gaze samples follow, and
// the simulated user confirms at |confirm_t|.
struct TrialRecord {
  int trial_id = 0;
  int target_id = 0;
  ProfileKind profile = ProfileKind::kNormal;
  double start_t = 0.0;
  double confirm_t = 0.0;
  Angular endpoint;
  std::vector<GazeSample> samples;
};

}  // namespace casualgaze

#endif  // CASUALGAZE_TRIAL_H_
