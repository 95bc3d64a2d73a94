#ifndef CASUALGAZE_TRIAL_LOG_H_
#define CASUALGAZE_TRIAL_LOG_H_

// A trial log is a directory holding
//   trials.csv   trial_id,target_id,profile,start_t,confirm_t,
//                endpoint_phi,endpoint_theta
//   streams.csv  tagged stream records (see scene_io.h)

#include <filesystem>
#include <vector>

#include "casualgaze/trial.h"

namespace casualgaze {

inline constexpr const char* kTrialsFile = "trials.csv";
inline constexpr const char* kStreamsFile = "streams.csv";

void WriteTrialLog(const std::vector<TrialRecord>& trials,
                   const std::filesystem::path& dir);

// Throws kIo for missing files, kParseError for malformed rows and
// kValidationError for stream records referring to unknown trials.
std::vector<TrialRecord> ReadTrialLog(const std::filesystem::path& dir);

}  // namespace casualgaze

#endif  // CASUALGAZE_TRIAL_LOG_H_
