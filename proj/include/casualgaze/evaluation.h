#ifndef CASUALGAZE_EVALUATION_H_
#define CASUALGAZE_EVALUATION_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "casualgaze/recognizer.h"
#include "casualgaze/scene.h"
#include "casualgaze/trial.h"

namespace casualgaze {

// Device categories: normal, small, special location, close proximity,
// disparity in size.
enum class DeviceCase { kN, kS, kL, kC, kD };

std::string_view DeviceCaseName(DeviceCase c);
std::vector<DeviceCase> AllDeviceCases();

struct CaseThresholds {
  // 0.4 m seen from 3 m.
  double small_angular_diameter = 7.6;
  double special_head_angle = 90.0;
  // Neighbor radius as a multiple of the gaze gate.
  double proximity_factor = 1.5;
  double ratio_low = 0.5;
  double ratio_high = 2.0;
};

// Priority L > D > C > S > N. Sizes are compared as angular diameters seen
// from the scene's eye position.
DeviceCase ClassifyDeviceCase(const Device& device, const Scene& scene,
                              double gate_gaze,
                              const CaseThresholds& thresholds = {});

struct TrialOutcome {
  int trial_id = 0;
  int target_id = 0;
  Technique technique = Technique::kCasualGaze;
  DeviceCase device_case = DeviceCase::kN;
  double start_t = 0.0;
  std::optional<double> first_detect_t;
  double confirm_t = 0.0;
  std::optional<int> final_winner;
  bool correct = false;
  int error_count = 0;

  std::optional<double> dt() const;
  std::optional<double> ct() const;
  std::optional<double> st() const;
};

// |predictions| must align one-to-one with |trial.samples| (kLengthMismatch
// otherwise). Detection is the first frame whose stable winner is the target
// and stays the winner through confirmation. Errors count the frames at which
// a stable wrong winner newly appears.
TrialOutcome ScoreTrial(const TrialRecord& trial,
                        std::span<const Prediction> predictions,
                        Technique technique,
                        DeviceCase device_case = DeviceCase::kN);

struct TechniqueSummary {
  int trials = 0;
  int correct = 0;
  int detected = 0;
  double accuracy = 0.0;
  std::optional<double> mean_dt;
  std::optional<double> mean_ct;
  std::optional<double> mean_st;
  double mean_errors = 0.0;
};

struct ExperimentReport {
  std::map<Technique, TechniqueSummary> overall;
  std::map<Technique, std::map<DeviceCase, TechniqueSummary>> by_case;
  nlohmann::json config;
  std::uint64_t seed = 0;
};

TechniqueSummary Summarize(std::span<const TrialOutcome> outcomes);

// Throws kEmptyInput for an empty outcome list.
ExperimentReport Aggregate(std::span<const TrialOutcome> outcomes);

nlohmann::json ReportToJson(const ExperimentReport& report);
// One row per (technique, case) plus an "all" row per technique.
std::string ReportToCsv(const ExperimentReport& report);

}  // namespace casualgaze

#endif  // CASUALGAZE_EVALUATION_H_
