#include "casualgaze/evaluation.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "casualgaze/error.h"

namespace casualgaze {

std::string_view DeviceCaseName(DeviceCase c) {
  switch (c) {
    case DeviceCase::kN: return "N";
    case DeviceCase::kS: return "S";
    case DeviceCase::kL: return "L";
    case DeviceCase::kC: return "C";
    case DeviceCase::kD: return "D";
  }
  return "?";
}

std::vector<DeviceCase> AllDeviceCases() {
  return {DeviceCase::kN, DeviceCase::kS, DeviceCase::kL, DeviceCase::kC,
          DeviceCase::kD};
}

namespace {

double AngularDiameter(const Device& d, const Vec3d& eye) {
  const double dist = (d.position - eye).norm();
  if (dist <= d.radius) return 180.0;
  return 2.0 * RadToDeg(std::asin(d.radius / dist));
}

}  // namespace

DeviceCase ClassifyDeviceCase(const Device& device, const Scene& scene,
                              double gate_gaze,
                              const CaseThresholds& thresholds) {
  const UserPose& user = scene.user;
  const Vec3d from_head = device.position - user.head_pos;
  if (from_head.squaredNorm() > 0.0 &&
      AngleBetween(user.head_forward, from_head) > thresholds.special_head_angle)
    return DeviceCase::kL;

  const Vec3d from_eye = device.position - user.eye_pos;
  const Device* nearest = nullptr;
  double nearest_angle = std::numeric_limits<double>::infinity();
  for (const Device& other : scene.devices) {
    if (other.id == device.id) continue;
    const Vec3d v = other.position - user.eye_pos;
    if (v.squaredNorm() == 0.0 || from_eye.squaredNorm() == 0.0) continue;
    const double angle = AngleBetween(from_eye, v);
    if (angle < nearest_angle) {
      nearest_angle = angle;
      nearest = &other;
    }
  }
  const double diameter = AngularDiameter(device, user.eye_pos);
  if (nearest && nearest_angle < thresholds.proximity_factor * gate_gaze) {
    const double ratio = diameter / AngularDiameter(*nearest, user.eye_pos);
    if (ratio < thresholds.ratio_low || ratio > thresholds.ratio_high)
      return DeviceCase::kD;
    return DeviceCase::kC;
  }
  if (diameter < thresholds.small_angular_diameter) return DeviceCase::kS;
  return DeviceCase::kN;
}

std::optional<double> TrialOutcome::dt() const {
  if (!first_detect_t) return std::nullopt;
  return *first_detect_t - start_t;
}

std::optional<double> TrialOutcome::ct() const {
  if (!first_detect_t) return std::nullopt;
  return confirm_t - *first_detect_t;
}

std::optional<double> TrialOutcome::st() const {
  if (!first_detect_t) return std::nullopt;
  return *dt() + *ct();
}

TrialOutcome ScoreTrial(const TrialRecord& trial,
                        std::span<const Prediction> predictions,
                        Technique technique, DeviceCase device_case) {
  if (predictions.size() != trial.samples.size())
    throw Error(ErrorCode::kLengthMismatch,
                "prediction count does not match sample count");
  TrialOutcome out;
  out.trial_id = trial.trial_id;
  out.target_id = trial.target_id;
  out.technique = technique;
  out.device_case = device_case;
  out.start_t = trial.start_t;
  out.confirm_t = trial.confirm_t;

  // Frames [0, last] happen at or before confirmation.
  long last = -1;
  for (size_t i = 0; i < trial.samples.size(); ++i) {
    if (trial.samples[i].t <= trial.confirm_t) last = static_cast<long>(i);
  }
  if (last >= 0) {
    out.final_winner = predictions[last].winner;
    out.correct = out.final_winner == trial.target_id;
    long run_start = last + 1;
    while (run_start > 0 && predictions[run_start - 1].winner == trial.target_id)
      --run_start;
    for (long i = run_start; i <= last; ++i) {
      if (predictions[i].stable) {
        out.first_detect_t = trial.samples[i].t;
        break;
      }
    }
  }

  for (size_t i = 0; i < predictions.size(); ++i) {
    const Prediction& p = predictions[i];
    if (!p.stable || !p.winner || *p.winner == trial.target_id) continue;
    const bool continuing = i > 0 && predictions[i - 1].stable &&
                            predictions[i - 1].winner == p.winner;
    if (!continuing) ++out.error_count;
  }
  return out;
}

TechniqueSummary Summarize(std::span<const TrialOutcome> outcomes) {
  TechniqueSummary s;
  double dt = 0.0, ct = 0.0, st = 0.0, errors = 0.0;
  for (const TrialOutcome& o : outcomes) {
    ++s.trials;
    if (o.correct) ++s.correct;
    errors += o.error_count;
    if (o.first_detect_t) {
      ++s.detected;
      dt += *o.dt();
      ct += *o.ct();
      st += *o.st();
    }
  }
  if (s.trials > 0) {
    s.accuracy = static_cast<double>(s.correct) / s.trials;
    s.mean_errors = errors / s.trials;
  }
  if (s.detected > 0) {
    s.mean_dt = dt / s.detected;
    s.mean_ct = ct / s.detected;
    s.mean_st = st / s.detected;
  }
  return s;
}

ExperimentReport Aggregate(std::span<const TrialOutcome> outcomes) {
  if (outcomes.empty())
    throw Error(ErrorCode::kEmptyInput, "no trial outcomes to aggregate");
  std::map<Technique, std::vector<TrialOutcome>> by_tech;
  std::map<Technique, std::map<DeviceCase, std::vector<TrialOutcome>>> by_case;
  for (const TrialOutcome& o : outcomes) {
    by_tech[o.technique].push_back(o);
    by_case[o.technique][o.device_case].push_back(o);
  }
  ExperimentReport report;
  for (const auto& [tech, list] : by_tech) report.overall[tech] = Summarize(list);
  for (const auto& [tech, cases] : by_case) {
    for (const auto& [c, list] : cases) report.by_case[tech][c] = Summarize(list);
  }
  return report;
}

namespace {

nlohmann::json OptionalToJson(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json SummaryToJson(const TechniqueSummary& s) {
  return {{"trials", s.trials},
          {"correct", s.correct},
          {"detected", s.detected},
          {"accuracy", s.accuracy},
          {"mean_dt", OptionalToJson(s.mean_dt)},
          {"mean_ct", OptionalToJson(s.mean_ct)},
          {"mean_st", OptionalToJson(s.mean_st)},
          {"mean_errors", s.mean_errors}};
}

std::string CsvOptional(const std::optional<double>& v) {
  return v ? fmt::format("{:.6f}", *v) : std::string();
}

void CsvRow(std::ostringstream& out, std::string_view tech,
            std::string_view label, const TechniqueSummary& s) {
  out << fmt::format("{},{},{},{},{:.6f},{},{},{},{},{:.6f}\n", tech, label,
                     s.trials, s.correct, s.accuracy, s.detected,
                     CsvOptional(s.mean_dt), CsvOptional(s.mean_ct),
                     CsvOptional(s.mean_st), s.mean_errors);
}

}  // namespace

nlohmann::json ReportToJson(const ExperimentReport& report) {
  nlohmann::json techniques = nlohmann::json::object();
  for (const auto& [tech, summary] : report.overall) {
    nlohmann::json entry = SummaryToJson(summary);
    nlohmann::json cases = nlohmann::json::object();
    auto it = report.by_case.find(tech);
    if (it != report.by_case.end()) {
      for (const auto& [c, s] : it->second)
        cases[std::string(DeviceCaseName(c))] = SummaryToJson(s);
    }
    entry["by_case"] = std::move(cases);
    techniques[std::string(TechniqueName(tech))] = std::move(entry);
  }
  return {{"schema", "casualgaze-report/1"},
          {"seed", report.seed},
          {"config", report.config},
          {"techniques", techniques}};
}

std::string ReportToCsv(const ExperimentReport& report) {
  std::ostringstream out;
  out << "technique,case,trials,correct,accuracy,detected,mean_dt,mean_ct,"
         "mean_st,mean_errors\n";
  for (const auto& [tech, summary] : report.overall) {
    CsvRow(out, TechniqueName(tech), "all", summary);
    auto it = report.by_case.find(tech);
    if (it == report.by_case.end()) continue;
    for (const auto& [c, s] : it->second)
      CsvRow(out, TechniqueName(tech), DeviceCaseName(c), s);
  }
  return out.str();
}

}  // namespace casualgaze
