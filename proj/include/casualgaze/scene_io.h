#ifndef CASUALGAZE_SCENE_IO_H_
#define CASUALGAZE_SCENE_IO_H_

// File formats. All documents are JSON with a `schema` tag; datasets are
// comma-separated text with a header line.
//
//   scene        casualgaze-scene/1
//   coefficients casualgaze-coeffs/1
//   endpoints    trial_id,target_id,gaze_phi,gaze_theta,timestamp_ms[,context]
//                (context: ids separated by ';', empty = whole scene)
//   stream       t,gaze_x,gaze_y,gaze_z,head_x,head_y,head_z,
//                fwd_x,fwd_y,fwd_z,eye_x,eye_y,eye_z
//                optionally prefixed by trial_id,target_id

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "casualgaze/behavior_model.h"
#include "casualgaze/scene.h"

namespace casualgaze {

struct GazeSample;
struct Prediction;

inline constexpr std::string_view kSceneSchema = "casualgaze-scene/1";
inline constexpr std::string_view kCoeffsSchema = "casualgaze-coeffs/1";

nlohmann::json SceneToJson(const Scene& scene);
// Parses and validates. Warnings from validation are appended to |warnings|.
Scene SceneFromJson(const nlohmann::json& doc,
                    std::vector<std::string>* warnings = nullptr);

Scene LoadScene(const std::filesystem::path& path,
                std::vector<std::string>* warnings = nullptr);
void SaveScene(const Scene& scene, const std::filesystem::path& path);

// Resolves |spec| as a file path first, then as a built-in scene name.
// Throws kNotFound naming |spec| when neither exists.
Scene ResolveScene(const std::string& spec,
                   std::vector<std::string>* warnings = nullptr);

struct CoefficientSet {
  BehaviorCoefficients coeffs = BehaviorCoefficients::Defaults();
  DeviceModels device_models;
};

nlohmann::json CoefficientsToJson(const CoefficientSet& set);
CoefficientSet CoefficientsFromJson(const nlohmann::json& doc);
CoefficientSet LoadCoefficients(const std::filesystem::path& path);
void SaveCoefficients(const CoefficientSet& set,
                      const std::filesystem::path& path);

std::string_view SizeNormModeName(SizeNormMode mode);
SizeNormMode ParseSizeNormMode(std::string_view name);

struct EndpointRow {
  int trial_id = 0;
  int target_id = 0;
  Angular gaze;
  double timestamp_ms = 0.0;
  std::vector<int> context;
};

void WriteEndpointHeader(std::ostream& out);
void WriteEndpointRow(std::ostream& out, const EndpointRow& row);
std::vector<EndpointRow> ReadEndpoints(std::istream& in);
std::vector<EndpointRow> ReadEndpoints(const std::filesystem::path& path);

struct StreamRecord {
  std::optional<int> trial_id;
  std::optional<int> target_id;
  double t = 0.0;
  Vec3d gaze_dir = Vec3d::UnitZ();
  Vec3d head_pos = Vec3d::Zero();
  Vec3d head_forward = Vec3d::UnitZ();
  Vec3d eye_pos = Vec3d::Zero();
};

void WriteStreamHeader(std::ostream& out, bool tagged);
void WriteStreamRecord(std::ostream& out, const StreamRecord& record);
// Throws kParseError on a malformed line. Returns nullopt for blank lines,
// comments and header lines.
std::optional<StreamRecord> ParseStreamRecord(std::string_view line);

GazeSample ToGazeSample(const StreamRecord& record);
StreamRecord ToStreamRecord(const GazeSample& sample);

nlohmann::json PredictionToJson(const Prediction& p);

// Formats with enough digits to round-trip a double exactly.
std::string FormatDouble(double v);

}  // namespace casualgaze

#endif  // CASUALGAZE_SCENE_IO_H_
