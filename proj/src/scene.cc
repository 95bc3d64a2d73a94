#include "casualgaze/scene.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "casualgaze/error.h"
#include "casualgaze/gaussian.h"

namespace casualgaze {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kZeroDirection: return "ZeroDirection";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kNonPositiveDistance: return "NonPositiveDistance";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kDegenerateDesign: return "DegenerateDesign";
    case ErrorCode::kEmptyBuffer: return "EmptyBuffer";
    case ErrorCode::kNonMonotonicTimestamp: return "NonMonotonicTimestamp";
    case ErrorCode::kInvalidProfile: return "InvalidProfile";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kSchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorCode::kValidationError: return "ValidationError";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

const Device* Scene::Find(int id) const {
  for (const Device& d : devices) {
    if (d.id == id) return &d;
  }
  return nullptr;
}

const Device& Scene::Get(int id) const {
  const Device* d = Find(id);
  if (!d)
    throw Error(ErrorCode::kNotFound,
                "device " + std::to_string(id) + " not in scene " + name);
  return *d;
}

std::vector<int> Scene::Ids() const {
  std::vector<int> ids;
  ids.reserve(devices.size());
  for (const Device& d : devices) ids.push_back(d.id);
  return ids;
}

std::vector<const Device*> Scene::Members(
    const std::vector<int>& context) const {
  std::vector<const Device*> out;
  if (context.empty()) {
    for (const Device& d : devices) out.push_back(&d);
  } else {
    for (int id : context) out.push_back(&Get(id));
  }
  return out;
}

void Scene::Validate(std::vector<std::string>* warnings) {
  if (devices.empty())
    throw Error(ErrorCode::kValidationError, "scene has no devices");
  std::set<int> seen;
  for (const Device& d : devices) {
    if (!seen.insert(d.id).second)
      throw Error(ErrorCode::kValidationError,
                  "duplicate device id " + std::to_string(d.id));
    if (!(d.radius > 0.0))
      throw Error(ErrorCode::kValidationError,
                  "device " + std::to_string(d.id) + " has nonpositive radius");
    if (!d.position.allFinite())
      throw Error(ErrorCode::kValidationError,
                  "device " + std::to_string(d.id) + " has non-finite position");
  }
  for (const auto& group : contexts) {
    for (int id : group) {
      if (!seen.count(id))
        throw Error(ErrorCode::kValidationError,
                    "context references unknown device " + std::to_string(id));
    }
  }
  const double norm = user.head_forward.norm();
  if (!(norm > 0.0) || !std::isfinite(norm))
    throw Error(ErrorCode::kValidationError, "head_forward has zero length");
  if (std::abs(norm - 1.0) > 1e-3) {
    user.head_forward /= norm;
    if (warnings)
      warnings->push_back("head_forward was not unit length; renormalized");
  }
}

std::vector<std::string> ValidateSceneLayout(const Scene& scene) {
  std::vector<std::string> warnings;
  const Vec3d& eye = scene.user.eye_pos;
  // Below this the clamped standard deviation dominates and the pairwise
  // models cannot separate the two devices.
  constexpr double kMinSeparationDeg = 1.0;
  const auto& devs = scene.devices;
  for (size_t i = 0; i < devs.size(); ++i) {
    for (size_t j = i + 1; j < devs.size(); ++j) {
      const Device& a = devs[i];
      const Device& b = devs[j];
      std::ostringstream pair;
      pair << a.id << " (" << a.name << ") and " << b.id << " (" << b.name
           << ")";
      if ((a.position - b.position).norm() < a.radius + b.radius)
        warnings.push_back("bounding spheres overlap: " + pair.str());
      const Vec3d va = a.position - eye;
      const Vec3d vb = b.position - eye;
      if (va.squaredNorm() > 0.0 && vb.squaredNorm() > 0.0 &&
          AngleBetween(va, vb) < kMinSeparationDeg)
        warnings.push_back("devices too close in angle to separate: " +
                           pair.str());
    }
  }
  return warnings;
}

namespace {

Device MakeDevice(int id, std::string name, double x, double y, double z,
                  double radius) {
  return Device{id, std::move(name), Vec3d(x, y, z), radius};
}

Scene Study2Room() {
  Scene s;
  s.name = "study2_room";
  s.approximation = true;
  s.devices = {
      MakeDevice(1, "clock", 0.0, 2.16, 3.16, 0.12),
      MakeDevice(2, "tv", 0.0, 1.09, 3.2, 0.3),
      MakeDevice(3, "speaker_left", -0.93, 0.87, 3.04, 0.08),
      MakeDevice(4, "speaker_right", 0.93, 0.87, 3.04, 0.08),
      MakeDevice(5, "washing_machine", 2.03, 0.35, 1.89, 0.3),
      MakeDevice(6, "refrigerator", -1.96, 1.06, 1.7, 0.3),
      MakeDevice(7, "sweeping_robot_left", -0.79, 0.17, 1.77, 0.15),
      MakeDevice(8, "sweeping_robot_right", 0.85, 0.17, 1.75, 0.15),
      MakeDevice(9, "speaker_shelf", -1.37, 1.93, -2.57, 0.08),
      MakeDevice(10, "air_conditioner", 0.49, 2.23, -2.78, 0.25),
      MakeDevice(11, "laptop_left", -1.32, 0.71, 0.53, 0.15),
      MakeDevice(12, "laptop_right", 1.3, 0.71, 0.58, 0.15),
      MakeDevice(13, "light_front_left", -1.02, 2.83, 2.3, 0.1),
      MakeDevice(14, "light_front", 0.0, 2.95, 2.1, 0.1),
      MakeDevice(15, "light_front_right", 1.02, 2.83, 2.3, 0.1),
      MakeDevice(16, "light_back_left", -1.21, 2.73, -1.72, 0.1),
      MakeDevice(17, "light_back_right", 1.21, 2.73, -1.72, 0.1),
      MakeDevice(18, "light_back", 0.0, 2.87, -1.99, 0.1),
  };
  return s;
}

Scene Living12() {
  Scene s;
  s.name = "living12";
  s.approximation = true;
  s.devices = {
      MakeDevice(1, "tv", 0.0, 1.1, 3.2, 0.6),
      MakeDevice(2, "speaker_left", -1.1, 0.9, 3.2, 0.15),
      MakeDevice(3, "speaker_right", 1.1, 0.9, 3.2, 0.15),
      MakeDevice(4, "smart_clock", 1.6, 1.9, 3.0, 0.15),
      MakeDevice(5, "floor_lamp", -2.0, 1.5, 2.5, 0.2),
      MakeDevice(6, "air_purifier", 2.0, 0.5, 2.6, 0.3),
      MakeDevice(7, "sweeping_robot", 0.8, 0.05, 1.8, 0.17),
      MakeDevice(8, "air_conditioner", 2.6, 2.2, 1.6, 0.5),
      MakeDevice(9, "ceiling_fan", -2.4, 2.4, 0.8, 0.4),
      MakeDevice(10, "light_left", -1.0, 2.7, 1.5, 0.15),
      MakeDevice(11, "light_right", 1.0, 2.7, 1.5, 0.15),
      MakeDevice(12, "light_back", 0.0, 2.7, -1.5, 0.15),
  };
  return s;
}

Scene Office20() {
  Scene s;
  s.name = "office20";
  s.approximation = true;
  s.devices = {
      MakeDevice(1, "monitor_center", 0.0, 1.25, 0.9, 0.3),
      MakeDevice(2, "monitor_left", -0.7, 1.25, 0.75, 0.3),
      MakeDevice(3, "monitor_right", 0.7, 1.25, 0.75, 0.3),
      MakeDevice(4, "laptop_left", -1.6, 0.95, 1.2, 0.18),
      MakeDevice(5, "laptop_right", 1.6, 0.95, 1.2, 0.18),
      MakeDevice(6, "computer_far_left", -1.8, 1.2, 3.0, 0.25),
      MakeDevice(7, "computer_far_right", 1.8, 1.2, 3.0, 0.25),
      MakeDevice(8, "desk_speaker_left", -0.4, 0.95, 0.8, 0.08),
      MakeDevice(9, "desk_speaker_right", 0.4, 0.95, 0.8, 0.08),
      MakeDevice(10, "printer", 2.4, 0.6, 1.8, 0.35),
      MakeDevice(11, "projector", 0.0, 2.6, 2.0, 0.2),
      MakeDevice(12, "clock", 0.0, 2.2, 3.5, 0.15),
      MakeDevice(13, "air_conditioner", -2.6, 2.3, 1.5, 0.5),
      MakeDevice(14, "fan", 2.5, 1.4, 0.2, 0.3),
      MakeDevice(15, "light_1", -1.5, 2.8, 1.5, 0.15),
      MakeDevice(16, "light_2", 0.0, 2.8, 1.0, 0.15),
      MakeDevice(17, "light_3", 1.5, 2.8, 1.5, 0.15),
      MakeDevice(18, "light_4", -1.5, 2.8, -1.5, 0.15),
      MakeDevice(19, "light_5", 1.5, 2.8, -1.5, 0.15),
      MakeDevice(20, "door_lock", 0.0, 1.1, -3.0, 0.1),
  };
  return s;
}

Scene Office10() {
  Scene full = Office20();
  Scene s;
  s.name = "office10";
  s.approximation = true;
  for (int id : {1, 2, 3, 8, 9, 10, 12, 13, 16, 20}) s.devices.push_back(full.Get(id));
  return s;
}

Scene Study1Pairs() {
  Scene s;
  s.name = "study1_pairs";
  s.approximation = false;
  const Vec3d eye = s.user.eye_pos;
  const Vec3d forward(0.0, 0.0, 1.0);
  const Vec3d right(1.0, 0.0, 0.0);
  const Vec3d up(0.0, 1.0, 0.0);
  constexpr double kSeparations[] = {2.0, 1.5, 1.0, 0.5};
  constexpr double kSizes[] = {0.25, 0.5, 0.75, 1.0};
  constexpr double kInterfererSize = 0.5;
  int id = 1;
  for (double sep : kSeparations) {
    // Both devices sit on the 3 m sphere, |sep| apart center to center.
    const double alpha = 2.0 * std::asin(sep / (2.0 * kReferenceDistance));
    for (int dir = 0; dir < 8; ++dir) {
      const double d = DegToRad(45.0 * dir);
      const Vec3d lateral = std::cos(d) * right + std::sin(d) * up;
      const Vec3d idir = std::cos(alpha) * forward + std::sin(alpha) * lateral;
      for (double size : kSizes) {
        std::ostringstream tag;
        tag << "sep" << sep << "_dir" << 45 * dir << "_size" << size;
        Device target{id, "target_" + tag.str(),
                      eye + kReferenceDistance * forward, size / 2.0};
        Device other{id + 1, "interferer_" + tag.str(),
                     eye + kReferenceDistance * idir, kInterfererSize / 2.0};
        s.contexts.push_back({target.id, other.id});
        s.devices.push_back(std::move(target));
        s.devices.push_back(std::move(other));
        id += 2;
      }
    }
  }
  return s;
}

}  // namespace

std::vector<std::string> BuiltinSceneNames() {
  return {"study2_room", "living12", "office20", "office10", "study1_pairs"};
}

std::optional<Scene> BuiltinScene(std::string_view name) {
  if (name == "study2_room") return Study2Room();
  if (name == "living12") return Living12();
  if (name == "office20") return Office20();
  if (name == "office10") return Office10();
  if (name == "study1_pairs") return Study1Pairs();
  return std::nullopt;
}

}  // namespace casualgaze
