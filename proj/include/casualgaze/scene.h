#ifndef CASUALGAZE_SCENE_H_
#define CASUALGAZE_SCENE_H_

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "casualgaze/geometry.h"

namespace casualgaze {

struct Device {
  int id = 0;
  std::string name;
  Vec3d position = Vec3d::Zero();
  // Bounding sphere radius in meters. The behavior model's size is 2 * radius.
  double radius = 0.1;

  double diameter() const { return 2.0 * radius; }
};

struct UserPose {
  Vec3d eye_pos{0.0, 1.2, 0.0};
  Vec3d head_pos{0.0, 1.2, 0.0};
  Vec3d head_forward{0.0, 0.0, 1.0};
};

struct Scene {
  std::string name;
  bool approximation = false;
  std::vector<Device> devices;
  UserPose user;
  // Optional trial contexts: groups of device ids that are present together.
  // Empty means every trial sees the whole scene.
  std::vector<std::vector<int>> contexts;

  const Device* Find(int id) const;
  const Device& Get(int id) const;  // throws kNotFound
  std::vector<int> Ids() const;

  // Returns the devices belonging to |context|, or all devices when empty.
  std::vector<const Device*> Members(const std::vector<int>& context) const;

  // Throws kValidationError on duplicate ids, nonpositive radii, an empty
  // device list, or a zero-length forward vector. A forward vector that is
  // off unit length by more than 1e-3 is renormalized and reported through
  // |warnings| when non-null.
  void Validate(std::vector<std::string>* warnings = nullptr);
};

// Warnings about layouts the model does not handle: overlapping bounding
// spheres and devices too close in angle to be separated.
std::vector<std::string> ValidateSceneLayout(const Scene& scene);

// Built-in layouts. Positions are hand placed approximations of typical rooms.
//   study2_room  - 18 household devices around a seated user
//   living12     - 12-device living space
//   office20     - 20-device office
//   office10     - the office reduced to 10 devices
//   study1_pairs - target/interferer pairs at 3 m for coefficient fitting,
//                  one trial context per pair
std::vector<std::string> BuiltinSceneNames();
std::optional<Scene> BuiltinScene(std::string_view name);

}  // namespace casualgaze

#endif  // CASUALGAZE_SCENE_H_
