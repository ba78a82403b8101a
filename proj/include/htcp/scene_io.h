// Copyright 2026 The HTCP Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Experiment documents (JSON, schema_version 1) and procedural scenes.
//
// Top-level fields:
//   schema_version  1
//   robot           {base?, joints[], capsules[], tool}
//   scene           exactly one of points / xyz_file / generator, plus
//                   tunnel {min, max} (or {center, rpy, half_extents}),
//                   excluded_links, safety_margin, cell_size
//   path            {targets[], max_step}; optional with a generator
//   x_init          joint vector
//   cspace          CSpaceConfig overrides
//   nullspace       NullSpaceConfig overrides and strategy
//   perturbations   {robot?, workpiece?}
//   seed            integer
// The README documents every field and its default.

#ifndef HTCP_SCENE_IO_H_
#define HTCP_SCENE_IO_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "htcp/cspace_planner.h"
#include "htcp/geometry.h"
#include "htcp/kinematics.h"
#include "htcp/nullspace_planner.h"
#include "htcp/planner.h"

namespace htcp {

struct TunnelParams {
  double length = 0.9;
  double width = 0.6;
  double height = 0.4;
  double density = 2500.0;  // points per square meter of wall
  int waypoints = 100;
  std::uint64_t seed = 0;
  // Tunnel start along x (the robot base sits at the world origin).
  double start_x = -0.15;
  // Weld seam: along the floor/right-wall corner, inset from both walls.
  double seam_inset = 0.02;
  double seam_start_x = 0.2;
  double seam_end_x = 0.5;
  // Transverse ribs hanging from the ceiling, evenly spread over the seam.
  int rib_count = 4;
  double rib_depth = 0.1;
  // Transverse stiffener plates standing on the floor against the right wall,
  // evenly spread over the seam, with a square scallop cut out of the
  // floor/wall corner so the seam passes underneath.
  int stiffener_count = 2;
  double stiffener_height = 0.12;
  double stiffener_width = 0.15;
  double scallop = 0.05;

  void validate() const;
};

struct GeneratedScene {
  Scene scene;
  TaskPath path;
};

GeneratedScene generate_tunnel_scene(const TunnelParams& params);
nlohmann::json tunnel_params_to_json(const TunnelParams& params);
// cell_size <= 0 lets the cloud pick its own grid.
GeneratedScene generate_tunnel_scene(const TunnelParams& params,
                                     double cell_size);

// Bundled six-joint welding arm (base at the world origin, on the floor)
// and a posture near the start of the default weld seam.
RobotModel reference_arm();
JointVector reference_arm_home();
// Tunnel parameters of the bundled sweeps.
TunnelParams reference_tunnel();

// One "x y z" triple per line, meters.
std::vector<Vec3> read_xyz(const std::filesystem::path& file);
void write_xyz(const std::filesystem::path& file,
               const std::vector<Vec3>& points);

// Joint offsets applied to x_init; every combination is a trial.
struct RobotPerturbation {
  std::vector<int> joints;
  std::vector<double> offsets;  // radians
};

// Rigid rotation of cloud, tunnel, and path about `pivot`: yaw about the
// world y axis, then pitch about the world z axis.
struct WorkpiecePerturbation {
  std::vector<double> yaw;    // radians
  std::vector<double> pitch;  // radians
  Vec3 pivot = Vec3::Zero();
};

struct SceneSource {
  enum class Kind { kInline, kXyzFile, kGenerator };
  Kind kind = Kind::kInline;
  std::string xyz_file;  // as written in the document
  TunnelParams generator;
};

struct ExperimentSpec {
  std::optional<RobotModel> robot;
  SceneSource source;
  Scene scene;
  std::optional<OrientedBox> tunnel_override;
  double cell_size = 0.0;
  TaskPath path;
  bool path_from_generator = false;
  JointVector x_init;
  CSpaceConfig cspace;
  NullSpaceConfig nullspace;
  std::optional<RobotPerturbation> robot_perturbation;
  std::optional<WorkpiecePerturbation> workpiece_perturbation;
  std::uint64_t seed = 0;
};

// Parses and validates a document. `base_dir` resolves relative xyz_file
// references. Throws SpecError with the offending field path.
ExperimentSpec parse_spec(const nlohmann::json& doc,
                          const std::filesystem::path& base_dir = {});
ExperimentSpec load_spec(const std::filesystem::path& file);

nlohmann::json spec_to_json(const ExperimentSpec& spec);
void save_spec(const ExperimentSpec& spec, const std::filesystem::path& file);

nlohmann::json robot_to_json(const RobotModel& model);
RobotModel robot_from_json(const nlohmann::json& doc,
                           const std::string& field = "/robot");

struct Trial {
  int id = 0;
  std::string label;
  ExperimentSpec spec;
  bool valid = true;
  std::string invalid_reason;
};

// Cartesian product of the declared perturbation axes. Without any
// perturbation block the result is the base spec as a single trial.
std::vector<Trial> perturb(const ExperimentSpec& spec);

// Rigid transform applied to a scene and path together.
GeneratedScene transform_scene(const Scene& scene, const TaskPath& path,
                               const Eigen::Isometry3d& motion,
                               double cell_size);

}  // namespace htcp

#endif  // HTCP_SCENE_IO_H_
