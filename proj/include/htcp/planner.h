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

#ifndef HTCP_PLANNER_H_
#define HTCP_PLANNER_H_

#include <cstdint>
#include <string_view>
#include <variant>
#include <vector>

#include "htcp/cspace_planner.h"
#include "htcp/geometry.h"
#include "htcp/kinematics.h"
#include "htcp/nullspace_planner.h"

namespace htcp {

// Ordered tool targets. Consecutive targets may be at most max_step apart.
struct TaskPath {
  std::vector<Vec3> targets;
  double max_step = 0.05;

  int horizon() const { return static_cast<int>(targets.size()); }
  void validate() const;
};

enum class PlannerUsed { kCSpace, kNullSpace, kCSpaceSample, kNSpaceSample, kNone };

std::string_view to_string(PlannerUsed used);

struct StepMetrics {
  bool success = false;
  PlannerUsed planner_used = PlannerUsed::kNone;
  double wall_time = 0.0;      // seconds
  double tcp_distance = 0.0;   // meters
  double safe_distance = 0.0;  // meters
  int qp_iterations = 0;
  int ns_steps = 0;
};

struct Trajectory {
  std::vector<JointVector> states;
  std::vector<StepMetrics> per_step;

  int successes() const;
  bool failed() const { return !per_step.empty() && !per_step.back().success; }
};

// What to do when the C-space planner is stuck.
struct NoFallback {};
struct NullSpaceFallback {};
// Restart the C-space planner from random states within `radius` of x_prev
// (box, intersected with the joint limits).
struct CSpaceSampleFallback {
  int restarts = 50;
  double radius = 0.5;
};
// Anchor with IK, walk `steps` null-space steps of `step_size` along each of
// `directions` random directions, and restart the C-space planner from the
// end state.
struct NSpaceSampleFallback {
  int directions = 50;
  int steps = 100;
  double step_size = 0.05;
};

using Fallback = std::variant<NoFallback, NullSpaceFallback,
                              CSpaceSampleFallback, NSpaceSampleFallback>;

struct PlanOptions {
  CSpaceConfig cspace;
  NullSpaceConfig nullspace;
  Fallback fallback = NullSpaceFallback{};
  std::uint64_t seed = 0;
  bool record_timing = true;
};

// Incremental planner over the path. A step that neither the C-space
// planner nor the fallback can solve is recorded as failed and ends the
// plan. Throws InvalidArgument if x_init violates the joint limits or is not
// collision free.
Trajectory plan(const RobotModel& model, const Scene& scene,
                const TaskPath& path, const JointVector& x_init,
                const PlanOptions& options);

// C-space planner with the null-space escape as fallback.
Trajectory plan(const RobotModel& model, const Scene& scene,
                const TaskPath& path, const JointVector& x_init,
                const CSpaceConfig& cs_cfg, const NullSpaceConfig& ns_cfg);

struct VerifiedStep {
  double tcp_distance = 0.0;
  double safe_distance = 0.0;
  bool within_limits = false;
  bool success = false;
};

// Recomputes step metrics from the recorded states with kinematics and
// geometry only.
std::vector<VerifiedStep> verify_trajectory(const RobotModel& model,
                                            const Scene& scene,
                                            const TaskPath& path,
                                            const Trajectory& traj,
                                            double eq_threshold);

}  // namespace htcp

#endif  // HTCP_PLANNER_H_
