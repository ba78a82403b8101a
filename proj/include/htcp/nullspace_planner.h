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

#ifndef HTCP_NULLSPACE_PLANNER_H_
#define HTCP_NULLSPACE_PLANNER_H_

#include <cstdint>
#include <random>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "htcp/geometry.h"
#include "htcp/kinematics.h"

namespace htcp {

// Evaluate sample_count random unit directions and keep the best.
struct UnitSphereSampling {
  int sample_count = 50;
  std::uint64_t seed = 0;
};

// Start from the minimizer of the linearized objective, then descend along
// the sphere's tangent with a backtracking step.
struct ProjectedGradientDescent {
  int inner_iters = 20;
  double learning_rate = 0.5;
};

using DirectionStrategy =
    std::variant<UnitSphereSampling, ProjectedGradientDescent>;

struct NullSpaceConfig {
  double alpha = 0.05;               // radians per step
  double reanchor_threshold = 1e-3;  // meters
  int max_steps = 200;
  double ik_tol = 1e-6;
  DirectionStrategy strategy = ProjectedGradientDescent{};
  double clearance_weight = 1.0;

  void validate() const;
};

using Rng = std::mt19937_64;

struct DirectionResult {
  // Unit coordinates in the null-space basis; has N - M entries.
  Eigen::VectorXd w;
  Eigen::MatrixXd basis;
  double objective = 0.0;
};

// Auxiliary cost -weight * D(x) + ||x - x_prev||^2 at x = x_ref + alpha N w.
double auxiliary_objective(const RobotModel& model, const Scene& scene,
                           const JointVector& x_ref, const JointVector& x_prev,
                           const Eigen::MatrixXd& basis,
                           const Eigen::VectorXd& w,
                           const NullSpaceConfig& cfg);

// Chooses the unit null-space direction minimizing the auxiliary cost.
// `rng` feeds UnitSphereSampling; when null a generator seeded from the
// strategy is used. Throws SingularityError when the tool Jacobian is
// singular and NullSpaceError when the null space is empty.
DirectionResult optimize_direction(const RobotModel& model, const Scene& scene,
                                   const JointVector& x_ref,
                                   const JointVector& x_prev,
                                   const NullSpaceConfig& cfg,
                                   Rng* rng = nullptr);

struct EscapeTraceEntry {
  // Tool error after the null-space step, before any re-anchoring.
  double drift = 0.0;
  // Largest singular value of the tool Jacobian where the step was taken.
  double jacobian_norm = 0.0;
  bool reanchored = false;
  double clearance = 0.0;
};

struct EscapeResult {
  JointVector q;
  int steps = 0;
  int reanchors = 0;
  std::vector<EscapeTraceEntry> trace;
};

// Anchor on the target with IK, then step through the task null space until
// the clearance is positive, re-anchoring whenever the tool drifts more than
// reanchor_threshold. Throws IkError if anchoring fails and NullSpaceError
// (with the best clearance seen) if max_steps runs out.
EscapeResult nullspace_escape(const RobotModel& model, const Scene& scene,
                              const JointVector& x_prev, const Vec3& target,
                              const NullSpaceConfig& cfg);

}  // namespace htcp

#endif  // HTCP_NULLSPACE_PLANNER_H_
