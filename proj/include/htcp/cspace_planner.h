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

#ifndef HTCP_CSPACE_PLANNER_H_
#define HTCP_CSPACE_PLANNER_H_

#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "htcp/geometry.h"
#include "htcp/kinematics.h"

namespace htcp {

struct CSpaceConfig {
  double eq_threshold = 1e-3;  // meters
  double safety_eps = 1e-4;    // meters
  int max_outer_iter = 50;
  double step_converge_tol = 1e-6;  // radians
  double trust_region = 0.3;        // radians, box half width around x_ref

  void validate() const;
};

// Rows of A x = b (or A x >= b for inequalities).
struct LinearRows {
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
};

// Tool-tip equality linearized at x_ref (residual term taken as zero):
//   J(x_ref) x = J(x_ref) x_ref + (target - tip(x_ref)).
LinearRows linearize_equality(const RobotModel& model, const JointVector& x_ref,
                              const Vec3& target);

// Convex feasible set row of the clearance at x_ref:
//   grad D(x_ref) x >= grad D(x_ref) x_ref - D(x_ref) + eps.
LinearRows convexify_safety(const RobotModel& model, const JointVector& x_ref,
                            const Scene& scene, double eps);

enum class StuckReason { kNone, kInfeasibleQp, kMaxIterations, kNoProgress };

std::string_view to_string(StuckReason reason);

struct StepOutcome {
  bool converged = false;
  StuckReason reason = StuckReason::kNone;
  // Converged solution, or the last iterate when stuck.
  JointVector q;
  // Iteration (1-based) at which the step stopped; an already satisfied
  // start stops on iteration 1 without solving a QP.
  int outer_iterations = 0;
  int qp_iterations = 0;
  double final_tcp_error = 0.0;
  double final_clearance = 0.0;
  // ||x_k - x_prev||^2 for each QP solution x_k.
  std::vector<double> objective_trace;
};

// Repeatedly solves the linearized QP around the latest iterate until the
// tool error is within eq_threshold and the clearance is positive.
StepOutcome cspace_step(const RobotModel& model, const Scene& scene,
                        const JointVector& x_prev, const Vec3& target,
                        const CSpaceConfig& cfg);

}  // namespace htcp

#endif  // HTCP_CSPACE_PLANNER_H_
