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

#include "htcp/cspace_planner.h"

#include <algorithm>

#include "htcp/qp.h"

namespace htcp {
namespace {

LinearRows equality_rows(const RobotModel& model, const LinkFrames& frames,
                         const JointVector& x_ref, const Vec3& target) {
  const Vec3 tip = frames.point(model.tool());
  LinearRows rows;
  rows.a = frames.point_jacobian(model.tool().link, tip);
  rows.b = rows.a * x_ref + (target - tip);
  return rows;
}

LinearRows safety_rows(const RobotModel& model, const LinkFrames& frames,
                       const JointVector& x_ref, const SignedDistance& sd,
                       double eps) {
  const Eigen::VectorXd grad = distance_gradient(model, frames, sd);
  LinearRows rows;
  rows.a = grad.transpose();
  rows.b = Eigen::VectorXd::Constant(1, grad.dot(x_ref) - sd.value + eps);
  return rows;
}

}  // namespace

void CSpaceConfig::validate() const {
  if (!(eq_threshold > 0.0 && safety_eps > 0.0 && max_outer_iter > 0 &&
        step_converge_tol > 0.0 && trust_region > 0.0)) {
    throw InvalidArgument("C-space planner parameters must all be positive");
  }
}

std::string_view to_string(StuckReason reason) {
  switch (reason) {
    case StuckReason::kNone:
      return "none";
    case StuckReason::kInfeasibleQp:
      return "infeasible_qp";
    case StuckReason::kMaxIterations:
      return "max_iterations";
    case StuckReason::kNoProgress:
      return "no_progress";
  }
  return "unknown";
}

LinearRows linearize_equality(const RobotModel& model, const JointVector& x_ref,
                              const Vec3& target) {
  return equality_rows(model, LinkFrames(model, x_ref), x_ref, target);
}

LinearRows convexify_safety(const RobotModel& model, const JointVector& x_ref,
                            const Scene& scene, double eps) {
  const LinkFrames frames(model, x_ref);
  return safety_rows(model, frames, x_ref,
                     signed_distance(model, frames, scene), eps);
}

StepOutcome cspace_step(const RobotModel& model, const Scene& scene,
                        const JointVector& x_prev, const Vec3& target,
                        const CSpaceConfig& cfg) {
  cfg.validate();
  const int n = model.dof();
  const JointVector lower = model.lower_limits();
  const JointVector upper = model.upper_limits();
  const Eigen::MatrixXd hessian = 2.0 * Eigen::MatrixXd::Identity(n, n);
  const Eigen::VectorXd linear = -2.0 * x_prev;

  StepOutcome out;
  JointVector x_ref = x_prev;
  for (int outer = 0;; ++outer) {
    const LinkFrames frames(model, x_ref);
    const SignedDistance sd = signed_distance(model, frames, scene);
    out.q = x_ref;
    out.outer_iterations = std::min(outer + 1, cfg.max_outer_iter);
    out.final_tcp_error = (frames.point(model.tool()) - target).norm();
    out.final_clearance = sd.value;
    if (out.final_tcp_error <= cfg.eq_threshold && sd.value > 0.0) {
      out.converged = true;
      return out;
    }
    if (outer == cfg.max_outer_iter) {
      out.reason = StuckReason::kMaxIterations;
      return out;
    }

    LinearRows eq = equality_rows(model, frames, x_ref, target);
    LinearRows in = safety_rows(model, frames, x_ref, sd, cfg.safety_eps);
    const JointVector lo =
        lower.cwiseMax((x_ref.array() - cfg.trust_region).matrix());
    const JointVector hi =
        upper.cwiseMin((x_ref.array() + cfg.trust_region).matrix());
    const QPProblem qp(hessian, linear, std::move(eq.a), std::move(eq.b),
                       std::move(in.a), std::move(in.b), lo, hi);
    const QPSolution sol = solve_qp(qp);
    out.qp_iterations += sol.iterations;
    if (sol.status != QPStatus::kOptimal) {
      out.reason = StuckReason::kInfeasibleQp;
      return out;
    }
    const JointVector x_new = sol.x.cwiseMax(lower).cwiseMin(upper);
    out.objective_trace.push_back((x_new - x_prev).squaredNorm());
    if ((x_new - x_ref).norm() < cfg.step_converge_tol) {
      out.reason = StuckReason::kNoProgress;
      return out;
    }
    x_ref = x_new;
  }
}

}  // namespace htcp
