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

#include "htcp/planner.h"

#include <algorithm>
#include <chrono>
#include <optional>
#include <random>
#include <string>

namespace htcp {
namespace {

struct Rescue {
  JointVector q;
  PlannerUsed used = PlannerUsed::kNone;
  int qp_iterations = 0;
  int ns_steps = 0;
};

std::optional<Rescue> rescue_cspace_sample(const RobotModel& model,
                                           const Scene& scene,
                                           const JointVector& x_prev,
                                           const Vec3& target,
                                           const PlanOptions& options,
                                           const CSpaceSampleFallback& f,
                                           Rng& rng) {
  const JointVector lo = model.lower_limits().cwiseMax(
      (x_prev.array() - f.radius).matrix());
  const JointVector hi = model.upper_limits().cwiseMin(
      (x_prev.array() + f.radius).matrix());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Rescue r;
  r.used = PlannerUsed::kCSpaceSample;
  for (int k = 0; k < f.restarts; ++k) {
    JointVector start(model.dof());
    for (int i = 0; i < model.dof(); ++i) {
      start[i] = lo[i] + unit(rng) * (hi[i] - lo[i]);
    }
    const StepOutcome out =
        cspace_step(model, scene, start, target, options.cspace);
    r.qp_iterations += out.qp_iterations;
    if (out.converged) {
      r.q = out.q;
      return r;
    }
  }
  return std::nullopt;
}

// Follows a joint-space direction, re-projected onto the local null space
// at every step so the walk does not depend on basis orientation.
std::optional<JointVector> null_space_walk(const RobotModel& model,
                                           JointVector x, Eigen::VectorXd v,
                                           const Vec3& target,
                                           const PlanOptions& options,
                                           const NSpaceSampleFallback& f,
                                           int* steps) {
  IkOptions ik;
  ik.tol = options.nullspace.ik_tol;
  for (int s = 0; s < f.steps; ++s) {
    Eigen::MatrixXd basis;
    try {
      basis = null_space_basis(task_jacobian(model, x, model.tool()));
    } catch (const SingularityError&) {
      return std::nullopt;
    }
    v = basis * (basis.transpose() * v);
    const double norm = v.norm();
    if (norm < 1e-9) break;
    v /= norm;
    x = model.clamp_to_limits(x + f.step_size * v);
    ++*steps;
    if ((tool_position(model, x) - target).norm() >
        options.nullspace.reanchor_threshold) {
      try {
        x = solve_ik(model, x, target, ik);
      } catch (const IkError&) {
        return std::nullopt;
      }
    }
  }
  return x;
}

std::optional<Rescue> rescue_nspace_sample(const RobotModel& model,
                                           const Scene& scene,
                                           const JointVector& x_prev,
                                           const Vec3& target,
                                           const PlanOptions& options,
                                           const NSpaceSampleFallback& f,
                                           Rng& rng) {
  IkOptions ik;
  ik.tol = options.nullspace.ik_tol;
  JointVector anchor;
  try {
    anchor = solve_ik(model, x_prev, target, ik);
  } catch (const IkError&) {
    return std::nullopt;
  }
  Eigen::MatrixXd basis;
  try {
    basis = null_space_basis(task_jacobian(model, anchor, model.tool()));
  } catch (const SingularityError&) {
    return std::nullopt;
  }
  if (basis.cols() == 0) return std::nullopt;

  std::normal_distribution<double> normal(0.0, 1.0);
  Rescue r;
  r.used = PlannerUsed::kNSpaceSample;
  for (int k = 0; k < f.directions; ++k) {
    Eigen::VectorXd w(basis.cols());
    for (int i = 0; i < w.size(); ++i) w[i] = normal(rng);
    if (w.norm() < 1e-9) continue;
    const std::optional<JointVector> end = null_space_walk(
        model, anchor, basis * w.normalized(), target, options, f, &r.ns_steps);
    if (!end) continue;
    const StepOutcome out =
        cspace_step(model, scene, *end, target, options.cspace);
    r.qp_iterations += out.qp_iterations;
    if (out.converged) {
      r.q = out.q;
      return r;
    }
  }
  return std::nullopt;
}

std::optional<Rescue> rescue(const RobotModel& model, const Scene& scene,
                             const JointVector& x_prev, const Vec3& target,
                             const PlanOptions& options, Rng& rng) {
  if (std::holds_alternative<NoFallback>(options.fallback)) {
    return std::nullopt;
  }
  if (std::holds_alternative<NullSpaceFallback>(options.fallback)) {
    try {
      EscapeResult esc =
          nullspace_escape(model, scene, x_prev, target, options.nullspace);
      Rescue r;
      r.q = std::move(esc.q);
      r.used = PlannerUsed::kNullSpace;
      r.ns_steps = esc.steps;
      return r;
    } catch (const Error&) {
      return std::nullopt;
    }
  }
  if (const auto* f = std::get_if<CSpaceSampleFallback>(&options.fallback)) {
    return rescue_cspace_sample(model, scene, x_prev, target, options, *f,
                                rng);
  }
  return rescue_nspace_sample(model, scene, x_prev, target, options,
                              std::get<NSpaceSampleFallback>(options.fallback),
                              rng);
}

}  // namespace

void TaskPath::validate() const {
  if (!(max_step > 0.0)) throw InvalidArgument("path max_step must be > 0");
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (!targets[i].allFinite()) {
      throw InvalidArgument("path target " + std::to_string(i) +
                            " is not finite");
    }
    if (i > 0 && (targets[i] - targets[i - 1]).norm() > max_step) {
      throw InvalidArgument("path targets " + std::to_string(i - 1) + " and " +
                            std::to_string(i) + " are further apart than " +
                            std::to_string(max_step) + " m");
    }
  }
}

std::string_view to_string(PlannerUsed used) {
  switch (used) {
    case PlannerUsed::kCSpace:
      return "cspace";
    case PlannerUsed::kNullSpace:
      return "nullspace";
    case PlannerUsed::kCSpaceSample:
      return "csample";
    case PlannerUsed::kNSpaceSample:
      return "nsample";
    case PlannerUsed::kNone:
      return "none";
  }
  return "unknown";
}

int Trajectory::successes() const {
  return static_cast<int>(std::count_if(
      per_step.begin(), per_step.end(),
      [](const StepMetrics& m) { return m.success; }));
}

Trajectory plan(const RobotModel& model, const Scene& scene,
                const TaskPath& path, const JointVector& x_init,
                const PlanOptions& options) {
  options.cspace.validate();
  options.nullspace.validate();
  if (!model.within_limits(x_init)) {
    throw InvalidArgument("initial state violates the joint limits");
  }
  const double initial_clearance = signed_distance(model, x_init, scene).value;
  if (!(initial_clearance > 0.0)) {
    throw InvalidArgument("initial state is in collision (clearance " +
                          std::to_string(initial_clearance) + " m)");
  }

  using Clock = std::chrono::steady_clock;
  Rng rng(options.seed);
  Trajectory traj;
  JointVector x_prev = x_init;
  for (const Vec3& target : path.targets) {
    const auto start = Clock::now();
    const StepOutcome outcome =
        cspace_step(model, scene, x_prev, target, options.cspace);
    StepMetrics m;
    m.qp_iterations = outcome.qp_iterations;
    JointVector state = outcome.q;
    bool solved = outcome.converged;
    if (solved) {
      m.planner_used = PlannerUsed::kCSpace;
    } else if (std::optional<Rescue> r =
                   rescue(model, scene, x_prev, target, options, rng)) {
      state = std::move(r->q);
      m.planner_used = r->used;
      m.qp_iterations += r->qp_iterations;
      m.ns_steps = r->ns_steps;
      solved = true;
    }
    if (options.record_timing) {
      m.wall_time = std::chrono::duration<double>(Clock::now() - start).count();
    }

    const LinkFrames frames(model, state);
    m.tcp_distance = (frames.point(model.tool()) - target).norm();
    m.safe_distance = signed_distance(model, frames, scene).value;
    m.success = solved && m.tcp_distance <= options.cspace.eq_threshold &&
                m.safe_distance > 0.0;
    traj.states.push_back(state);
    traj.per_step.push_back(m);
    if (!m.success) break;
    x_prev = std::move(state);
  }
  return traj;
}

Trajectory plan(const RobotModel& model, const Scene& scene,
                const TaskPath& path, const JointVector& x_init,
                const CSpaceConfig& cs_cfg, const NullSpaceConfig& ns_cfg) {
  PlanOptions options;
  options.cspace = cs_cfg;
  options.nullspace = ns_cfg;
  options.fallback = NullSpaceFallback{};
  return plan(model, scene, path, x_init, options);
}

std::vector<VerifiedStep> verify_trajectory(const RobotModel& model,
                                            const Scene& scene,
                                            const TaskPath& path,
                                            const Trajectory& traj,
                                            double eq_threshold) {
  if (traj.states.size() > path.targets.size()) {
    throw InvalidArgument("trajectory is longer than the path");
  }
  std::vector<VerifiedStep> out;
  out.reserve(traj.states.size());
  for (std::size_t t = 0; t < traj.states.size(); ++t) {
    const JointVector& q = traj.states[t];
    VerifiedStep v;
    v.within_limits = model.within_limits(q);
    v.tcp_distance =
        (forward_kinematics(model, q, model.tool()) - path.targets[t]).norm();
    v.safe_distance = signed_distance(model, q, scene).value;
    v.success = v.within_limits && v.tcp_distance <= eq_threshold &&
                v.safe_distance > 0.0;
    out.push_back(v);
  }
  return out;
}

}  // namespace htcp
