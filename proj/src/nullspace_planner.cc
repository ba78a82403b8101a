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

#include "htcp/nullspace_planner.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/SVD>

namespace htcp {
namespace {

constexpr double kMinStep = 1e-6;

Eigen::VectorXd random_unit(int dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd w(dim);
  double norm = 0.0;
  while (norm < 1e-9) {
    for (int i = 0; i < dim; ++i) w[i] = normal(rng);
    norm = w.norm();
  }
  return w / norm;
}

// Gradient of the auxiliary cost with respect to x.
Eigen::VectorXd cost_gradient(const RobotModel& model, const Scene& scene,
                              const JointVector& x, const JointVector& x_prev,
                              const NullSpaceConfig& cfg) {
  const LinkFrames frames(model, x);
  const SignedDistance sd = signed_distance(model, frames, scene);
  return -cfg.clearance_weight * distance_gradient(model, frames, sd) +
         2.0 * (x - x_prev);
}

Eigen::VectorXd direction_by_sampling(const RobotModel& model,
                                      const Scene& scene,
                                      const JointVector& x_ref,
                                      const JointVector& x_prev,
                                      const Eigen::MatrixXd& basis,
                                      const NullSpaceConfig& cfg,
                                      const UnitSphereSampling& strategy,
                                      Rng& rng, double* objective) {
  const int dim = static_cast<int>(basis.cols());
  Eigen::VectorXd best;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int k = 0; k < strategy.sample_count; ++k) {
    Eigen::VectorXd w = random_unit(dim, rng);
    const double cost =
        auxiliary_objective(model, scene, x_ref, x_prev, basis, w, cfg);
    if (cost < best_cost) {
      best_cost = cost;
      best = std::move(w);
    }
  }
  *objective = best_cost;
  return best;
}

Eigen::VectorXd direction_by_descent(const RobotModel& model,
                                     const Scene& scene,
                                     const JointVector& x_ref,
                                     const JointVector& x_prev,
                                     const Eigen::MatrixXd& basis,
                                     const NullSpaceConfig& cfg,
                                     const ProjectedGradientDescent& strategy,
                                     double* objective) {
  const int dim = static_cast<int>(basis.cols());
  // The linearized cost is linear in w, so its minimizer on the sphere is
  // the normalized negative reduced gradient.
  Eigen::VectorXd w =
      -basis.transpose() * cost_gradient(model, scene, x_ref, x_prev, cfg);
  if (w.norm() < 1e-12) {
    w = Eigen::VectorXd::Unit(dim, 0);
  } else {
    w.normalize();
  }
  double cost = auxiliary_objective(model, scene, x_ref, x_prev, basis, w, cfg);
  double step = strategy.learning_rate;
  for (int iter = 0; iter < strategy.inner_iters && step >= kMinStep; ++iter) {
    const JointVector x = x_ref + cfg.alpha * basis * w;
    const Eigen::VectorXd g = cfg.alpha * basis.transpose() *
                              cost_gradient(model, scene, x, x_prev, cfg);
    const Eigen::VectorXd tangent = g - g.dot(w) * w;
    const double tangent_norm = tangent.norm();
    if (tangent_norm < 1e-12) break;
    bool improved = false;
    while (step >= kMinStep) {
      const Eigen::VectorXd trial = (w - step * tangent / tangent_norm).normalized();
      const double trial_cost =
          auxiliary_objective(model, scene, x_ref, x_prev, basis, trial, cfg);
      if (trial_cost < cost) {
        w = trial;
        cost = trial_cost;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
  }
  *objective = cost;
  return w;
}

}  // namespace

void NullSpaceConfig::validate() const {
  if (!(alpha > 0.0)) throw InvalidArgument("null-space alpha must be > 0");
  if (max_steps < 1) throw InvalidArgument("null-space max_steps must be >= 1");
  if (!(reanchor_threshold > 0.0 && ik_tol > 0.0)) {
    throw InvalidArgument("null-space thresholds must be > 0");
  }
  if (!(clearance_weight >= 0.0)) {
    throw InvalidArgument("clearance_weight must be >= 0");
  }
  if (const auto* s = std::get_if<UnitSphereSampling>(&strategy)) {
    if (s->sample_count < 1) throw InvalidArgument("sample_count must be >= 1");
  }
  if (const auto* s = std::get_if<ProjectedGradientDescent>(&strategy)) {
    if (s->inner_iters < 1) throw InvalidArgument("inner_iters must be >= 1");
    if (!(s->learning_rate > 0.0)) {
      throw InvalidArgument("learning_rate must be > 0");
    }
  }
}

double auxiliary_objective(const RobotModel& model, const Scene& scene,
                           const JointVector& x_ref, const JointVector& x_prev,
                           const Eigen::MatrixXd& basis,
                           const Eigen::VectorXd& w,
                           const NullSpaceConfig& cfg) {
  const JointVector x = x_ref + cfg.alpha * basis * w;
  return -cfg.clearance_weight * signed_distance(model, x, scene).value +
         (x - x_prev).squaredNorm();
}

DirectionResult optimize_direction(const RobotModel& model, const Scene& scene,
                                   const JointVector& x_ref,
                                   const JointVector& x_prev,
                                   const NullSpaceConfig& cfg, Rng* rng) {
  DirectionResult out;
  out.basis = null_space_basis(task_jacobian(model, x_ref, model.tool()));
  if (out.basis.cols() == 0) {
    throw NullSpaceError("task null space is empty",
                         signed_distance(model, x_ref, scene).value);
  }
  if (const auto* s = std::get_if<UnitSphereSampling>(&cfg.strategy)) {
    Rng local(s->seed);
    out.w = direction_by_sampling(model, scene, x_ref, x_prev, out.basis, cfg,
                                  *s, rng ? *rng : local, &out.objective);
  } else {
    out.w = direction_by_descent(model, scene, x_ref, x_prev, out.basis, cfg,
                                 std::get<ProjectedGradientDescent>(cfg.strategy),
                                 &out.objective);
  }
  return out;
}

EscapeResult nullspace_escape(const RobotModel& model, const Scene& scene,
                              const JointVector& x_prev, const Vec3& target,
                              const NullSpaceConfig& cfg) {
  cfg.validate();
  IkOptions ik;
  ik.tol = cfg.ik_tol;
  Rng rng(std::holds_alternative<UnitSphereSampling>(cfg.strategy)
              ? std::get<UnitSphereSampling>(cfg.strategy).seed
              : 0);

  EscapeResult out;
  JointVector x_ref = solve_ik(model, x_prev, target, ik);
  double clearance = signed_distance(model, x_ref, scene).value;
  double best = clearance;
  while (clearance <= 0.0 && out.steps < cfg.max_steps) {
    const DirectionResult dir =
        optimize_direction(model, scene, x_ref, x_prev, cfg, &rng);
    EscapeTraceEntry entry;
    entry.jacobian_norm =
        Eigen::JacobiSVD<Eigen::MatrixXd>(
            task_jacobian(model, x_ref, model.tool()).matrix)
            .singularValues()[0];
    x_ref = model.clamp_to_limits(x_ref + cfg.alpha * dir.basis * dir.w);
    ++out.steps;
    entry.drift = (tool_position(model, x_ref) - target).norm();
    if (entry.drift > cfg.reanchor_threshold) {
      x_ref = solve_ik(model, x_ref, target, ik);
      entry.reanchored = true;
      ++out.reanchors;
    }
    clearance = signed_distance(model, x_ref, scene).value;
    entry.clearance = clearance;
    best = std::max(best, clearance);
    out.trace.push_back(entry);
  }
  if (clearance <= 0.0) {
    throw NullSpaceError("null-space escape exhausted " +
                             std::to_string(cfg.max_steps) +
                             " steps (best clearance " + std::to_string(best) +
                             " m)",
                         best);
  }
  out.q = std::move(x_ref);
  return out;
}

}  // namespace htcp
