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

#include "htcp/kinematics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

namespace htcp {
namespace {

constexpr double kAxisNormTol = 1e-12;
constexpr double kRankTol = 1e-9;

void check_link(const RobotModel& model, int link, const char* what) {
  if (link < 0 || link >= model.dof()) {
    throw InvalidArgument(std::string(what) + ": link index " +
                          std::to_string(link) + " outside [0, " +
                          std::to_string(model.dof()) + ")");
  }
}

void check_size(const RobotModel& model, const JointVector& q) {
  if (q.size() != model.dof()) {
    throw InvalidArgument("joint vector has " + std::to_string(q.size()) +
                          " entries, model has " +
                          std::to_string(model.dof()) + " joints");
  }
}

}  // namespace

RobotModel::RobotModel(std::vector<RevoluteJoint> joints,
                       std::vector<JointLimits> limits,
                       std::vector<LinkCapsule> capsules, BodyPoint tool,
                       Eigen::Isometry3d base)
    : joints_(std::move(joints)),
      limits_(std::move(limits)),
      capsules_(std::move(capsules)),
      tool_(tool),
      base_(base) {
  if (joints_.empty()) throw InvalidArgument("robot has no joints");
  if (limits_.size() != joints_.size()) {
    throw InvalidArgument("joint_limits count differs from joint count");
  }
  for (std::size_t i = 0; i < joints_.size(); ++i) {
    if (std::abs(joints_[i].axis.norm() - 1.0) > kAxisNormTol) {
      throw InvalidArgument("joint " + std::to_string(i) +
                            ": rotation axis is not unit length");
    }
    if (!(limits_[i].min < limits_[i].max)) {
      throw InvalidArgument("joint " + std::to_string(i) +
                            ": limit min must be below max");
    }
  }
  for (std::size_t i = 0; i < capsules_.size(); ++i) {
    check_link(*this, capsules_[i].link, "capsule");
    if (!(capsules_[i].radius > 0.0)) {
      throw InvalidArgument("capsule " + std::to_string(i) +
                            ": radius must be positive");
    }
  }
  check_link(*this, tool_.link, "tool point");
}

JointVector RobotModel::lower_limits() const {
  JointVector v(dof());
  for (int i = 0; i < dof(); ++i) v[i] = limits_[i].min;
  return v;
}

JointVector RobotModel::upper_limits() const {
  JointVector v(dof());
  for (int i = 0; i < dof(); ++i) v[i] = limits_[i].max;
  return v;
}

bool RobotModel::within_limits(const JointVector& q) const {
  if (q.size() != dof()) return false;
  for (int i = 0; i < dof(); ++i) {
    if (!std::isfinite(q[i]) || q[i] < limits_[i].min ||
        q[i] > limits_[i].max) {
      return false;
    }
  }
  return true;
}

JointVector RobotModel::clamp_to_limits(const JointVector& q) const {
  JointVector out = q;
  for (int i = 0; i < dof(); ++i) {
    out[i] = std::clamp(out[i], limits_[i].min, limits_[i].max);
  }
  return out;
}

double RobotModel::reach() const {
  double total = 0.0;
  for (int i = 1; i <= tool_.link; ++i) {
    total += joints_[i].origin.translation().norm();
  }
  return total + tool_.offset.norm();
}

RobotModel RobotModel::with_base(const Eigen::Isometry3d& base) const {
  return RobotModel(joints_, limits_, capsules_, tool_, base);
}

LinkFrames::LinkFrames(const RobotModel& model, const JointVector& q) {
  check_size(model, q);
  const int n = model.dof();
  frames_.reserve(n);
  axes_.reserve(n);
  Eigen::Isometry3d t = model.base();
  for (int i = 0; i < n; ++i) {
    const RevoluteJoint& joint = model.joints()[i];
    t = t * joint.origin;
    axes_.push_back(t.linear() * joint.axis);
    t = t * Eigen::AngleAxisd(q[i], joint.axis);
    frames_.push_back(t);
  }
}

Vec3 LinkFrames::point(const BodyPoint& p) const {
  return frames_[p.link] * p.offset;
}

Eigen::Matrix<double, 3, Eigen::Dynamic> LinkFrames::point_jacobian(
    int link, const Vec3& world_point) const {
  Eigen::Matrix<double, 3, Eigen::Dynamic> jac(3, size());
  jac.setZero();
  for (int j = 0; j <= link; ++j) {
    jac.col(j) = axes_[j].cross(world_point - origin(j));
  }
  return jac;
}

Vec3 forward_kinematics(const RobotModel& model, const JointVector& q,
                        const BodyPoint& point) {
  check_link(model, point.link, "body point");
  return LinkFrames(model, q).point(point);
}

TaskJacobian task_jacobian(const RobotModel& model, const JointVector& q,
                           const BodyPoint& point) {
  check_link(model, point.link, "body point");
  LinkFrames frames(model, q);
  return {frames.point_jacobian(point.link, frames.point(point))};
}

Eigen::MatrixXd null_space_basis(const TaskJacobian& jac) {
  const Eigen::MatrixXd& j = jac.matrix;
  const int m = static_cast<int>(j.rows());
  const int n = static_cast<int>(j.cols());
  if (m > n) {
    throw InvalidArgument("task dimension exceeds joint count");
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(j, Eigen::ComputeFullV);
  const Eigen::VectorXd& s = svd.singularValues();
  int rank = 0;
  const double largest = s.size() > 0 ? s[0] : 0.0;
  for (int i = 0; i < s.size(); ++i) {
    if (largest > 0.0 && s[i] > kRankTol * largest) ++rank;
  }
  if (rank < m) {
    throw SingularityError("task Jacobian is rank deficient (rank " +
                               std::to_string(rank) + " of " +
                               std::to_string(m) + ")",
                           rank);
  }
  return svd.matrixV().rightCols(n - m);
}

JointVector solve_ik(const RobotModel& model, const JointVector& q_seed,
                     const Vec3& target, const IkOptions& options) {
  if (!(options.tol > 0.0)) throw InvalidArgument("IK tolerance must be > 0");
  check_size(model, q_seed);

  const Vec3 shoulder =
      (model.base() * model.joints()[0].origin).translation();
  if ((target - shoulder).norm() > model.reach()) {
    throw IkError("IK target lies outside the reachable radius",
                  (target - shoulder).norm() - model.reach());
  }

  JointVector q = model.clamp_to_limits(q_seed);
  double best = std::numeric_limits<double>::infinity();
  const double damping_sq = options.damping * options.damping;
  for (int iter = 0; iter <= options.max_iter; ++iter) {
    LinkFrames frames(model, q);
    const Vec3 tip = frames.point(model.tool());
    const Vec3 err = target - tip;
    const double residual = err.norm();
    best = std::min(best, residual);
    if (residual <= options.tol) return q;
    if (iter == options.max_iter) break;

    const auto jac = frames.point_jacobian(model.tool().link, tip);
    Eigen::Matrix3d jjt = jac * jac.transpose();
    jjt.diagonal().array() += damping_sq;
    JointVector dq = jac.transpose() * jjt.ldlt().solve(err);
    const double largest = dq.cwiseAbs().maxCoeff();
    if (largest > options.max_step) dq *= options.max_step / largest;
    q = model.clamp_to_limits(q + dq);
  }
  throw IkError("IK did not converge (best residual " + std::to_string(best) +
                    " m)",
                best);
}

std::vector<Capsule> world_capsules(const RobotModel& model,
                                    const LinkFrames& frames) {
  std::vector<Capsule> out;
  out.reserve(model.capsules().size());
  for (const LinkCapsule& c : model.capsules()) {
    const Eigen::Isometry3d& f = frames.frame(c.link);
    out.push_back({f * c.p0, f * c.p1, c.radius, c.link});
  }
  return out;
}

std::vector<Capsule> world_capsules(const RobotModel& model,
                                    const JointVector& q) {
  return world_capsules(model, LinkFrames(model, q));
}

}  // namespace htcp
