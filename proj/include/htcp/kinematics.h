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

#ifndef HTCP_KINEMATICS_H_
#define HTCP_KINEMATICS_H_

#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "htcp/errors.h"

namespace htcp {

using Vec3 = Eigen::Vector3d;
using JointVector = Eigen::VectorXd;

// One revolute joint of a serial chain. The joint frame is
// parent_frame * origin * Rot(axis, q).
struct RevoluteJoint {
  Vec3 axis = Vec3::UnitZ();
  Eigen::Isometry3d origin = Eigen::Isometry3d::Identity();
};

struct JointLimits {
  double min = 0.0;
  double max = 0.0;
};

// A point rigidly attached to a link frame.
struct BodyPoint {
  int link = 0;
  Vec3 offset = Vec3::Zero();
};

// Swept-sphere volume attached to a link, endpoints in link coordinates.
struct LinkCapsule {
  int link = 0;
  Vec3 p0 = Vec3::Zero();
  Vec3 p1 = Vec3::Zero();
  double radius = 0.0;
};

// World-frame capsule.
struct Capsule {
  Vec3 p0 = Vec3::Zero();
  Vec3 p1 = Vec3::Zero();
  double radius = 0.0;
  int link = 0;
};

// Serial revolute arm. Link i is the frame produced by joint i, so link
// indices run over [0, dof). Validated on construction; immutable afterwards.
class RobotModel {
 public:
  RobotModel(std::vector<RevoluteJoint> joints, std::vector<JointLimits> limits,
             std::vector<LinkCapsule> capsules, BodyPoint tool,
             Eigen::Isometry3d base = Eigen::Isometry3d::Identity());

  int dof() const { return static_cast<int>(joints_.size()); }
  const std::vector<RevoluteJoint>& joints() const { return joints_; }
  const std::vector<JointLimits>& limits() const { return limits_; }
  const std::vector<LinkCapsule>& capsules() const { return capsules_; }
  const BodyPoint& tool() const { return tool_; }
  const Eigen::Isometry3d& base() const { return base_; }

  JointVector lower_limits() const;
  JointVector upper_limits() const;
  bool within_limits(const JointVector& q) const;
  JointVector clamp_to_limits(const JointVector& q) const;

  // Sum of the distances between consecutive joint origins plus the tool
  // offset; an upper bound on how far the tool can be from the first joint.
  double reach() const;

  // Copy of this model with a different base transform.
  RobotModel with_base(const Eigen::Isometry3d& base) const;

 private:
  std::vector<RevoluteJoint> joints_;
  std::vector<JointLimits> limits_;
  std::vector<LinkCapsule> capsules_;
  BodyPoint tool_;
  Eigen::Isometry3d base_;
};

// World transforms of every link frame for one configuration.
class LinkFrames {
 public:
  LinkFrames(const RobotModel& model, const JointVector& q);

  const Eigen::Isometry3d& frame(int link) const { return frames_[link]; }
  // World-frame rotation axis of joint j.
  const Vec3& axis(int joint) const { return axes_[joint]; }
  Vec3 origin(int joint) const { return frames_[joint].translation(); }
  int size() const { return static_cast<int>(frames_.size()); }

  Vec3 point(const BodyPoint& p) const;
  // 3xN positional Jacobian of a world point rigidly attached to `link`.
  Eigen::Matrix<double, 3, Eigen::Dynamic> point_jacobian(
      int link, const Vec3& world_point) const;

 private:
  std::vector<Eigen::Isometry3d> frames_;
  std::vector<Vec3> axes_;
};

struct TaskJacobian {
  Eigen::MatrixXd matrix;
  int task_dim() const { return static_cast<int>(matrix.rows()); }
};

Vec3 forward_kinematics(const RobotModel& model, const JointVector& q,
                        const BodyPoint& point);
inline Vec3 tool_position(const RobotModel& model, const JointVector& q) {
  return forward_kinematics(model, q, model.tool());
}

// Analytic positional Jacobian: column j is axis_j x (p - origin_j) for
// joints upstream of the point's link, zero otherwise.
TaskJacobian task_jacobian(const RobotModel& model, const JointVector& q,
                           const BodyPoint& point);

// Orthonormal N x (N - M) kernel basis from the SVD. Column signs are not
// canonical. Throws SingularityError if J is not full row rank.
Eigen::MatrixXd null_space_basis(const TaskJacobian& jac);

struct IkOptions {
  double tol = 1e-6;
  int max_iter = 200;
  double damping = 1e-3;
  double max_step = 0.2;
};

// Damped least-squares position IK with per-iteration limit projection.
// Throws IkError carrying the best residual on failure.
JointVector solve_ik(const RobotModel& model, const JointVector& q_seed,
                     const Vec3& target, const IkOptions& options = {});

std::vector<Capsule> world_capsules(const RobotModel& model,
                                    const JointVector& q);
std::vector<Capsule> world_capsules(const RobotModel& model,
                                    const LinkFrames& frames);

}  // namespace htcp

#endif  // HTCP_KINEMATICS_H_
