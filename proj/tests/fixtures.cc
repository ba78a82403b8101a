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

#include "fixtures.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Geometry>
#include <Eigen/LU>

#include "htcp/scene_io.h"

namespace htcp::testing {
namespace {

RevoluteJoint make_joint(const Vec3& axis, const Vec3& offset,
                         const Eigen::Matrix3d& rot) {
  RevoluteJoint j;
  j.axis = axis.normalized();
  j.origin = Eigen::Isometry3d::Identity();
  j.origin.translation() = offset;
  j.origin.linear() = rot;
  return j;
}

Eigen::Matrix4d rodrigues(const Vec3& k, double theta) {
  Eigen::Matrix3d kx;
  kx << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
  t.topLeftCorner<3, 3>() = Eigen::Matrix3d::Identity() +
                            std::sin(theta) * kx +
                            (1.0 - std::cos(theta)) * kx * kx;
  return t;
}

}  // namespace

RobotModel planar_3r() {
  const double pi = std::numbers::pi;
  std::vector<RevoluteJoint> joints;
  std::vector<JointLimits> limits;
  for (int i = 0; i < 3; ++i) {
    joints.push_back(make_joint(Vec3::UnitZ(),
                                i == 0 ? Vec3::Zero() : Vec3(1.0, 0.0, 0.0),
                                Eigen::Matrix3d::Identity()));
    limits.push_back({-pi, pi});
  }
  std::vector<LinkCapsule> capsules = {
      {0, Vec3::Zero(), {1.0, 0.0, 0.0}, 0.05},
      {1, Vec3::Zero(), {1.0, 0.0, 0.0}, 0.05},
      {2, Vec3::Zero(), {1.0, 0.0, 0.0}, 0.05}};
  BodyPoint tool{2, {1.0, 0.0, 0.0}};
  return RobotModel(joints, limits, capsules, tool);
}

RobotModel skewed_7r() {
  std::vector<RevoluteJoint> joints = {
      make_joint({0, 0, 1}, {0, 0, 0.1}, Eigen::Matrix3d::Identity()),
      make_joint({0, 1, 0.2}, {0, 0, 0.2},
                 Eigen::AngleAxisd(0.3, Vec3::UnitX()).toRotationMatrix()),
      make_joint({1, 0, 0}, {0.05, 0, 0.3}, Eigen::Matrix3d::Identity()),
      make_joint({0, 1, 0}, {0.0, 0.02, 0.25},
                 Eigen::AngleAxisd(-0.4, Vec3::UnitZ()).toRotationMatrix()),
      make_joint({0.3, 0, 1}, {0.0, 0, 0.2}, Eigen::Matrix3d::Identity()),
      make_joint({0, 1, 0}, {0.0, 0, 0.15},
                 Eigen::AngleAxisd(0.7, Vec3::UnitY()).toRotationMatrix()),
      make_joint({0, 0, 1}, {0.0, 0.03, 0.1}, Eigen::Matrix3d::Identity()),
  };
  std::vector<JointLimits> limits(7, {-2.8, 2.8});
  std::vector<LinkCapsule> capsules;
  for (int i = 0; i < 6; ++i) {
    capsules.push_back({i, Vec3::Zero(), joints[i + 1].origin.translation(), 0.03});
  }
  Eigen::Isometry3d base = Eigen::Isometry3d::Identity();
  base.translation() = Vec3(0.2, -0.1, 0.05);
  base.linear() = Eigen::AngleAxisd(0.5, Vec3::UnitZ()).toRotationMatrix();
  return RobotModel(joints, limits, capsules, BodyPoint{6, {0.02, 0.0, 0.08}},
                    base);
}

RobotModel welding_6r() { return reference_arm(); }

std::vector<RobotModel> arm_fixtures() {
  return {planar_3r(), skewed_7r(), welding_6r()};
}

JointVector random_configuration(const RobotModel& model,
                                 std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  JointVector q(model.dof());
  for (int i = 0; i < model.dof(); ++i) {
    const JointLimits& l = model.limits()[i];
    q[i] = l.min + unit(rng) * (l.max - l.min);
  }
  return q;
}

Vec3 reference_tool_position(const RobotModel& model, const JointVector& q) {
  Eigen::Matrix4d t = model.base().matrix();
  for (int i = 0; i <= model.tool().link; ++i) {
    t = t * model.joints()[i].origin.matrix() *
        rodrigues(model.joints()[i].axis, q[i]);
  }
  const Eigen::Vector4d p = t * model.tool().offset.homogeneous();
  return p.head<3>();
}

Eigen::MatrixXd finite_difference_jacobian(const RobotModel& model,
                                           const JointVector& q, double h) {
  Eigen::MatrixXd j(3, model.dof());
  for (int i = 0; i < model.dof(); ++i) {
    JointVector hi = q;
    JointVector lo = q;
    hi[i] += h;
    lo[i] -= h;
    j.col(i) = (reference_tool_position(model, hi) -
                reference_tool_position(model, lo)) /
               (2.0 * h);
  }
  return j;
}

std::vector<Vec3> box_shell(const Vec3& lo, const Vec3& hi, double spacing) {
  std::vector<Vec3> out;
  const Vec3 size = hi - lo;
  Eigen::Vector3i n;
  for (int a = 0; a < 3; ++a) {
    n[a] = std::max(1, static_cast<int>(std::ceil(size[a] / spacing)));
  }
  for (int i = 0; i <= n.x(); ++i) {
    for (int j = 0; j <= n.y(); ++j) {
      for (int k = 0; k <= n.z(); ++k) {
        const bool face = i == 0 || j == 0 || k == 0 || i == n.x() ||
                          j == n.y() || k == n.z();
        if (!face) continue;
        out.push_back(lo + Vec3(size.x() * i / n.x(), size.y() * j / n.y(),
                                size.z() * k / n.z()));
      }
    }
  }
  return out;
}

double oracle_distance(const Vec3& a, const Vec3& b, const Vec3& p) {
  const double dx = b.x() - a.x();
  const double dy = b.y() - a.y();
  const double dz = b.z() - a.z();
  const double len2 = dx * dx + dy * dy + dz * dz;
  double t = 0.0;
  if (len2 > 0.0) {
    t = ((p.x() - a.x()) * dx + (p.y() - a.y()) * dy + (p.z() - a.z()) * dz) /
        len2;
    t = std::min(1.0, std::max(0.0, t));
  }
  const double ex = a.x() + t * dx - p.x();
  const double ey = a.y() + t * dy - p.y();
  const double ez = a.z() + t * dz - p.z();
  return std::sqrt(ex * ex + ey * ey + ez * ez);
}

std::optional<QpCandidate> enumerate_qp(const QPProblem& p) {
  const int n = p.num_vars();
  const int m_eq = static_cast<int>(p.a_eq().rows());
  const int m_in = static_cast<int>(p.a_in().rows());
  std::optional<QpCandidate> best;
  for (int mask = 0; mask < (1 << m_in); ++mask) {
    std::vector<int> rows;
    for (int i = 0; i < m_in; ++i) {
      if (mask & (1 << i)) rows.push_back(i);
    }
    const int m = m_eq + static_cast<int>(rows.size());
    Eigen::MatrixXd a(m, n);
    Eigen::VectorXd b(m);
    if (m_eq > 0) {
      a.topRows(m_eq) = p.a_eq();
      b.head(m_eq) = p.b_eq();
    }
    for (std::size_t k = 0; k < rows.size(); ++k) {
      a.row(m_eq + k) = p.a_in().row(rows[k]);
      b[m_eq + k] = p.b_in()[rows[k]];
    }
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + m, n + m);
    kkt.topLeftCorner(n, n) = p.hessian();
    kkt.topRightCorner(n, m) = a.transpose();
    kkt.bottomLeftCorner(m, n) = a;
    Eigen::VectorXd rhs(n + m);
    rhs << -p.linear(), b;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    if (!lu.isInvertible()) continue;
    const Eigen::VectorXd x = lu.solve(rhs).head(n);
    if (p.max_violation(x) > 1e-9) continue;
    const double obj = p.objective(x);
    if (!best || obj < best->objective) best = QpCandidate{x, obj};
  }
  return best;
}

RandomQp random_qp(std::mt19937_64& rng, int n, int m_eq, int m_in) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto randn = [&](int r, int c) {
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) m(i, j) = g(rng);
    return m;
  };
  const Eigen::MatrixXd m = randn(n, n);
  const Eigen::MatrixXd h = m.transpose() * m + 0.1 * Eigen::MatrixXd::Identity(n, n);
  const Eigen::VectorXd f = 3.0 * randn(n, 1);
  const Eigen::VectorXd x0 = randn(n, 1);
  const Eigen::MatrixXd a_eq = randn(m_eq, n);
  const Eigen::VectorXd b_eq = a_eq * x0;
  const Eigen::MatrixXd a_in = randn(m_in, n);
  Eigen::VectorXd b_in = a_in * x0;
  for (int i = 0; i < m_in; ++i) b_in[i] -= u(rng) < 0.3 ? 0.0 : u(rng);
  return {QPProblem(h, f, a_eq, b_eq, a_in, b_in), x0};
}

}  // namespace htcp::testing
