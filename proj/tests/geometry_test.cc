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

#include <cmath>
#include <limits>
#include <memory>
#include <random>

#include "doctest.h"
#include "fixtures.h"
#include "htcp/geometry.h"

namespace htcp {
namespace {

using testing::random_configuration;

std::vector<Vec3> random_points(int n, double half, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-half, half);
  std::vector<Vec3> pts(n);
  for (Vec3& p : pts) p = Vec3(u(rng), u(rng), u(rng));
  return pts;
}

Segment random_segment(double half, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-half, half);
  return {Vec3(u(rng), u(rng), u(rng)), Vec3(u(rng), u(rng), u(rng))};
}

// One joint about z; a capsule along the link's x axis.
RobotModel stick(double length, double radius) {
  return RobotModel({RevoluteJoint{}}, {{-4.0, 4.0}},
                    {{0, Vec3::Zero(), Vec3(length, 0.0, 0.0), radius}},
                    BodyPoint{0, Vec3(length, 0.0, 0.0)});
}

Scene make_scene(std::vector<Vec3> pts, const Vec3& lo, const Vec3& hi,
                 double cell = 0.0) {
  Scene s;
  s.cloud = std::make_shared<PointCloud>(std::move(pts), cell);
  s.tunnel = OrientedBox::from_bounds(lo, hi);
  return s;
}

TEST_CASE("segment distance examples") {
  const Segment seg{Vec3::Zero(), Vec3::UnitX()};
  const PointCloud above({Vec3(0.5, 2.0, 0.0)});
  const CloudDistance d = segment_cloud_distance(seg, above);
  CHECK(d.distance == 2.0);
  CHECK(d.witness == 0);
  const PointCloud beyond({Vec3(2.0, 0.0, 0.0)});
  CHECK(segment_cloud_distance(seg, beyond).distance == 1.0);
}

TEST_CASE("ties resolve to the lowest point index") {
  const Segment seg{Vec3::Zero(), Vec3::UnitX()};
  const PointCloud cloud({Vec3(0.5, 0.0, 3.0), Vec3(0.5, 1.0, 0.0),
                          Vec3(0.5, -1.0, 0.0), Vec3(0.2, 0.0, 1.0)});
  const CloudDistance d = segment_cloud_distance(seg, cloud);
  CHECK(d.distance == 1.0);
  CHECK(d.witness == 1);
}

TEST_CASE("degenerate segments act as spheres") {
  const Segment dot{Vec3(1.0, 1.0, 1.0), Vec3(1.0, 1.0, 1.0)};
  const PointCloud cloud({Vec3(1.0, 1.0, 4.0), Vec3(1.0, 3.0, 1.0)});
  const CloudDistance d = segment_cloud_distance(dot, cloud);
  CHECK(d.distance == 2.0);
  CHECK(d.witness == 1);
}

TEST_CASE("grid queries equal the linear scan on a 10k cloud") {
  std::mt19937_64 rng(17);
  const PointCloud cloud(random_points(10000, 1.0, rng), 0.1);
  for (int k = 0; k < 500; ++k) {
    const Segment seg = random_segment(1.3, rng);
    const CloudDistance fast = cloud.nearest_to_segment(seg);
    const CloudDistance slow = cloud.nearest_to_segment_brute_force(seg);
    CHECK(fast.distance == slow.distance);
    CHECK(fast.witness == slow.witness);
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& p : cloud.points()) {
      best = std::min(best, testing::oracle_distance(seg.a, seg.b, p));
    }
    CHECK(std::abs(fast.distance - best) < 1e-12);
  }
}

TEST_CASE("grid queries stay exact on clustered clouds and far queries") {
  std::mt19937_64 rng(29);
  std::vector<Vec3> pts = random_points(2000, 0.05, rng);
  for (Vec3& p : random_points(2000, 3.0, rng)) pts.push_back(p);
  // Duplicates exercise the index tie-break.
  pts.push_back(pts[5]);
  for (double cell : {0.0, 0.01, 0.5}) {
    const PointCloud cloud(pts, cell);
    for (int k = 0; k < 200; ++k) {
      const Segment seg = random_segment(k % 2 == 0 ? 0.2 : 9.0, rng);
      const CloudDistance fast = cloud.nearest_to_segment(seg);
      const CloudDistance slow = cloud.nearest_to_segment_brute_force(seg);
      CHECK(fast.distance == slow.distance);
      CHECK(fast.witness == slow.witness);
    }
  }
}

TEST_CASE("queries far outside a tiny grid stay exact") {
  const PointCloud single({Vec3(50.0, 50.0, 50.0)});
  const Segment seg{Vec3::Zero(), Vec3::UnitX()};
  const CloudDistance d = single.nearest_to_segment(seg);
  CHECK(d.witness == 0);
  CHECK(d.distance == doctest::Approx(testing::oracle_distance(seg.a, seg.b, single.points()[0]))
                          .epsilon(1e-15));
}

TEST_CASE("segment distance is invariant under rigid motion") {
  std::mt19937_64 rng(31);
  const std::vector<Vec3> pts = random_points(3000, 1.0, rng);
  Eigen::Isometry3d m = Eigen::Isometry3d::Identity();
  m.rotate(Eigen::AngleAxisd(1.1, Vec3(0.3, -0.5, 0.8).normalized()));
  m.pretranslate(Vec3(4.0, -2.0, 0.5));
  std::vector<Vec3> moved;
  for (const Vec3& p : pts) moved.push_back(m * p);
  const PointCloud a(pts, 0.08);
  const PointCloud b(moved, 0.08);
  for (int k = 0; k < 200; ++k) {
    const Segment s = random_segment(1.2, rng);
    const Segment t{m * s.a, m * s.b};
    CHECK(std::abs(a.nearest_to_segment(s).distance -
                   b.nearest_to_segment(t).distance) < 1e-9);
  }
}

TEST_CASE("capsule clearance inside the tunnel subtracts the radius") {
  const RobotModel arm = stick(1.0, 0.1);
  const Scene scene =
      make_scene({Vec3(0.5, 0.5, 0.0)}, Vec3(-2, -2, -2), Vec3(2, 2, 2));
  const SignedDistance sd = signed_distance(arm, Eigen::VectorXd::Zero(1), scene);
  CHECK(sd.value == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(sd.kind == WitnessKind::kCloud);
  CHECK(sd.point_index == 0);
}

TEST_CASE("capsule leaving the tunnel is penalized by depth plus radius") {
  const RobotModel arm = stick(1.0, 0.1);
  const Scene scene =
      make_scene({Vec3(0.5, 0.5, 0.0)}, Vec3(-2, -2, -2), Vec3(0.7, 2, 2));
  const SignedDistance sd = signed_distance(arm, Eigen::VectorXd::Zero(1), scene);
  CHECK(sd.value == doctest::Approx(-0.4).epsilon(1e-14));
  CHECK(sd.kind == WitnessKind::kTunnel);
  CHECK((sd.direction - Vec3(-1.0, 0.0, 0.0)).norm() < 1e-15);
}

TEST_CASE("excluded links do not count") {
  const RobotModel arm = stick(1.0, 0.1);
  Scene scene = make_scene({Vec3(0.5, 0.05, 0.0)}, Vec3(-2, -2, -2), Vec3(2, 2, 2));
  CHECK(signed_distance(arm, Eigen::VectorXd::Zero(1), scene).value < 0.0);
  scene.excluded_links = {0};
  CHECK(std::isinf(signed_distance(arm, Eigen::VectorXd::Zero(1), scene).value));
}

// Per-capsule clearance recomputed from the rule with the oracle distance.
double oracle_clearance(const Capsule& c, const Scene& scene) {
  const Eigen::Isometry3d inv = scene.tunnel.pose.inverse();
  double depth = 0.0;
  for (const Vec3& p : {c.p0, c.p1}) {
    const Vec3 local = inv * p;
    for (int a = 0; a < 3; ++a) {
      depth = std::max(depth, std::abs(local[a]) - scene.tunnel.half_extents[a]);
    }
  }
  if (depth > 0.0) return -depth - c.radius;
  double best = std::numeric_limits<double>::infinity();
  for (const Vec3& p : scene.cloud->points()) {
    best = std::min(best, testing::oracle_distance(c.p0, c.p1, p));
  }
  return best - c.radius - scene.safety_margin;
}

TEST_CASE("signed distance is the minimum of independent per-link clearances") {
  std::mt19937_64 rng(41);
  const RobotModel arm = testing::welding_6r();
  Scene scene = make_scene(testing::box_shell(Vec3(-0.3, -0.6, -0.02),
                                              Vec3(0.8, 0.6, 0.7), 0.03),
                           Vec3(-0.3, -0.6, -0.02), Vec3(0.8, 0.6, 0.7), 0.07);
  scene.safety_margin = 0.005;
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  for (int k = 0; k < 200; ++k) {
    const JointVector q = random_configuration(arm, rng);
    const SignedDistance sd = signed_distance(arm, q, scene);
    double expected = std::numeric_limits<double>::infinity();
    bool all_clear = true;
    for (const Capsule& c : world_capsules(arm, q)) {
      const double v = oracle_clearance(c, scene);
      expected = std::min(expected, v);
      all_clear = all_clear && v > 0.0;
    }
    CHECK(std::abs(sd.value - expected) < 1e-12);
    CHECK((sd.value > 0.0) == all_clear);
  }
}

TEST_CASE("signed distance is Lipschitz along joint-space lines") {
  std::mt19937_64 rng(43);
  const RobotModel arm = testing::welding_6r();
  const Vec3 lo(-0.3, -0.6, -0.02);
  const Vec3 hi(0.8, 0.6, 0.7);
  const Scene scene = make_scene(testing::box_shell(lo, hi, 0.005), lo, hi, 0.07);
  double link_length = 0.0;
  for (const RevoluteJoint& j : arm.joints()) link_length += j.origin.translation().norm();
  for (const LinkCapsule& c : arm.capsules()) link_length += (c.p1 - c.p0).norm();
  const double step = 1e-3;
  for (int line = 0; line < 10; ++line) {
    const JointVector a = random_configuration(arm, rng);
    const JointVector b = random_configuration(arm, rng);
    const int n = static_cast<int>(std::ceil((b - a).cwiseAbs().maxCoeff() / step));
    double prev = signed_distance(arm, a, scene).value;
    double worst = 0.0;
    for (int i = 1; i <= n; ++i) {
      const JointVector q = a + (b - a) * (static_cast<double>(i) / n);
      const double v = signed_distance(arm, q, scene).value;
      const double dq = ((b - a) / n).cwiseAbs().sum();
      worst = std::max(worst, std::abs(v - prev) / dq);
      prev = v;
    }
    CHECK(worst <= link_length);
  }
}

TEST_CASE("distance gradient agrees with central differences") {
  std::mt19937_64 rng(47);
  const RobotModel arm = testing::welding_6r();
  std::uniform_real_distribution<double> u(-0.6, 0.6);
  std::vector<Vec3> pts;
  for (int i = 0; i < 300; ++i) pts.push_back(Vec3(u(rng), u(rng), 0.3 + u(rng)));
  const Scene scene =
      make_scene(pts, Vec3(-3, -3, -3), Vec3(3, 3, 3), 0.07);
  const double h = 1e-6;
  int checked = 0;
  for (int k = 0; k < 300; ++k) {
    const JointVector q = random_configuration(arm, rng);
    const SignedDistance sd = signed_distance(arm, q, scene);
    const Eigen::VectorXd g = distance_gradient(arm, q, scene);
    bool same_witness = true;
    Eigen::VectorXd fd(arm.dof());
    for (int i = 0; i < arm.dof() && same_witness; ++i) {
      JointVector hi = q;
      JointVector lo = q;
      hi[i] += h;
      lo[i] -= h;
      const SignedDistance a = signed_distance(arm, hi, scene);
      const SignedDistance b = signed_distance(arm, lo, scene);
      same_witness = a.capsule == sd.capsule && b.capsule == sd.capsule &&
                     a.point_index == sd.point_index &&
                     b.point_index == sd.point_index;
      fd[i] = (a.value - b.value) / (2.0 * h);
    }
    if (!same_witness) continue;
    ++checked;
    CHECK((g - fd).cwiseAbs().maxCoeff() < 1e-4);
  }
  CHECK(checked > 200);
}

TEST_CASE("gradient of a single link is the contracted point Jacobian") {
  const RobotModel arm = stick(1.0, 0.05);
  const Scene scene = make_scene({Vec3(2.0, 1.0, 0.0)}, Vec3(-5, -5, -5), Vec3(5, 5, 5));
  const JointVector q = Eigen::VectorXd::Constant(1, 0.0);
  // Closest body point is the tip (1, 0, 0); separation direction from the
  // obstacle (2, 1, 0) to the tip is (-1, -1, 0)/sqrt(2); the tip moves
  // along +y per unit joint rate.
  const Eigen::VectorXd g = distance_gradient(arm, q, scene);
  CHECK(g[0] == doctest::Approx(-1.0 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("joints that cannot move the witness have zero gradient") {
  // Capsule on link 0 only: later joints have no effect on it, and link 0
  // spins about the capsule's own axis.
  RevoluteJoint j0;
  RevoluteJoint j1;
  j1.origin.translation() = Vec3(0.0, 0.0, 1.0);
  j1.axis = Vec3::UnitY();
  const RobotModel arm({j0, j1}, {{-3, 3}, {-3, 3}},
                       {{0, Vec3::Zero(), Vec3(0.0, 0.0, 1.0), 0.05}},
                       BodyPoint{1, Vec3(0.5, 0.0, 0.0)});
  const Scene scene = make_scene({Vec3(0.4, 0.3, 0.5)}, Vec3(-5, -5, -5), Vec3(5, 5, 5));
  const Eigen::VectorXd g = distance_gradient(arm, Eigen::Vector2d(0.3, 0.7), scene);
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 0.0);
}

TEST_CASE("scene validation") {
  const RobotModel arm = stick(1.0, 0.1);
  Scene s = make_scene({Vec3::Zero()}, Vec3(-1, -1, -1), Vec3(1, 1, 1));
  CHECK_NOTHROW(s.validate(arm));
  s.excluded_links = {3};
  CHECK_THROWS_AS(s.validate(arm), InvalidArgument);
  s.excluded_links.clear();
  s.tunnel.half_extents = Vec3(1.0, 0.0, 1.0);
  CHECK_THROWS_AS(s.validate(arm), InvalidArgument);
  CHECK_THROWS_AS(PointCloud(std::vector<Vec3>{}), InvalidArgument);
}

}  // namespace
}  // namespace htcp
