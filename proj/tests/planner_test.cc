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
#include <memory>

#include "doctest.h"
#include "fixtures.h"
#include "htcp/planner.h"
#include "htcp/scene_io.h"

namespace htcp {
namespace {

using testing::reference_tool_position;

Scene empty_scene() {
  Scene s;
  s.cloud = std::make_shared<PointCloud>(std::vector<Vec3>{Vec3(50, 50, 50)});
  s.tunnel = OrientedBox::from_bounds(Vec3::Constant(-100), Vec3::Constant(100));
  return s;
}

PlanOptions with(Fallback fallback) {
  PlanOptions o;
  o.fallback = fallback;
  o.nullspace.clearance_weight = 1000.0;
  return o;
}

// The bundled seam up to just before the hybrid planner's first hard failure
// from the home posture. The C-space planner gets stuck at waypoint 29.
GeneratedScene short_seam() {
  GeneratedScene g = generate_tunnel_scene(reference_tunnel());
  g.path.targets.resize(34);
  return g;
}

// Independent check of one recorded state.
void check_state(const RobotModel& arm, const Scene& scene, const Vec3& target,
                 const JointVector& q, const StepMetrics& m) {
  const double tcp = (reference_tool_position(arm, q) - target).norm();
  const double safe = signed_distance(arm, q, scene).value;
  CHECK(std::abs(tcp - m.tcp_distance) < 1e-9);
  CHECK(std::abs(safe - m.safe_distance) < 1e-9);
  if (m.success) {
    CHECK(tcp <= 1e-3);
    CHECK(safe > 0.0);
    CHECK(arm.within_limits(q));
  }
}

TEST_CASE("empty path gives an empty trajectory") {
  const RobotModel arm = testing::planar_3r();
  const Trajectory t = plan(arm, empty_scene(), TaskPath{},
                            Eigen::Vector3d(0.1, 0.2, 0.3), PlanOptions{});
  CHECK(t.states.empty());
  CHECK(t.per_step.empty());
  CHECK_FALSE(t.failed());
}

TEST_CASE("straight path in free space is tracked by the C-space planner") {
  const RobotModel arm = testing::planar_3r();
  const JointVector x0 = Eigen::Vector3d(0.3, 0.5, -0.4);
  const Vec3 start = reference_tool_position(arm, x0);
  TaskPath path;
  for (int i = 1; i <= 10; ++i) path.targets.push_back(start - Vec3(0.02 * i, 0.0, 0.0));
  const Scene scene = empty_scene();
  const Trajectory t = plan(arm, scene, path, x0, PlanOptions{});
  REQUIRE(t.per_step.size() == 10);
  CHECK(t.successes() == 10);
  JointVector x = x0;
  for (int i = 0; i < 10; ++i) {
    CHECK(t.per_step[i].planner_used == PlannerUsed::kCSpace);
    CHECK(t.per_step[i].tcp_distance <= 1e-3);
    check_state(arm, scene, path.targets[i], t.states[i], t.per_step[i]);
    // Each waypoint is reachable from the previous state (IK oracle), and
    // the planner's tool point agrees with it.
    const JointVector ik = solve_ik(arm, x, path.targets[i]);
    CHECK((reference_tool_position(arm, ik) -
           reference_tool_position(arm, t.states[i]))
              .norm() <= 1e-3);
    x = t.states[i];
  }
}

TEST_CASE("a stuck C-space step is rescued by the null-space planner") {
  const RobotModel arm = testing::welding_6r();
  const GeneratedScene g = short_seam();
  const JointVector home = reference_arm_home();

  const Trajectory base = plan(arm, g.scene, g.path, home, with(NoFallback{}));
  REQUIRE(base.failed());
  CHECK(base.per_step.size() == 30);
  CHECK(base.per_step.back().planner_used == PlannerUsed::kNone);

  const Trajectory hybrid = plan(arm, g.scene, g.path, home, with(NullSpaceFallback{}));
  CHECK(hybrid.successes() == g.path.horizon());
  CHECK(hybrid.per_step[29].planner_used == PlannerUsed::kNullSpace);
  for (int i = 0; i < hybrid.successes(); ++i) {
    CHECK(hybrid.per_step[i].safe_distance > 0.0);
    check_state(arm, g.scene, g.path.targets[i], hybrid.states[i],
                hybrid.per_step[i]);
  }
}

TEST_CASE("recorded metrics survive independent re-verification") {
  const RobotModel arm = testing::welding_6r();
  const GeneratedScene g = generate_tunnel_scene(reference_tunnel());
  for (const Fallback& f : {Fallback{NoFallback{}}, Fallback{NullSpaceFallback{}},
                            Fallback{CSpaceSampleFallback{}},
                            Fallback{NSpaceSampleFallback{}}}) {
    const Trajectory t = plan(arm, g.scene, g.path, reference_arm_home(), with(f));
    REQUIRE(t.states.size() == t.per_step.size());
    const std::vector<VerifiedStep> v =
        verify_trajectory(arm, g.scene, g.path, t, 1e-3);
    REQUIRE(v.size() == t.per_step.size());
    for (std::size_t i = 0; i < t.per_step.size(); ++i) {
      check_state(arm, g.scene, g.path.targets[i], t.states[i], t.per_step[i]);
      CHECK(v[i].success == t.per_step[i].success);
    }
    // Only the last step may fail.
    for (std::size_t i = 0; i + 1 < t.per_step.size(); ++i) {
      CHECK(t.per_step[i].success);
    }
  }
}

TEST_CASE("per-step displacement stays bounded") {
  const RobotModel arm = testing::welding_6r();
  const GeneratedScene g = short_seam();
  const PlanOptions o = with(NullSpaceFallback{});
  const Trajectory t = plan(arm, g.scene, g.path, reference_arm_home(), o);
  REQUIRE(t.successes() == g.path.horizon());
  const double bound =
      o.cspace.trust_region + o.nullspace.alpha * o.nullspace.max_steps;
  double energy = 0.0;
  JointVector x = reference_arm_home();
  for (const JointVector& q : t.states) {
    CHECK((q - x).cwiseAbs().maxCoeff() <= bound);
    energy += (q - x).squaredNorm();
    x = q;
  }
  CHECK(std::isfinite(energy));
}

TEST_CASE("fallbacks never do worse than the bare C-space planner") {
  const RobotModel arm = testing::welding_6r();
  const GeneratedScene g = generate_tunnel_scene(reference_tunnel());
  const JointVector home = reference_arm_home();
  for (double offset : {-0.1, 0.0, 0.1}) {
    JointVector x = home;
    x[3] += offset;
    if (signed_distance(arm, x, g.scene).value <= 0.0) continue;
    const int base = plan(arm, g.scene, g.path, x, with(NoFallback{})).successes();
    for (const Fallback& f :
         {Fallback{NullSpaceFallback{}}, Fallback{CSpaceSampleFallback{}},
          Fallback{NSpaceSampleFallback{}}}) {
      CHECK(plan(arm, g.scene, g.path, x, with(f)).successes() >= base);
    }
  }
}

TEST_CASE("seeded plans are reproducible") {
  const RobotModel arm = testing::welding_6r();
  const GeneratedScene g = short_seam();
  for (const Fallback& f :
       {Fallback{CSpaceSampleFallback{}}, Fallback{NSpaceSampleFallback{}}}) {
    PlanOptions o = with(f);
    o.seed = 42;
    o.record_timing = false;
    const Trajectory a = plan(arm, g.scene, g.path, reference_arm_home(), o);
    const Trajectory b = plan(arm, g.scene, g.path, reference_arm_home(), o);
    REQUIRE(a.states.size() == b.states.size());
    for (std::size_t i = 0; i < a.states.size(); ++i) {
      CHECK(a.states[i] == b.states[i]);
      CHECK(a.per_step[i].wall_time == 0.0);
    }
  }
}

TEST_CASE("invalid inputs are rejected before planning") {
  const RobotModel arm = testing::planar_3r();
  const Scene scene = empty_scene();
  TaskPath path;
  path.targets = {Vec3(1.0, 1.0, 0.0)};
  CHECK_THROWS_AS(plan(arm, scene, path, Eigen::Vector3d(4.0, 0.0, 0.0), PlanOptions{}),
                  InvalidArgument);
  Scene blocked = scene;
  blocked.cloud = std::make_shared<PointCloud>(std::vector<Vec3>{Vec3(0.5, 0.0, 0.0)});
  CHECK_THROWS_AS(plan(arm, blocked, path, Eigen::Vector3d::Zero(), PlanOptions{}),
                  InvalidArgument);
  TaskPath jumpy;
  jumpy.targets = {Vec3(1.0, 1.0, 0.0), Vec3(1.5, 1.0, 0.0)};
  CHECK_THROWS_AS(jumpy.validate(), InvalidArgument);
}

}  // namespace
}  // namespace htcp
