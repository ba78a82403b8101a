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

// Robots, scenes, and reference implementations shared by the tests.

#ifndef HTCP_TESTS_FIXTURES_H_
#define HTCP_TESTS_FIXTURES_H_

#include <optional>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "htcp/geometry.h"
#include "htcp/kinematics.h"
#include "htcp/qp.h"

namespace htcp::testing {

// Three joints about z with unit links along x: a planar arm whose tool
// reachable set is the disc of radius 3.
RobotModel planar_3r();
// Seven joints with tilted axes and rotated joint frames.
RobotModel skewed_7r();
// The bundled welding arm.
RobotModel welding_6r();

std::vector<RobotModel> arm_fixtures();

JointVector random_configuration(const RobotModel& model, std::mt19937_64& rng);

// Homogeneous transform chain built from explicit Rodrigues rotations; an
// independent route to the tool position.
Vec3 reference_tool_position(const RobotModel& model, const JointVector& q);

// Central differences of the tool position, step h.
Eigen::MatrixXd finite_difference_jacobian(const RobotModel& model,
                                           const JointVector& q, double h);

// Open box of the given bounds sampled on its six faces.
std::vector<Vec3> box_shell(const Vec3& lo, const Vec3& hi, double spacing);

// Independent point-to-segment distance: minimize |a + t(b - a) - p| over
// t in [0, 1] by projection and clamping, written out componentwise.
double oracle_distance(const Vec3& a, const Vec3& b, const Vec3& p);

struct QpCandidate {
  Eigen::VectorXd x;
  double objective = 0.0;
};

// Exhaustive active-set enumeration: treat every subset of inequality rows as
// equalities, solve the KKT system directly, keep the best feasible point.
std::optional<QpCandidate> enumerate_qp(const QPProblem& p);

struct RandomQp {
  QPProblem problem;
  Eigen::VectorXd feasible_point;
};

// Strictly convex problem with m_eq equalities and m_in inequalities, all
// satisfied at feasible_point; about a third of the inequalities are tight.
RandomQp random_qp(std::mt19937_64& rng, int n, int m_eq, int m_in);

}  // namespace htcp::testing

#endif  // HTCP_TESTS_FIXTURES_H_
