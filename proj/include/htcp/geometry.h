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

#ifndef HTCP_GEOMETRY_H_
#define HTCP_GEOMETRY_H_

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "htcp/kinematics.h"

namespace htcp {

struct Segment {
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
};

// Parameter in [0, 1] of the point on `seg` closest to `p`.
double closest_segment_param(const Segment& seg, const Vec3& p);
double point_segment_distance_sq(const Segment& seg, const Vec3& p);

struct CloudDistance {
  double distance = 0.0;
  int witness = -1;
};

// Obstacle point cloud with a uniform voxel grid built at construction.
// Nearest-point queries through the grid return the same distance and
// witness as a linear scan.
class PointCloud {
 public:
  // cell_size <= 0 picks a size from the cloud's extent and count.
  explicit PointCloud(std::vector<Vec3> points, double cell_size = 0.0);

  const std::vector<Vec3>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  double cell_size() const { return cell_size_; }
  const Vec3& min_corner() const { return origin_; }
  const Vec3& max_corner() const { return max_corner_; }

  CloudDistance nearest_to_segment(const Segment& seg) const;
  CloudDistance nearest_to_segment_brute_force(const Segment& seg) const;

 private:
  std::int64_t cell_index(int ix, int iy, int iz) const {
    return (static_cast<std::int64_t>(iz) * dims_[1] + iy) * dims_[0] + ix;
  }
  std::array<int, 3> cell_of(const Vec3& p) const;

  std::vector<Vec3> points_;
  double cell_size_ = 0.0;
  Vec3 origin_ = Vec3::Zero();
  Vec3 max_corner_ = Vec3::Zero();
  std::array<int, 3> dims_{1, 1, 1};
  // CSR layout: points of cell c are cell_points_[cell_start_[c] ..
  // cell_start_[c + 1]), in increasing index order.
  std::vector<std::int32_t> cell_start_;
  std::vector<std::int32_t> cell_points_;
};

CloudDistance segment_cloud_distance(const Segment& seg,
                                     const PointCloud& cloud);

// Box given by a rigid pose and half extents along its local axes.
struct OrientedBox {
  Eigen::Isometry3d pose = Eigen::Isometry3d::Identity();
  Vec3 half_extents = Vec3::Ones();

  static OrientedBox from_bounds(const Vec3& lo, const Vec3& hi);
  bool contains(const Vec3& p) const;
  double volume() const { return 8.0 * half_extents.prod(); }
};

// Obstacles plus the interior region the arm has to stay inside.
struct Scene {
  std::shared_ptr<const PointCloud> cloud;
  OrientedBox tunnel;
  std::vector<int> excluded_links;
  double safety_margin = 0.0;

  bool is_excluded(int link) const;
  void validate(const RobotModel& model) const;
};

enum class WitnessKind { kNone, kCloud, kTunnel };

// Minimum clearance over the non-excluded capsules and the feature that
// realizes it. `body_point` is the world point on the capsule axis treated
// as rigidly attached to `link`; `direction` is the unit vector along which
// moving that point increases the clearance.
struct SignedDistance {
  double value = 0.0;
  WitnessKind kind = WitnessKind::kNone;
  int link = -1;
  int capsule = -1;
  int point_index = -1;
  Vec3 body_point = Vec3::Zero();
  Vec3 direction = Vec3::Zero();
};

// Clearance of one world capsule under the tunnel sign rule.
SignedDistance capsule_clearance(const Capsule& capsule, const Scene& scene);

SignedDistance signed_distance(const RobotModel& model, const JointVector& q,
                               const Scene& scene);
SignedDistance signed_distance(const RobotModel& model,
                               const LinkFrames& frames, const Scene& scene);

// Gradient of the signed distance in joint space through the active
// witness (a subgradient where the minimum switches).
Eigen::VectorXd distance_gradient(const RobotModel& model,
                                  const JointVector& q, const Scene& scene);
Eigen::VectorXd distance_gradient(const RobotModel& model,
                                  const LinkFrames& frames,
                                  const SignedDistance& witness);

}  // namespace htcp

#endif  // HTCP_GEOMETRY_H_
