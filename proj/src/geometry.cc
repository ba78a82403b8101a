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

#include "htcp/geometry.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace htcp {
namespace {

constexpr std::int64_t kMaxCells = 1 << 22;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Lexicographic (squared distance, index) comparison shared by the grid
// search and the linear scan so both pick the same witness.
struct Best {
  double d2 = kInf;
  int index = -1;

  void offer(double candidate_d2, int candidate_index) {
    if (candidate_d2 < d2 || (candidate_d2 == d2 && candidate_index < index)) {
      d2 = candidate_d2;
      index = candidate_index;
    }
  }
};

int floor_to_int(double v) {
  constexpr double kLimit = 1e8;
  return static_cast<int>(std::floor(std::clamp(v, -kLimit, kLimit)));
}

}  // namespace

double closest_segment_param(const Segment& seg, const Vec3& p) {
  const Vec3 d = seg.b - seg.a;
  const double dd = d.squaredNorm();
  if (dd == 0.0) return 0.0;
  return std::clamp((p - seg.a).dot(d) / dd, 0.0, 1.0);
}

double point_segment_distance_sq(const Segment& seg, const Vec3& p) {
  const double t = closest_segment_param(seg, p);
  return (seg.a + t * (seg.b - seg.a) - p).squaredNorm();
}

PointCloud::PointCloud(std::vector<Vec3> points, double cell_size)
    : points_(std::move(points)) {
  if (points_.empty()) throw InvalidArgument("point cloud is empty");
  if (points_.size() >
      static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max())) {
    throw InvalidArgument("point cloud too large");
  }
  origin_ = points_.front();
  max_corner_ = points_.front();
  for (const Vec3& p : points_) {
    if (!p.allFinite()) throw InvalidArgument("point cloud has non-finite point");
    origin_ = origin_.cwiseMin(p);
    max_corner_ = max_corner_.cwiseMax(p);
  }
  const Vec3 extent = max_corner_ - origin_;
  cell_size_ = cell_size > 0.0 ? cell_size
                               : std::max(extent.maxCoeff() / 32.0, 1e-6);
  auto compute_dims = [&] {
    std::int64_t total = 1;
    for (int k = 0; k < 3; ++k) {
      dims_[k] = std::max(1, floor_to_int(extent[k] / cell_size_) + 1);
      total *= dims_[k];
    }
    return total;
  };
  while (compute_dims() > kMaxCells) cell_size_ *= 1.5;

  const std::int64_t cells =
      static_cast<std::int64_t>(dims_[0]) * dims_[1] * dims_[2];
  std::vector<std::int32_t> counts(cells + 1, 0);
  std::vector<std::int64_t> owner(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto c = cell_of(points_[i]);
    owner[i] = cell_index(c[0], c[1], c[2]);
    ++counts[owner[i] + 1];
  }
  for (std::int64_t c = 0; c < cells; ++c) counts[c + 1] += counts[c];
  cell_start_ = counts;
  cell_points_.resize(points_.size());
  std::vector<std::int32_t> cursor(counts.begin(), counts.end() - 1);
  for (std::size_t i = 0; i < points_.size(); ++i) {
    cell_points_[cursor[owner[i]]++] = static_cast<std::int32_t>(i);
  }
}

std::array<int, 3> PointCloud::cell_of(const Vec3& p) const {
  std::array<int, 3> c;
  for (int k = 0; k < 3; ++k) {
    c[k] = std::clamp(floor_to_int((p[k] - origin_[k]) / cell_size_), 0,
                      dims_[k] - 1);
  }
  return c;
}

CloudDistance PointCloud::nearest_to_segment_brute_force(
    const Segment& seg) const {
  Best best;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    best.offer(point_segment_distance_sq(seg, points_[i]),
               static_cast<int>(i));
  }
  return {std::sqrt(best.d2), best.index};
}

CloudDistance PointCloud::nearest_to_segment(const Segment& seg) const {
  const Vec3 lo = seg.a.cwiseMin(seg.b);
  const Vec3 hi = seg.a.cwiseMax(seg.b);
  std::array<int, 3> base_lo;
  std::array<int, 3> base_hi;
  for (int k = 0; k < 3; ++k) {
    base_lo[k] = floor_to_int((lo[k] - origin_[k]) / cell_size_);
    base_hi[k] = floor_to_int((hi[k] - origin_[k]) / cell_size_);
  }
  const double half_diag = 0.5 * std::sqrt(3.0) * cell_size_;

  // Rings that miss the grid entirely hold no points; skip them.
  int first_ring = 0;
  for (int k = 0; k < 3; ++k) {
    first_ring = std::max({first_ring, base_lo[k] - (dims_[k] - 1), -base_hi[k]});
  }

  Best best;
  for (int ring = first_ring;; ++ring) {
    std::array<int, 3> r_lo;
    std::array<int, 3> r_hi;
    bool covers_grid = true;
    for (int k = 0; k < 3; ++k) {
      r_lo[k] = base_lo[k] - ring;
      r_hi[k] = base_hi[k] + ring;
      covers_grid = covers_grid && r_lo[k] <= 0 && r_hi[k] >= dims_[k] - 1;
    }
    const int z0 = std::max(r_lo[2], 0);
    const int z1 = std::min(r_hi[2], dims_[2] - 1);
    const int y0 = std::max(r_lo[1], 0);
    const int y1 = std::min(r_hi[1], dims_[1] - 1);
    const int x0 = std::max(r_lo[0], 0);
    const int x1 = std::min(r_hi[0], dims_[0] - 1);
    for (int iz = z0; iz <= z1; ++iz) {
      const bool z_shell = iz == r_lo[2] || iz == r_hi[2];
      for (int iy = y0; iy <= y1; ++iy) {
        const bool yz_shell = z_shell || iy == r_lo[1] || iy == r_hi[1];
        for (int ix = x0; ix <= x1; ++ix) {
          if (ring > 0 && !yz_shell && ix != r_lo[0] && ix != r_hi[0]) {
            continue;
          }
          const std::int64_t c = cell_index(ix, iy, iz);
          const std::int32_t begin = cell_start_[c];
          const std::int32_t end = cell_start_[c + 1];
          if (begin == end) continue;
          if (best.index >= 0) {
            const Vec3 center =
                origin_ + cell_size_ * Vec3(ix + 0.5, iy + 0.5, iz + 0.5);
            const double lower =
                std::sqrt(point_segment_distance_sq(seg, center)) - half_diag;
            if (lower > std::sqrt(best.d2) + 1e-12) continue;
          }
          for (std::int32_t k = begin; k < end; ++k) {
            const int idx = cell_points_[k];
            best.offer(point_segment_distance_sq(seg, points_[idx]), idx);
          }
        }
      }
    }
    // Unvisited cells are more than ring * cell_size away from the
    // segment's bounding box.
    const double cleared = ring * cell_size_;
    if (covers_grid || (best.index >= 0 && best.d2 <= cleared * cleared)) {
      break;
    }
  }
  return {std::sqrt(best.d2), best.index};
}

CloudDistance segment_cloud_distance(const Segment& seg,
                                     const PointCloud& cloud) {
  return cloud.nearest_to_segment(seg);
}

OrientedBox OrientedBox::from_bounds(const Vec3& lo, const Vec3& hi) {
  OrientedBox box;
  box.pose = Eigen::Isometry3d::Identity();
  box.pose.translation() = 0.5 * (lo + hi);
  box.half_extents = 0.5 * (hi - lo);
  return box;
}

bool OrientedBox::contains(const Vec3& p) const {
  const Vec3 local = pose.inverse() * p;
  return (local.cwiseAbs().array() <= half_extents.array()).all();
}

bool Scene::is_excluded(int link) const {
  return std::find(excluded_links.begin(), excluded_links.end(), link) !=
         excluded_links.end();
}

void Scene::validate(const RobotModel& model) const {
  if (!cloud || cloud->size() == 0) {
    throw InvalidArgument("scene has no obstacle points");
  }
  if (!(tunnel.half_extents.array() > 0.0).all()) {
    throw InvalidArgument("tunnel box must have positive volume");
  }
  for (int link : excluded_links) {
    if (link < 0 || link >= model.dof()) {
      throw InvalidArgument("excluded link " + std::to_string(link) +
                            " is not a link of the robot");
    }
  }
  if (!(safety_margin >= 0.0)) {
    throw InvalidArgument("safety margin must be >= 0");
  }
}

SignedDistance capsule_clearance(const Capsule& capsule, const Scene& scene) {
  SignedDistance out;
  out.link = capsule.link;

  // Deepest excursion of the segment outside the tunnel. The per-face
  // violation is convex along the segment, so endpoints suffice.
  const Eigen::Isometry3d to_box = scene.tunnel.pose.inverse();
  const Vec3& h = scene.tunnel.half_extents;
  double depth = 0.0;
  Vec3 deepest_point = Vec3::Zero();
  Vec3 inward = Vec3::Zero();
  const Vec3* endpoints[2] = {&capsule.p0, &capsule.p1};
  for (const Vec3* p : endpoints) {
    const Vec3 local = to_box * *p;
    for (int axis = 0; axis < 3; ++axis) {
      const double over = local[axis] - h[axis];
      if (over > depth) {
        depth = over;
        deepest_point = *p;
        inward = -scene.tunnel.pose.linear().col(axis);
      }
      const double under = -h[axis] - local[axis];
      if (under > depth) {
        depth = under;
        deepest_point = *p;
        inward = scene.tunnel.pose.linear().col(axis);
      }
    }
  }
  if (depth > 0.0) {
    out.kind = WitnessKind::kTunnel;
    out.value = -depth - capsule.radius;
    out.body_point = deepest_point;
    out.direction = inward;
    return out;
  }

  const Segment seg{capsule.p0, capsule.p1};
  const CloudDistance near = scene.cloud->nearest_to_segment(seg);
  const Vec3& obstacle = scene.cloud->points()[near.witness];
  const double t = closest_segment_param(seg, obstacle);
  out.kind = WitnessKind::kCloud;
  out.point_index = near.witness;
  out.value = near.distance - capsule.radius - scene.safety_margin;
  out.body_point = seg.a + t * (seg.b - seg.a);
  if (near.distance > 0.0) {
    out.direction = (out.body_point - obstacle) / near.distance;
  }
  return out;
}

SignedDistance signed_distance(const RobotModel& model,
                               const LinkFrames& frames, const Scene& scene) {
  SignedDistance best;
  best.value = kInf;
  const std::vector<LinkCapsule>& locals = model.capsules();
  for (std::size_t i = 0; i < locals.size(); ++i) {
    const LinkCapsule& lc = locals[i];
    if (scene.is_excluded(lc.link)) continue;
    const Eigen::Isometry3d& f = frames.frame(lc.link);
    const Capsule world{f * lc.p0, f * lc.p1, lc.radius, lc.link};
    SignedDistance c = capsule_clearance(world, scene);
    c.capsule = static_cast<int>(i);
    if (c.value < best.value ||
        (c.value == best.value && c.link < best.link)) {
      best = c;
    }
  }
  return best;
}

SignedDistance signed_distance(const RobotModel& model, const JointVector& q,
                               const Scene& scene) {
  return signed_distance(model, LinkFrames(model, q), scene);
}

Eigen::VectorXd distance_gradient(const RobotModel& model,
                                  const LinkFrames& frames,
                                  const SignedDistance& witness) {
  if (witness.kind == WitnessKind::kNone) {
    return Eigen::VectorXd::Zero(model.dof());
  }
  return frames.point_jacobian(witness.link, witness.body_point).transpose() *
         witness.direction;
}

Eigen::VectorXd distance_gradient(const RobotModel& model,
                                  const JointVector& q, const Scene& scene) {
  LinkFrames frames(model, q);
  return distance_gradient(model, frames, signed_distance(model, frames, scene));
}

}  // namespace htcp
