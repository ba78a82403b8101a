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

#include "htcp/scene_io.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace htcp {
namespace {

using nlohmann::json;

constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Field access with error paths.

void require_object(const json& j, const std::string& field) {
  if (!j.is_object()) throw SpecError(field, "expected an object");
}

void check_keys(const json& j, const std::string& field,
                std::initializer_list<const char*> allowed) {
  require_object(j, field);
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) {
          return key == a;
        }) == allowed.end()) {
      throw SpecError(field + "/" + key, "unknown field");
    }
  }
}

double get_number(const json& j, const std::string& field) {
  if (!j.is_number()) throw SpecError(field, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw SpecError(field, "must be finite");
  return v;
}

double number_or(const json& parent, const char* key, double fallback,
                 const std::string& field) {
  if (!parent.contains(key)) return fallback;
  return get_number(parent.at(key), field + "/" + key);
}

long long get_integer(const json& j, const std::string& field) {
  if (!j.is_number_integer()) throw SpecError(field, "expected an integer");
  return j.get<long long>();
}

int int_or(const json& parent, const char* key, int fallback,
           const std::string& field) {
  if (!parent.contains(key)) return fallback;
  const long long v = get_integer(parent.at(key), field + "/" + key);
  if (v < std::numeric_limits<int>::min() ||
      v > std::numeric_limits<int>::max()) {
    throw SpecError(field + "/" + key, "integer out of range");
  }
  return static_cast<int>(v);
}

std::uint64_t get_seed(const json& j, const std::string& field) {
  if (!j.is_number_unsigned() && !j.is_number_integer()) {
    throw SpecError(field, "expected a non-negative integer");
  }
  if (j.is_number_integer() && j.get<long long>() < 0) {
    throw SpecError(field, "expected a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

Vec3 get_vec3(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 3) {
    throw SpecError(field, "expected an array of 3 numbers");
  }
  return {get_number(j[0], field + "/0"), get_number(j[1], field + "/1"),
          get_number(j[2], field + "/2")};
}

std::vector<double> get_numbers(const json& j, const std::string& field) {
  if (!j.is_array()) throw SpecError(field, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(get_number(j[i], field + "/" + std::to_string(i)));
  }
  return out;
}

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Matrix3d rpy_to_matrix(const Vec3& rpy) {
  return (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) *
          Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
      .toRotationMatrix();
}

Vec3 matrix_to_rpy(const Eigen::Matrix3d& r) {
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  double roll;
  double yaw;
  if (std::abs(std::cos(pitch)) > 1e-9) {
    roll = std::atan2(r(2, 1), r(2, 2));
    yaw = std::atan2(r(1, 0), r(0, 0));
  } else {
    roll = 0.0;
    yaw = std::atan2(-r(0, 1), r(1, 1));
  }
  return {roll, pitch, yaw};
}

Eigen::Isometry3d pose_from_json(const json& j, const std::string& field) {
  check_keys(j, field, {"xyz", "rpy"});
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  if (j.contains("xyz")) t.translation() = get_vec3(j["xyz"], field + "/xyz");
  if (j.contains("rpy")) {
    t.linear() = rpy_to_matrix(get_vec3(j["rpy"], field + "/rpy"));
  }
  return t;
}

json pose_json(const Eigen::Isometry3d& t) {
  return {{"xyz", vec3_json(t.translation())},
          {"rpy", vec3_json(matrix_to_rpy(t.linear()))}};
}

std::vector<double> linspace_grid(double range, int steps) {
  if (steps == 1) return {0.0};
  std::vector<double> out;
  for (int i = 0; i < steps; ++i) {
    out.push_back(-range + 2.0 * range * i / (steps - 1));
  }
  return out;
}

// Either a list of values or {range, steps} symmetric about zero.
std::vector<double> grid_axis(const json& j, const std::string& field,
                              double scale) {
  std::vector<double> values;
  if (j.is_array()) {
    values = get_numbers(j, field);
  } else {
    check_keys(j, field, {"range", "steps"});
    const double range = number_or(j, "range", 0.0, field);
    const int steps = int_or(j, "steps", 1, field);
    if (steps < 1) throw SpecError(field + "/steps", "must be >= 1");
    if (range < 0.0) throw SpecError(field + "/range", "must be >= 0");
    values = linspace_grid(range, steps);
  }
  if (values.empty()) throw SpecError(field, "grid axis must be nonempty");
  for (double& v : values) v *= scale;
  return values;
}

// ---------------------------------------------------------------------------
// Scene generation.

void sample_rect(const Vec3& corner, const Vec3& u, const Vec3& v,
                 double spacing, std::mt19937_64& rng,
                 std::vector<Vec3>* out) {
  const double lu = u.norm();
  const double lv = v.norm();
  const int nu = std::max(1, static_cast<int>(std::ceil(lu / spacing)));
  const int nv = std::max(1, static_cast<int>(std::ceil(lv / spacing)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < nu; ++i) {
    for (int k = 0; k < nv; ++k) {
      const double a = (i + unit(rng)) / nu;
      const double b = (k + unit(rng)) / nv;
      out->push_back(corner + a * u + b * v);
    }
  }
}

TunnelParams tunnel_params_from_json(const json& j, const std::string& field) {
  check_keys(j, field,
             {"type", "length", "width", "height", "density", "waypoints",
              "seed", "start_x", "seam_inset", "seam_start_x", "seam_end_x",
              "rib_count", "rib_depth", "stiffener_count",
              "stiffener_height", "stiffener_width", "scallop"});
  if (j.contains("type") &&
      (!j["type"].is_string() || j["type"].get<std::string>() != "tunnel")) {
    throw SpecError(field + "/type", "only \"tunnel\" generators exist");
  }
  TunnelParams p;
  p.length = number_or(j, "length", p.length, field);
  p.width = number_or(j, "width", p.width, field);
  p.height = number_or(j, "height", p.height, field);
  p.density = number_or(j, "density", p.density, field);
  p.waypoints = int_or(j, "waypoints", p.waypoints, field);
  if (j.contains("seed")) p.seed = get_seed(j["seed"], field + "/seed");
  p.start_x = number_or(j, "start_x", p.start_x, field);
  p.seam_inset = number_or(j, "seam_inset", p.seam_inset, field);
  p.seam_start_x = number_or(j, "seam_start_x", p.seam_start_x, field);
  p.seam_end_x = number_or(j, "seam_end_x", p.seam_end_x, field);
  p.rib_count = int_or(j, "rib_count", p.rib_count, field);
  p.rib_depth = number_or(j, "rib_depth", p.rib_depth, field);
  p.stiffener_count = int_or(j, "stiffener_count", p.stiffener_count, field);
  p.stiffener_height =
      number_or(j, "stiffener_height", p.stiffener_height, field);
  p.stiffener_width = number_or(j, "stiffener_width", p.stiffener_width, field);
  p.scallop = number_or(j, "scallop", p.scallop, field);
  try {
    p.validate();
  } catch (const InvalidArgument& e) {
    throw SpecError(field, e.what());
  }
  return p;
}

}  // namespace

json tunnel_params_to_json(const TunnelParams& p) {
  return {{"type", "tunnel"},
          {"length", p.length},
          {"width", p.width},
          {"height", p.height},
          {"density", p.density},
          {"waypoints", p.waypoints},
          {"seed", p.seed},
          {"start_x", p.start_x},
          {"seam_inset", p.seam_inset},
          {"seam_start_x", p.seam_start_x},
          {"seam_end_x", p.seam_end_x},
          {"rib_count", p.rib_count},
          {"rib_depth", p.rib_depth},
          {"stiffener_count", p.stiffener_count},
          {"stiffener_height", p.stiffener_height},
          {"stiffener_width", p.stiffener_width},
          {"scallop", p.scallop}};
}

namespace {

OrientedBox box_from_json(const json& j, const std::string& field) {
  require_object(j, field);
  if (j.contains("min") || j.contains("max")) {
    check_keys(j, field, {"min", "max"});
    if (!j.contains("min") || !j.contains("max")) {
      throw SpecError(field, "needs both min and max");
    }
    const Vec3 lo = get_vec3(j["min"], field + "/min");
    const Vec3 hi = get_vec3(j["max"], field + "/max");
    if (!(lo.array() < hi.array()).all()) {
      throw SpecError(field, "tunnel must have positive volume");
    }
    return OrientedBox::from_bounds(lo, hi);
  }
  check_keys(j, field, {"center", "rpy", "half_extents"});
  OrientedBox box;
  if (!j.contains("center") || !j.contains("half_extents")) {
    throw SpecError(field, "needs min/max or center/half_extents");
  }
  box.pose.translation() = get_vec3(j["center"], field + "/center");
  if (j.contains("rpy")) {
    box.pose.linear() = rpy_to_matrix(get_vec3(j["rpy"], field + "/rpy"));
  }
  box.half_extents = get_vec3(j["half_extents"], field + "/half_extents");
  if (!(box.half_extents.array() > 0.0).all()) {
    throw SpecError(field + "/half_extents", "must be positive");
  }
  return box;
}

json box_json(const OrientedBox& box) {
  return {{"center", vec3_json(box.pose.translation())},
          {"rpy", vec3_json(matrix_to_rpy(box.pose.linear()))},
          {"half_extents", vec3_json(box.half_extents)}};
}

void apply_cspace(const json& j, const std::string& field, CSpaceConfig* c) {
  check_keys(j, field,
             {"eq_threshold", "safety_eps", "max_outer_iter",
              "step_converge_tol", "trust_region"});
  c->eq_threshold = number_or(j, "eq_threshold", c->eq_threshold, field);
  c->safety_eps = number_or(j, "safety_eps", c->safety_eps, field);
  c->max_outer_iter = int_or(j, "max_outer_iter", c->max_outer_iter, field);
  c->step_converge_tol =
      number_or(j, "step_converge_tol", c->step_converge_tol, field);
  c->trust_region = number_or(j, "trust_region", c->trust_region, field);
  try {
    c->validate();
  } catch (const InvalidArgument& e) {
    throw SpecError(field, e.what());
  }
}

DirectionStrategy strategy_from_json(const json& j, const std::string& field) {
  require_object(j, field);
  if (!j.contains("type") || !j["type"].is_string()) {
    throw SpecError(field + "/type",
                    "expected \"sampling\" or \"projected_gradient\"");
  }
  const std::string type = j["type"].get<std::string>();
  if (type == "sampling") {
    check_keys(j, field, {"type", "sample_count", "seed"});
    UnitSphereSampling s;
    s.sample_count = int_or(j, "sample_count", s.sample_count, field);
    if (j.contains("seed")) s.seed = get_seed(j["seed"], field + "/seed");
    return s;
  }
  if (type == "projected_gradient") {
    check_keys(j, field, {"type", "inner_iters", "learning_rate"});
    ProjectedGradientDescent s;
    s.inner_iters = int_or(j, "inner_iters", s.inner_iters, field);
    s.learning_rate = number_or(j, "learning_rate", s.learning_rate, field);
    return s;
  }
  throw SpecError(field + "/type",
                  "unknown strategy \"" + type +
                      "\" (expected sampling or projected_gradient)");
}

json strategy_json(const DirectionStrategy& s) {
  if (const auto* u = std::get_if<UnitSphereSampling>(&s)) {
    return {{"type", "sampling"},
            {"sample_count", u->sample_count},
            {"seed", u->seed}};
  }
  const auto& g = std::get<ProjectedGradientDescent>(s);
  return {{"type", "projected_gradient"},
          {"inner_iters", g.inner_iters},
          {"learning_rate", g.learning_rate}};
}

void apply_nullspace(const json& j, const std::string& field,
                     NullSpaceConfig* c) {
  check_keys(j, field,
             {"alpha", "reanchor_threshold", "max_steps", "ik_tol", "strategy",
              "clearance_weight"});
  c->alpha = number_or(j, "alpha", c->alpha, field);
  c->reanchor_threshold =
      number_or(j, "reanchor_threshold", c->reanchor_threshold, field);
  c->max_steps = int_or(j, "max_steps", c->max_steps, field);
  c->ik_tol = number_or(j, "ik_tol", c->ik_tol, field);
  c->clearance_weight =
      number_or(j, "clearance_weight", c->clearance_weight, field);
  if (j.contains("strategy")) {
    c->strategy = strategy_from_json(j["strategy"], field + "/strategy");
  }
  try {
    c->validate();
  } catch (const InvalidArgument& e) {
    throw SpecError(field, e.what());
  }
}

double default_cell_size(const RobotModel& model, double margin) {
  double r = 0.0;
  for (const LinkCapsule& c : model.capsules()) r = std::max(r, c.radius);
  return r > 0.0 ? 2.0 * r + margin : 0.0;
}

std::string format_offset(double v) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(4);
  s << v;
  return s.str();
}

}  // namespace

// ---------------------------------------------------------------------------

void TunnelParams::validate() const {
  if (!(length > 0.0 && width > 0.0 && height > 0.0)) {
    throw InvalidArgument("tunnel dimensions must be positive");
  }
  if (!(density > 0.0)) throw InvalidArgument("wall density must be > 0");
  if (waypoints < 0) throw InvalidArgument("waypoint count must be >= 0");
  if (rib_count < 0) throw InvalidArgument("rib_count must be >= 0");
  if (rib_count > 0 && !(rib_depth > 0.0 && rib_depth < height)) {
    throw InvalidArgument("rib_depth must lie in (0, height)");
  }
  if (stiffener_count < 0) throw InvalidArgument("stiffener_count must be >= 0");
  if (stiffener_count > 0 &&
      !(stiffener_height > 0.0 && stiffener_height <= height &&
        stiffener_width > 0.0 && stiffener_width <= width && scallop > 0.0 &&
        scallop < std::min(stiffener_height, stiffener_width))) {
    throw InvalidArgument(
        "stiffeners need 0 < scallop < min(height, width) within the tunnel");
  }
  if (stiffener_count > 0 && !(seam_inset < scallop)) {
    throw InvalidArgument("weld path must pass through the scallops");
  }
  const double end = start_x + length;
  if (!(seam_inset > 0.0 && seam_inset < 0.5 * width &&
        seam_inset < 0.5 * height && seam_start_x > start_x &&
        seam_start_x < end && seam_end_x > start_x && seam_end_x < end)) {
    throw InvalidArgument("weld path is not interior to the tunnel");
  }
}

GeneratedScene generate_tunnel_scene(const TunnelParams& p, double cell_size) {
  p.validate();
  std::mt19937_64 rng(p.seed);
  const double spacing = 1.0 / std::sqrt(p.density);
  const double hw = 0.5 * p.width;
  const Vec3 along(p.length, 0.0, 0.0);
  std::vector<Vec3> points;
  // Floor, ceiling, right wall (y = -w/2), left wall (y = +w/2).
  sample_rect({p.start_x, -hw, 0.0}, along, {0.0, p.width, 0.0}, spacing, rng,
              &points);
  sample_rect({p.start_x, -hw, p.height}, along, {0.0, p.width, 0.0}, spacing,
              rng, &points);
  sample_rect({p.start_x, -hw, 0.0}, along, {0.0, 0.0, p.height}, spacing, rng,
              &points);
  sample_rect({p.start_x, hw, 0.0}, along, {0.0, 0.0, p.height}, spacing, rng,
              &points);
  for (int r = 0; r < p.rib_count; ++r) {
    const double x =
        p.seam_start_x + (p.seam_end_x - p.seam_start_x) * (r + 1.0) /
                             (p.rib_count + 1.0);
    sample_rect({x, -hw, p.height - p.rib_depth}, {0.0, p.width, 0.0},
                {0.0, 0.0, p.rib_depth}, spacing, rng, &points);
  }
  for (int k = 0; k < p.stiffener_count; ++k) {
    const double x =
        p.seam_start_x + (p.seam_end_x - p.seam_start_x) * (k + 1.0) /
                             (p.stiffener_count + 1.0);
    std::vector<Vec3> plate;
    sample_rect({x, -hw, 0.0}, {0.0, p.stiffener_width, 0.0},
                {0.0, 0.0, p.stiffener_height}, spacing, rng, &plate);
    for (const Vec3& q : plate) {
      if (q.y() < -hw + p.scallop && q.z() < p.scallop) continue;
      points.push_back(q);
    }
  }

  GeneratedScene out;
  out.scene.cloud = std::make_shared<PointCloud>(std::move(points), cell_size);
  out.scene.tunnel = OrientedBox::from_bounds({p.start_x, -hw, 0.0},
                                              {p.start_x + p.length, hw,
                                               p.height});
  const double y = -hw + p.seam_inset;
  const double z = p.seam_inset;
  for (int i = 0; i < p.waypoints; ++i) {
    const double s = p.waypoints == 1 ? 0.0 : i / (p.waypoints - 1.0);
    out.path.targets.emplace_back(
        p.seam_start_x + s * (p.seam_end_x - p.seam_start_x), y, z);
  }
  return out;
}

GeneratedScene generate_tunnel_scene(const TunnelParams& params) {
  return generate_tunnel_scene(params, 0.0);
}

std::vector<Vec3> read_xyz(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw SpecError(file.string(), "cannot open point file");
  std::vector<Vec3> points;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream s(line);
    Vec3 p;
    std::string extra;
    if (!(s >> p.x() >> p.y() >> p.z()) || (s >> extra) || !p.allFinite()) {
      throw SpecError(file.string() + ":" + std::to_string(line_no),
                      "expected \"x y z\"");
    }
    points.push_back(p);
  }
  return points;
}

void write_xyz(const std::filesystem::path& file,
               const std::vector<Vec3>& points) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  out.precision(17);
  for (const Vec3& p : points) {
    out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  }
  if (!out) throw Error("write failed: " + file.string());
}

RobotModel reference_arm() {
  auto joint = [](const Vec3& axis, const Vec3& offset) {
    RevoluteJoint j;
    j.axis = axis;
    j.origin = Eigen::Isometry3d::Identity();
    j.origin.translation() = offset;
    return j;
  };
  std::vector<RevoluteJoint> joints = {
      joint(Vec3::UnitZ(), {0.0, 0.0, 0.0}),
      joint(Vec3::UnitY(), {0.0, 0.0, 0.12}),
      joint(Vec3::UnitY(), {0.0, 0.0, 0.3}),
      joint(Vec3::UnitX(), {0.05, 0.0, 0.0}),
      joint(Vec3::UnitY(), {0.2, 0.0, 0.0}),
      joint(Vec3::UnitX(), {0.05, 0.0, 0.0}),
  };
  const double pi = std::numbers::pi;
  std::vector<JointLimits> limits = {{-pi, pi},           {-0.5 * pi, 0.5 * pi},
                                     {-0.8 * pi, 0.8 * pi}, {-pi, pi},
                                     {-0.75 * pi, 0.75 * pi}, {-pi, pi}};
  std::vector<LinkCapsule> capsules = {
      {0, {0.0, 0.0, 0.08}, {0.0, 0.0, 0.12}, 0.06},
      {1, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.3}, 0.04},
      {2, {0.0, 0.0, 0.0}, {0.05, 0.0, 0.0}, 0.035},
      {3, {0.0, 0.0, 0.0}, {0.2, 0.0, 0.0}, 0.035},
      {4, {0.0, 0.0, 0.0}, {0.05, 0.0, 0.0}, 0.03},
      {5, {0.0, 0.0, 0.0}, {0.1, 0.0, 0.0}, 0.015},
  };
  BodyPoint tool;
  tool.link = 5;
  tool.offset = {0.12, 0.0, 0.0};
  return RobotModel(std::move(joints), std::move(limits), std::move(capsules),
                    tool);
}

// Tool on the start of the reference seam, elbow up, clear of the walls.
JointVector reference_arm_home() {
  JointVector q(6);
  q << -0.631278, 0.684924, 0.252572, -0.896551, 0.949734, 0.080521;
  return q;
}

TunnelParams reference_tunnel() { return TunnelParams{}; }

RobotModel robot_from_json(const json& doc, const std::string& field) {
  check_keys(doc, field, {"base", "joints", "capsules", "tool"});
  Eigen::Isometry3d base = Eigen::Isometry3d::Identity();
  if (doc.contains("base")) base = pose_from_json(doc["base"], field + "/base");
  if (!doc.contains("joints") || !doc["joints"].is_array() ||
      doc["joints"].empty()) {
    throw SpecError(field + "/joints", "expected a nonempty array");
  }
  std::vector<RevoluteJoint> joints;
  std::vector<JointLimits> limits;
  for (std::size_t i = 0; i < doc["joints"].size(); ++i) {
    const std::string f = field + "/joints/" + std::to_string(i);
    const json& j = doc["joints"][i];
    check_keys(j, f, {"axis", "origin", "limits"});
    RevoluteJoint joint;
    if (!j.contains("axis")) throw SpecError(f + "/axis", "missing");
    joint.axis = get_vec3(j["axis"], f + "/axis");
    if (std::abs(joint.axis.norm() - 1.0) > 1e-12) {
      throw SpecError(f + "/axis", "must have unit norm");
    }
    if (j.contains("origin")) joint.origin = pose_from_json(j["origin"], f + "/origin");
    if (!j.contains("limits")) throw SpecError(f + "/limits", "missing");
    const std::vector<double> lim = get_numbers(j["limits"], f + "/limits");
    if (lim.size() != 2 || !(lim[0] < lim[1])) {
      throw SpecError(f + "/limits", "expected [min, max] with min < max");
    }
    joints.push_back(joint);
    limits.push_back({lim[0], lim[1]});
  }
  const int dof = static_cast<int>(joints.size());
  auto link_index = [&](const json& j, const std::string& f) {
    const long long link = get_integer(j, f);
    if (link < 0 || link >= dof) {
      throw SpecError(f, "link index outside [0, " + std::to_string(dof) + ")");
    }
    return static_cast<int>(link);
  };
  std::vector<LinkCapsule> capsules;
  if (doc.contains("capsules")) {
    if (!doc["capsules"].is_array()) {
      throw SpecError(field + "/capsules", "expected an array");
    }
    for (std::size_t i = 0; i < doc["capsules"].size(); ++i) {
      const std::string f = field + "/capsules/" + std::to_string(i);
      const json& c = doc["capsules"][i];
      check_keys(c, f, {"link", "p0", "p1", "radius"});
      for (const char* key : {"link", "p0", "p1", "radius"}) {
        if (!c.contains(key)) throw SpecError(f + "/" + key, "missing");
      }
      LinkCapsule cap;
      cap.link = link_index(c["link"], f + "/link");
      cap.p0 = get_vec3(c["p0"], f + "/p0");
      cap.p1 = get_vec3(c["p1"], f + "/p1");
      cap.radius = get_number(c["radius"], f + "/radius");
      if (!(cap.radius > 0.0)) throw SpecError(f + "/radius", "must be > 0");
      capsules.push_back(cap);
    }
  }
  if (!doc.contains("tool")) throw SpecError(field + "/tool", "missing");
  const json& t = doc["tool"];
  check_keys(t, field + "/tool", {"link", "offset"});
  if (!t.contains("link")) throw SpecError(field + "/tool/link", "missing");
  BodyPoint tool;
  tool.link = link_index(t["link"], field + "/tool/link");
  if (t.contains("offset")) tool.offset = get_vec3(t["offset"], field + "/tool/offset");
  return RobotModel(std::move(joints), std::move(limits), std::move(capsules),
                    tool, base);
}

json robot_to_json(const RobotModel& model) {
  json joints = json::array();
  for (int i = 0; i < model.dof(); ++i) {
    joints.push_back({{"axis", vec3_json(model.joints()[i].axis)},
                      {"origin", pose_json(model.joints()[i].origin)},
                      {"limits", {model.limits()[i].min, model.limits()[i].max}}});
  }
  json capsules = json::array();
  for (const LinkCapsule& c : model.capsules()) {
    capsules.push_back({{"link", c.link},
                        {"p0", vec3_json(c.p0)},
                        {"p1", vec3_json(c.p1)},
                        {"radius", c.radius}});
  }
  return {{"base", pose_json(model.base())},
          {"joints", joints},
          {"capsules", capsules},
          {"tool",
           {{"link", model.tool().link}, {"offset", vec3_json(model.tool().offset)}}}};
}

ExperimentSpec parse_spec(const json& doc, const std::filesystem::path& base_dir) {
  check_keys(doc, "",
             {"schema_version", "robot", "scene", "path", "x_init", "cspace",
              "nullspace", "perturbations", "seed"});
  if (!doc.contains("schema_version") ||
      get_integer(doc["schema_version"], "/schema_version") != kSchemaVersion) {
    throw SpecError("/schema_version",
                    "expected " + std::to_string(kSchemaVersion));
  }
  ExperimentSpec spec;
  if (!doc.contains("robot")) throw SpecError("/robot", "missing");
  try {
    spec.robot = robot_from_json(doc["robot"]);
  } catch (const SpecError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw SpecError("/robot", e.what());
  }
  const RobotModel& robot = *spec.robot;

  // Scene.
  if (!doc.contains("scene")) throw SpecError("/scene", "missing");
  const json& s = doc["scene"];
  check_keys(s, "/scene",
             {"points", "xyz_file", "generator", "tunnel", "excluded_links",
              "safety_margin", "cell_size"});
  const int sources = static_cast<int>(s.contains("points")) +
                      static_cast<int>(s.contains("xyz_file")) +
                      static_cast<int>(s.contains("generator"));
  if (sources != 1) {
    throw SpecError("/scene",
                    "exactly one of points, xyz_file, generator is required");
  }
  spec.scene.safety_margin = number_or(s, "safety_margin", 0.0, "/scene");
  if (spec.scene.safety_margin < 0.0) {
    throw SpecError("/scene/safety_margin", "must be >= 0");
  }
  spec.cell_size = number_or(s, "cell_size", 0.0, "/scene");
  if (spec.cell_size < 0.0) throw SpecError("/scene/cell_size", "must be >= 0");
  const double cell = spec.cell_size > 0.0
                          ? spec.cell_size
                          : default_cell_size(robot, spec.scene.safety_margin);
  if (s.contains("tunnel")) {
    spec.tunnel_override = box_from_json(s["tunnel"], "/scene/tunnel");
  }

  std::optional<TaskPath> generated_path;
  if (s.contains("generator")) {
    spec.source.kind = SceneSource::Kind::kGenerator;
    spec.source.generator = tunnel_params_from_json(s["generator"], "/scene/generator");
    GeneratedScene g = generate_tunnel_scene(spec.source.generator, cell);
    spec.scene.cloud = g.scene.cloud;
    spec.scene.tunnel = g.scene.tunnel;
    generated_path = std::move(g.path);
  } else {
    if (!spec.tunnel_override) {
      throw SpecError("/scene/tunnel", "required unless a generator is used");
    }
    std::vector<Vec3> points;
    if (s.contains("points")) {
      spec.source.kind = SceneSource::Kind::kInline;
      const json& pts = s["points"];
      if (!pts.is_array()) throw SpecError("/scene/points", "expected an array");
      for (std::size_t i = 0; i < pts.size(); ++i) {
        points.push_back(get_vec3(pts[i], "/scene/points/" + std::to_string(i)));
      }
    } else {
      spec.source.kind = SceneSource::Kind::kXyzFile;
      if (!s["xyz_file"].is_string()) {
        throw SpecError("/scene/xyz_file", "expected a path string");
      }
      spec.source.xyz_file = s["xyz_file"].get<std::string>();
      std::filesystem::path file(spec.source.xyz_file);
      if (file.is_relative()) file = base_dir / file;
      points = read_xyz(file);
    }
    if (points.empty()) throw SpecError("/scene", "point cloud is empty");
    spec.scene.cloud = std::make_shared<PointCloud>(std::move(points), cell);
  }
  if (spec.tunnel_override) spec.scene.tunnel = *spec.tunnel_override;

  if (s.contains("excluded_links")) {
    const json& ex = s["excluded_links"];
    if (!ex.is_array()) throw SpecError("/scene/excluded_links", "expected an array");
    for (std::size_t i = 0; i < ex.size(); ++i) {
      const std::string f = "/scene/excluded_links/" + std::to_string(i);
      const long long link = get_integer(ex[i], f);
      if (link < 0 || link >= robot.dof()) throw SpecError(f, "not a link of the robot");
      spec.scene.excluded_links.push_back(static_cast<int>(link));
    }
  } else {
    spec.scene.excluded_links = {robot.tool().link};
  }

  // Path.
  if (doc.contains("path")) {
    const json& p = doc["path"];
    check_keys(p, "/path", {"targets", "max_step"});
    if (!p.contains("targets") || !p["targets"].is_array()) {
      throw SpecError("/path/targets", "expected an array");
    }
    for (std::size_t i = 0; i < p["targets"].size(); ++i) {
      spec.path.targets.push_back(
          get_vec3(p["targets"][i], "/path/targets/" + std::to_string(i)));
    }
    spec.path.max_step = number_or(p, "max_step", spec.path.max_step, "/path");
  } else if (generated_path) {
    spec.path = std::move(*generated_path);
    spec.path_from_generator = true;
  } else {
    throw SpecError("/path", "missing (only optional with a generator)");
  }
  try {
    spec.path.validate();
  } catch (const InvalidArgument& e) {
    throw SpecError("/path", e.what());
  }

  if (!doc.contains("x_init")) throw SpecError("/x_init", "missing");
  const std::vector<double> x = get_numbers(doc["x_init"], "/x_init");
  if (static_cast<int>(x.size()) != robot.dof()) {
    throw SpecError("/x_init", "expected " + std::to_string(robot.dof()) + " entries");
  }
  spec.x_init = Eigen::Map<const Eigen::VectorXd>(x.data(), robot.dof());

  if (doc.contains("cspace")) apply_cspace(doc["cspace"], "/cspace", &spec.cspace);
  spec.nullspace.reanchor_threshold = spec.cspace.eq_threshold;
  if (doc.contains("nullspace")) {
    apply_nullspace(doc["nullspace"], "/nullspace", &spec.nullspace);
  }

  if (doc.contains("perturbations")) {
    const json& p = doc["perturbations"];
    check_keys(p, "/perturbations", {"robot", "workpiece"});
    if (p.contains("robot")) {
      const json& r = p["robot"];
      check_keys(r, "/perturbations/robot", {"joints", "offsets", "range", "steps"});
      RobotPerturbation rp;
      rp.joints = {2, 3, 4};
      if (r.contains("joints")) {
        rp.joints.clear();
        for (double v : get_numbers(r["joints"], "/perturbations/robot/joints")) {
          if (v != std::floor(v) || v < 0 || v >= robot.dof()) {
            throw SpecError("/perturbations/robot/joints", "not a joint index");
          }
          rp.joints.push_back(static_cast<int>(v));
        }
        if (rp.joints.empty()) {
          throw SpecError("/perturbations/robot/joints", "must be nonempty");
        }
      }
      if (r.contains("offsets")) {
        if (r.contains("range") || r.contains("steps")) {
          throw SpecError("/perturbations/robot", "give offsets or range/steps, not both");
        }
        rp.offsets = grid_axis(r["offsets"], "/perturbations/robot/offsets", 1.0);
      } else {
        json axis = {{"range", number_or(r, "range", 0.2, "/perturbations/robot")},
                     {"steps", int_or(r, "steps", 5, "/perturbations/robot")}};
        rp.offsets = grid_axis(axis, "/perturbations/robot", 1.0);
      }
      spec.robot_perturbation = rp;
    }
    if (p.contains("workpiece")) {
      const json& w = p["workpiece"];
      check_keys(w, "/perturbations/workpiece", {"yaw_deg", "pitch_deg", "pivot"});
      WorkpiecePerturbation wp;
      constexpr double kDeg = std::numbers::pi / 180.0;
      const json default_axis = {{"range", 15.0}, {"steps", 7}};
      wp.yaw = grid_axis(w.value("yaw_deg", default_axis),
                         "/perturbations/workpiece/yaw_deg", kDeg);
      wp.pitch = grid_axis(w.value("pitch_deg", default_axis),
                           "/perturbations/workpiece/pitch_deg", kDeg);
      if (w.contains("pivot")) {
        wp.pivot = get_vec3(w["pivot"], "/perturbations/workpiece/pivot");
      }
      spec.workpiece_perturbation = wp;
    }
  }
  if (doc.contains("seed")) spec.seed = get_seed(doc["seed"], "/seed");

  try {
    spec.scene.validate(robot);
  } catch (const InvalidArgument& e) {
    throw SpecError("/scene", e.what());
  }
  return spec;
}

ExperimentSpec load_spec(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw SpecError(file.string(), "cannot open spec file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SpecError(file.string(), std::string("JSON parse error: ") + e.what());
  }
  return parse_spec(doc, file.parent_path());
}

json spec_to_json(const ExperimentSpec& spec) {
  if (!spec.robot) throw InvalidArgument("spec has no robot");
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["robot"] = robot_to_json(*spec.robot);

  json scene;
  switch (spec.source.kind) {
    case SceneSource::Kind::kInline: {
      json pts = json::array();
      for (const Vec3& p : spec.scene.cloud->points()) pts.push_back(vec3_json(p));
      scene["points"] = std::move(pts);
      break;
    }
    case SceneSource::Kind::kXyzFile:
      scene["xyz_file"] = spec.source.xyz_file;
      break;
    case SceneSource::Kind::kGenerator:
      scene["generator"] = tunnel_params_to_json(spec.source.generator);
      break;
  }
  if (spec.tunnel_override) scene["tunnel"] = box_json(*spec.tunnel_override);
  scene["excluded_links"] = spec.scene.excluded_links;
  scene["safety_margin"] = spec.scene.safety_margin;
  if (spec.cell_size > 0.0) scene["cell_size"] = spec.cell_size;
  doc["scene"] = std::move(scene);

  if (!spec.path_from_generator) {
    json targets = json::array();
    for (const Vec3& t : spec.path.targets) targets.push_back(vec3_json(t));
    doc["path"] = {{"targets", targets}, {"max_step", spec.path.max_step}};
  }
  doc["x_init"] = std::vector<double>(spec.x_init.data(),
                                      spec.x_init.data() + spec.x_init.size());
  doc["cspace"] = {{"eq_threshold", spec.cspace.eq_threshold},
                   {"safety_eps", spec.cspace.safety_eps},
                   {"max_outer_iter", spec.cspace.max_outer_iter},
                   {"step_converge_tol", spec.cspace.step_converge_tol},
                   {"trust_region", spec.cspace.trust_region}};
  doc["nullspace"] = {{"alpha", spec.nullspace.alpha},
                      {"reanchor_threshold", spec.nullspace.reanchor_threshold},
                      {"max_steps", spec.nullspace.max_steps},
                      {"ik_tol", spec.nullspace.ik_tol},
                      {"clearance_weight", spec.nullspace.clearance_weight},
                      {"strategy", strategy_json(spec.nullspace.strategy)}};
  json perturbations = json::object();
  if (spec.robot_perturbation) {
    perturbations["robot"] = {{"joints", spec.robot_perturbation->joints},
                              {"offsets", spec.robot_perturbation->offsets}};
  }
  if (spec.workpiece_perturbation) {
    constexpr double kToDeg = 180.0 / std::numbers::pi;
    std::vector<double> yaw = spec.workpiece_perturbation->yaw;
    std::vector<double> pitch = spec.workpiece_perturbation->pitch;
    for (double& v : yaw) v *= kToDeg;
    for (double& v : pitch) v *= kToDeg;
    perturbations["workpiece"] = {{"yaw_deg", yaw},
                                  {"pitch_deg", pitch},
                                  {"pivot", vec3_json(spec.workpiece_perturbation->pivot)}};
  }
  if (!perturbations.empty()) doc["perturbations"] = std::move(perturbations);
  doc["seed"] = spec.seed;
  return doc;
}

void save_spec(const ExperimentSpec& spec, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  out << spec_to_json(spec).dump(2) << '\n';
  if (!out) throw Error("write failed: " + file.string());
}

GeneratedScene transform_scene(const Scene& scene, const TaskPath& path,
                               const Eigen::Isometry3d& motion,
                               double cell_size) {
  std::vector<Vec3> points;
  points.reserve(scene.cloud->size());
  for (const Vec3& p : scene.cloud->points()) points.push_back(motion * p);
  GeneratedScene out;
  out.scene = scene;
  out.scene.cloud = std::make_shared<PointCloud>(
      std::move(points), cell_size > 0.0 ? cell_size : scene.cloud->cell_size());
  out.scene.tunnel.pose = motion * scene.tunnel.pose;
  out.path = path;
  for (Vec3& t : out.path.targets) t = motion * t;
  return out;
}

std::vector<Trial> perturb(const ExperimentSpec& spec) {
  if (!spec.robot) throw InvalidArgument("spec has no robot");
  const RobotModel& robot = *spec.robot;

  // Each axis is a list of values; the product is enumerated with the last
  // axis varying fastest.
  struct Axis {
    std::string name;
    std::vector<double> values;
  };
  std::vector<Axis> axes;
  if (spec.robot_perturbation) {
    for (int j : spec.robot_perturbation->joints) {
      axes.push_back({"q" + std::to_string(j), spec.robot_perturbation->offsets});
    }
  }
  const int first_workpiece_axis = static_cast<int>(axes.size());
  if (spec.workpiece_perturbation) {
    axes.push_back({"yaw", spec.workpiece_perturbation->yaw});
    axes.push_back({"pitch", spec.workpiece_perturbation->pitch});
  }

  std::size_t total = 1;
  for (const Axis& a : axes) total *= a.values.size();

  std::map<std::pair<std::size_t, std::size_t>, GeneratedScene> scene_cache;
  std::vector<Trial> trials;
  trials.reserve(total);
  std::vector<std::size_t> index(axes.size(), 0);
  for (std::size_t n = 0; n < total; ++n) {
    std::size_t rem = n;
    for (int a = static_cast<int>(axes.size()) - 1; a >= 0; --a) {
      index[a] = rem % axes[a].values.size();
      rem /= axes[a].values.size();
    }
    Trial trial;
    trial.id = static_cast<int>(n);
    trial.spec = spec;
    trial.spec.robot_perturbation.reset();
    trial.spec.workpiece_perturbation.reset();
    std::string label;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      if (!label.empty()) label += ",";
      label += axes[a].name + "=" + format_offset(axes[a].values[index[a]]);
    }
    trial.label = label.empty() ? "base" : label;

    if (spec.robot_perturbation) {
      for (std::size_t k = 0; k < spec.robot_perturbation->joints.size(); ++k) {
        trial.spec.x_init[spec.robot_perturbation->joints[k]] +=
            axes[k].values[index[k]];
      }
    }
    if (spec.workpiece_perturbation) {
      const std::size_t yi = index[first_workpiece_axis];
      const std::size_t pi = index[first_workpiece_axis + 1];
      auto it = scene_cache.find({yi, pi});
      if (it == scene_cache.end()) {
        const WorkpiecePerturbation& wp = *spec.workpiece_perturbation;
        Eigen::Isometry3d motion = Eigen::Isometry3d::Identity();
        motion.translate(wp.pivot);
        motion.rotate(Eigen::AngleAxisd(wp.pitch[pi], Vec3::UnitZ()));
        motion.rotate(Eigen::AngleAxisd(wp.yaw[yi], Vec3::UnitY()));
        motion.translate(-wp.pivot);
        it = scene_cache
                 .emplace(std::make_pair(yi, pi),
                          transform_scene(spec.scene, spec.path, motion,
                                          spec.scene.cloud->cell_size()))
                 .first;
      }
      trial.spec.scene = it->second.scene;
      trial.spec.path = it->second.path;
      trial.spec.tunnel_override.reset();
      trial.spec.source.kind = SceneSource::Kind::kInline;
      trial.spec.path_from_generator = false;
      // The path moved with the workpiece: seat the tool on its new start when
      // that posture is collision free, else keep the nominal posture.
      const std::vector<Vec3>& targets = trial.spec.path.targets;
      if (!targets.empty() &&
          (forward_kinematics(robot, trial.spec.x_init, robot.tool()) -
           targets.front())
                  .norm() > spec.cspace.eq_threshold) {
        try {
          const JointVector seated =
              solve_ik(robot, trial.spec.x_init, targets.front());
          if (signed_distance(robot, seated, trial.spec.scene).value > 0.0) {
            trial.spec.x_init = seated;
          }
        } catch (const IkError&) {
        }
      }
    }

    if (!robot.within_limits(trial.spec.x_init)) {
      trial.valid = false;
      trial.invalid_reason = "initial state violates joint limits";
    } else if (!(signed_distance(robot, trial.spec.x_init, trial.spec.scene).value >
                 0.0)) {
      trial.valid = false;
      trial.invalid_reason = "initial state is in collision";
    }
    trials.push_back(std::move(trial));
  }
  return trials;
}

}  // namespace htcp
