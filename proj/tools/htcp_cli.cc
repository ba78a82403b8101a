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

// Command-line front end: plan, sweep, gen-scene, verify.
//
// Exit codes: 0 full success, 2 partial planning failure, 1 error.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <regex>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "htcp/bench.h"
#include "htcp/errors.h"
#include "htcp/planner.h"
#include "htcp/scene_io.h"

namespace {

using htcp::ExperimentSpec;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitPartial = 2;

void print_aggregates(const std::vector<htcp::VariantAggregate>& aggs) {
  std::printf("%-10s %10s %12s %12s %12s\n", "variant", "success%",
              "time/step s", "tcp mm", "safe mm");
  for (const auto& a : aggs) {
    std::printf("%-10s %10.2f %12.4f %12.4f %12.3f\n", a.variant.c_str(),
                a.success_rate, a.mean_time_s, a.mean_tcp_distance_mm,
                a.mean_safe_distance_mm);
  }
}

int run_plan(const std::string& spec_file, const std::string& variant_name,
             const std::string& out_file, bool timing) {
  const ExperimentSpec spec = htcp::load_spec(spec_file);
  const htcp::PlannerVariant variant = htcp::PlannerVariant::parse(variant_name);
  htcp::PlanOptions po;
  po.cspace = spec.cspace;
  po.nullspace = spec.nullspace;
  po.fallback = variant.fallback(spec);
  po.seed = htcp::trial_seed(spec.seed, 0, variant.kind);
  po.record_timing = timing;
  const htcp::Trajectory traj =
      htcp::plan(*spec.robot, spec.scene, spec.path, spec.x_init, po);
  if (!out_file.empty()) {
    std::ofstream out(out_file);
    if (!out) throw htcp::Error("cannot write " + out_file);
    out << htcp::trajectory_to_json(traj).dump(2) << '\n';
    if (!out) throw htcp::Error("write failed: " + out_file);
  }
  const int done = traj.successes();
  std::printf("%s: %d/%d waypoints planned\n", variant.name().c_str(), done,
              spec.path.horizon());
  return done == spec.path.horizon() ? kExitOk : kExitPartial;
}

int run_sweep(const std::string& spec_file, const std::string& variants,
              int parallel, const std::string& out_file,
              const std::string& format, bool timing) {
  const ExperimentSpec spec = htcp::load_spec(spec_file);
  htcp::SweepOptions opts;
  opts.parallelism = parallel;
  opts.record_timing = timing;
  const htcp::BenchReport report =
      htcp::run_sweep(spec, htcp::parse_variants(variants), opts);
  if (!out_file.empty()) {
    htcp::emit_report(report,
                      format == "json" ? htcp::ReportFormat::kJson
                                       : htcp::ReportFormat::kCsv,
                      out_file);
  }
  std::printf("trials: %zu (%d invalid)\n", report.trials.size(),
              report.invalid_trials());
  print_aggregates(report.aggregates);
  for (const auto& row : report.rows) {
    if (!row.success) return kExitPartial;
  }
  return kExitOk;
}

int run_gen_scene(const std::string& tunnel, double density, int waypoints,
                  std::uint64_t seed, const std::string& out_file) {
  static const std::regex kDims(
      R"(^\s*([0-9.eE+-]+)\s*[xX]\s*([0-9.eE+-]+)\s*[xX]\s*([0-9.eE+-]+)\s*$)");
  std::smatch m;
  if (!std::regex_match(tunnel, m, kDims)) {
    throw htcp::InvalidArgument("--tunnel expects LxWxH in meters, got \"" +
                                tunnel + "\"");
  }
  htcp::TunnelParams p = htcp::reference_tunnel();
  p.length = std::stod(m[1]);
  p.width = std::stod(m[2]);
  p.height = std::stod(m[3]);
  p.density = density;
  p.waypoints = waypoints;
  p.seed = seed;
  p.validate();

  nlohmann::json doc = {
      {"schema_version", 1},
      {"robot", htcp::robot_to_json(htcp::reference_arm())},
      {"scene", nlohmann::json::object()},
      {"x_init", nullptr},
      {"seed", seed}};
  const htcp::JointVector home = htcp::reference_arm_home();
  doc["x_init"] = std::vector<double>(home.data(), home.data() + home.size());
  doc["scene"]["generator"] = htcp::tunnel_params_to_json(p);
  // Round trip through the parser so a bad document never reaches disk.
  htcp::parse_spec(doc);
  std::ofstream out(out_file);
  if (!out) throw htcp::Error("cannot write " + out_file);
  out << doc.dump(2) << '\n';
  if (!out) throw htcp::Error("write failed: " + out_file);
  return kExitOk;
}

int run_verify(const std::string& traj_file, const std::string& spec_file) {
  const ExperimentSpec spec = htcp::load_spec(spec_file);
  std::ifstream in(traj_file);
  if (!in) throw htcp::Error("cannot open " + traj_file);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw htcp::Error(traj_file + ": " + e.what());
  }
  const htcp::Trajectory traj = htcp::trajectory_from_json(doc);
  const auto checks = htcp::verify_trajectory(*spec.robot, spec.scene, spec.path,
                                              traj, spec.cspace.eq_threshold);
  int verified = 0;
  int refuted = 0;
  for (std::size_t t = 0; t < checks.size(); ++t) {
    const bool claimed = t < traj.per_step.size() ? traj.per_step[t].success
                                                  : checks[t].success;
    if (checks[t].success) ++verified;
    if (claimed && !checks[t].success) {
      ++refuted;
      std::printf("step %zu: claimed success does not verify (tcp %.6f m, "
                  "clearance %.6f m, within limits %d)\n",
                  t, checks[t].tcp_distance, checks[t].safe_distance,
                  checks[t].within_limits ? 1 : 0);
    }
  }
  std::printf("%d/%d waypoints verified, %d refuted claims\n", verified,
              spec.path.horizon(), refuted);
  if (refuted > 0) return kExitError;
  return verified == spec.path.horizon() ? kExitOk : kExitPartial;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid task-constrained planner"};
  app.require_subcommand(1);

  std::string spec_file;
  std::string out_file;
  bool no_timing = false;

  auto* plan = app.add_subcommand("plan", "Plan the base trial of a spec");
  std::string variant = "nlocal";
  plan->add_option("spec", spec_file, "Experiment spec (JSON)")->required();
  plan->add_option("--variant", variant, "baseline, csample, nsample or nlocal");
  plan->add_option("--out", out_file, "Write the trajectory (JSON)");
  plan->add_flag("--no-timing", no_timing, "Record zero wall times");

  auto* sweep = app.add_subcommand("sweep", "Run a perturbation sweep");
  std::string variants = "baseline,csample,nsample,nlocal";
  int parallel = 1;
  std::string format = "csv";
  sweep->add_option("spec", spec_file, "Experiment spec (JSON)")->required();
  sweep->add_option("--variants", variants, "Comma-separated variant list");
  sweep->add_option("--parallel", parallel, "Worker threads")
      ->check(CLI::PositiveNumber);
  sweep->add_option("--out", out_file, "Report file");
  sweep->add_option("--format", format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  sweep->add_flag("--no-timing", no_timing,
                  "Record zero wall times (byte-reproducible reports)");

  auto* gen = app.add_subcommand("gen-scene", "Write a tunnel scene spec");
  std::string tunnel = "0.9x0.6x0.4";
  double density = 2500.0;
  int waypoints = 100;
  std::uint64_t seed = 0;
  gen->add_option("--tunnel", tunnel, "Tunnel LxWxH in meters");
  gen->add_option("--density", density, "Wall points per square meter");
  gen->add_option("--waypoints", waypoints, "Weld path waypoints");
  gen->add_option("--seed", seed, "Generator seed");
  gen->add_option("--out", out_file, "Output spec (JSON)")->required();

  auto* verify = app.add_subcommand("verify", "Re-check a planned trajectory");
  std::string traj_file;
  verify->add_option("trajectory", traj_file, "Trajectory (JSON)")->required();
  verify->add_option("spec", spec_file, "Experiment spec (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (*plan) return run_plan(spec_file, variant, out_file, !no_timing);
    if (*sweep) {
      return run_sweep(spec_file, variants, parallel, out_file, format,
                       !no_timing);
    }
    if (*gen) return run_gen_scene(tunnel, density, waypoints, seed, out_file);
    if (*verify) return run_verify(traj_file, spec_file);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
  return kExitError;
}
