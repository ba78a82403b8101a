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

// Planner-variant comparisons over perturbation sweeps.

#ifndef HTCP_BENCH_H_
#define HTCP_BENCH_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "htcp/planner.h"
#include "htcp/scene_io.h"

namespace htcp {

struct PlannerVariant {
  enum class Kind { kBaseline, kCSpaceSample, kNSpaceSample, kNSpaceLocalOpt };
  Kind kind = Kind::kBaseline;
  // Restarts (csample) or directions (nsample).
  int samples = 50;
  // Null-space steps per direction (nsample).
  int steps = 100;

  std::string name() const;
  Fallback fallback(const ExperimentSpec& spec) const;

  // "baseline", "csample", "nsample" or "nlocal".
  static PlannerVariant parse(std::string_view name);
};

std::vector<PlannerVariant> parse_variants(std::string_view comma_list);

// One row per (trial, variant, waypoint). Waypoints after the first failed
// step are not attempted; they count as failures with planner "skipped".
struct ReportRow {
  std::string variant;
  int trial_id = 0;
  int step = 0;
  bool success = false;
  std::string planner_used;
  double wall_time_s = 0.0;
  double tcp_distance_mm = 0.0;   // NaN when skipped
  double safe_distance_mm = 0.0;  // NaN when skipped
};

struct VariantAggregate {
  std::string variant;
  double success_rate = 0.0;  // percent of all waypoints
  double mean_time_s = 0.0;   // over attempted steps
  // Over successful steps only; NaN without any.
  double mean_tcp_distance_mm = 0.0;
  double mean_safe_distance_mm = 0.0;
  int trials = 0;
  int steps = 0;
  int successes = 0;
};

struct TrialManifestEntry {
  int id = 0;
  std::string label;
  bool valid = true;
  std::string invalid_reason;
};

// States of one planned trial, kept for re-verification.
struct TrialTrajectory {
  std::string variant;
  int trial_id = 0;
  Trajectory trajectory;
};

struct BenchReport {
  std::vector<TrialManifestEntry> trials;
  std::vector<ReportRow> rows;
  std::vector<VariantAggregate> aggregates;
  std::vector<TrialTrajectory> trajectories;  // only with keep_states

  int invalid_trials() const;
};

struct SweepOptions {
  int parallelism = 1;
  bool record_timing = true;
  bool keep_states = false;
};

// Aggregates in order of first appearance of each variant in `rows`.
std::vector<VariantAggregate> aggregate(const std::vector<ReportRow>& rows);

// Every valid trial is planned once per variant with a seed derived from the
// spec seed, the trial id and the variant, so results do not depend on
// `parallelism`.
BenchReport run_sweep(const ExperimentSpec& spec,
                      const std::vector<PlannerVariant>& variants,
                      const SweepOptions& options = {});

std::uint64_t trial_seed(std::uint64_t base, int trial_id,
                         PlannerVariant::Kind kind);

enum class ReportFormat { kCsv, kJson };

void write_csv(const BenchReport& report, std::ostream& out);
nlohmann::json report_to_json(const BenchReport& report);
void emit_report(const BenchReport& report, ReportFormat format,
                 const std::filesystem::path& file);

// Reads the per-step rows back from a CSV report.
std::vector<ReportRow> parse_csv_rows(std::istream& in);

nlohmann::json trajectory_to_json(const Trajectory& traj);
Trajectory trajectory_from_json(const nlohmann::json& doc);

}  // namespace htcp

#endif  // HTCP_BENCH_H_
