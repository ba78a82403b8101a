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

#include "htcp/bench.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

namespace htcp {
namespace {

using nlohmann::json;

constexpr char kCsvHeader[] =
    "variant,trial_id,step,success,planner_used,wall_time_s,tcp_distance_mm,"
    "safe_distance_mm";
constexpr char kAggregateHeader[] =
    "variant,success_rate_pct,mean_time_per_step_s,mean_tcp_distance_mm,"
    "mean_safe_distance_mm,trials,steps,successes";

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string fixed(double v, int digits) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

double parse_double(const std::string& s, int line) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size()) {
    throw Error("CSV line " + std::to_string(line) + ": bad number \"" + s + "\"");
  }
  return v;
}

json nullable(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

// Rows for one planned trial, padded with skipped waypoints.
std::vector<ReportRow> trial_rows(const std::string& variant, int trial_id,
                                  int horizon, const Trajectory& traj) {
  std::vector<ReportRow> rows;
  rows.reserve(horizon);
  for (int t = 0; t < horizon; ++t) {
    ReportRow r;
    r.variant = variant;
    r.trial_id = trial_id;
    r.step = t;
    if (t < static_cast<int>(traj.per_step.size())) {
      const StepMetrics& m = traj.per_step[t];
      r.success = m.success;
      r.planner_used = std::string(to_string(m.planner_used));
      r.wall_time_s = m.wall_time;
      r.tcp_distance_mm = 1000.0 * m.tcp_distance;
      r.safe_distance_mm = 1000.0 * m.safe_distance;
    } else {
      r.planner_used = "skipped";
      r.tcp_distance_mm = std::numeric_limits<double>::quiet_NaN();
      r.safe_distance_mm = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace

std::string PlannerVariant::name() const {
  switch (kind) {
    case Kind::kBaseline:
      return "baseline";
    case Kind::kCSpaceSample:
      return "csample";
    case Kind::kNSpaceSample:
      return "nsample";
    case Kind::kNSpaceLocalOpt:
      return "nlocal";
  }
  return "unknown";
}

Fallback PlannerVariant::fallback(const ExperimentSpec& spec) const {
  if (samples < 1 || steps < 1) {
    throw InvalidArgument("variant sample and step counts must be >= 1");
  }
  switch (kind) {
    case Kind::kBaseline:
      return NoFallback{};
    case Kind::kCSpaceSample: {
      CSpaceSampleFallback f;
      f.restarts = samples;
      return f;
    }
    case Kind::kNSpaceSample: {
      NSpaceSampleFallback f;
      f.directions = samples;
      f.steps = steps;
      f.step_size = spec.nullspace.alpha;
      return f;
    }
    case Kind::kNSpaceLocalOpt:
      return NullSpaceFallback{};
  }
  return NoFallback{};
}

PlannerVariant PlannerVariant::parse(std::string_view name) {
  PlannerVariant v;
  if (name == "baseline") {
    v.kind = Kind::kBaseline;
  } else if (name == "csample") {
    v.kind = Kind::kCSpaceSample;
  } else if (name == "nsample") {
    v.kind = Kind::kNSpaceSample;
  } else if (name == "nlocal") {
    v.kind = Kind::kNSpaceLocalOpt;
  } else {
    throw InvalidArgument("unknown planner variant \"" + std::string(name) +
                          "\" (expected baseline, csample, nsample, nlocal)");
  }
  return v;
}

std::vector<PlannerVariant> parse_variants(std::string_view comma_list) {
  std::vector<PlannerVariant> out;
  std::size_t pos = 0;
  while (pos <= comma_list.size()) {
    const std::size_t end = std::min(comma_list.find(',', pos), comma_list.size());
    const std::string_view item = comma_list.substr(pos, end - pos);
    if (!item.empty()) out.push_back(PlannerVariant::parse(item));
    pos = end + 1;
  }
  return out;
}

int BenchReport::invalid_trials() const {
  return static_cast<int>(std::count_if(
      trials.begin(), trials.end(),
      [](const TrialManifestEntry& t) { return !t.valid; }));
}

std::vector<VariantAggregate> aggregate(const std::vector<ReportRow>& rows) {
  struct Acc {
    VariantAggregate agg;
    int attempted = 0;
    double time = 0.0;
    double tcp = 0.0;
    double safe = 0.0;
    int last_trial = -1;
  };
  std::vector<Acc> accs;
  std::map<std::string, std::size_t> slot;
  for (const ReportRow& r : rows) {
    auto [it, inserted] = slot.try_emplace(r.variant, accs.size());
    if (inserted) {
      accs.emplace_back();
      accs.back().agg.variant = r.variant;
    }
    Acc& a = accs[it->second];
    if (r.trial_id != a.last_trial) {
      ++a.agg.trials;
      a.last_trial = r.trial_id;
    }
    ++a.agg.steps;
    if (r.planner_used != "skipped") {
      ++a.attempted;
      a.time += r.wall_time_s;
    }
    if (r.success) {
      ++a.agg.successes;
      a.tcp += r.tcp_distance_mm;
      a.safe += r.safe_distance_mm;
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<VariantAggregate> out;
  for (Acc& a : accs) {
    VariantAggregate& g = a.agg;
    g.success_rate = 100.0 * g.successes / g.steps;
    g.mean_time_s = a.attempted > 0 ? a.time / a.attempted : nan;
    g.mean_tcp_distance_mm = g.successes > 0 ? a.tcp / g.successes : nan;
    g.mean_safe_distance_mm = g.successes > 0 ? a.safe / g.successes : nan;
    out.push_back(g);
  }
  return out;
}

std::uint64_t trial_seed(std::uint64_t base, int trial_id,
                         PlannerVariant::Kind kind) {
  return splitmix64(splitmix64(splitmix64(base) ^ static_cast<std::uint64_t>(trial_id)) ^
                    static_cast<std::uint64_t>(kind));
}

BenchReport run_sweep(const ExperimentSpec& spec,
                      const std::vector<PlannerVariant>& variants,
                      const SweepOptions& options) {
  if (!spec.robot) throw InvalidArgument("spec has no robot");
  if (options.parallelism < 1) throw InvalidArgument("parallelism must be >= 1");
  std::vector<Trial> trials = perturb(spec);

  BenchReport report;
  std::vector<const Trial*> valid;
  for (const Trial& t : trials) {
    report.trials.push_back({t.id, t.label, t.valid, t.invalid_reason});
    if (t.valid) valid.push_back(&t);
  }

  // Jobs are ordered variant-major so rows come out grouped by variant.
  const std::size_t jobs = valid.size() * variants.size();
  std::vector<Trajectory> results(jobs);
  std::vector<std::string> errors(jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs; j = next++) {
      const PlannerVariant& variant = variants[j / valid.size()];
      const Trial& trial = *valid[j % valid.size()];
      PlanOptions po;
      po.cspace = trial.spec.cspace;
      po.nullspace = trial.spec.nullspace;
      po.fallback = variant.fallback(trial.spec);
      po.seed = trial_seed(spec.seed, trial.id, variant.kind);
      po.record_timing = options.record_timing;
      try {
        results[j] = plan(*trial.spec.robot, trial.spec.scene, trial.spec.path,
                          trial.spec.x_init, po);
      } catch (const std::exception& e) {
        errors[j] = e.what();
      }
    }
  };
  const int threads =
      static_cast<int>(std::min<std::size_t>(options.parallelism, std::max<std::size_t>(jobs, 1)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
  }

  for (std::size_t j = 0; j < jobs; ++j) {
    if (!errors[j].empty()) {
      throw Error("trial " + std::to_string(valid[j % valid.size()]->id) + " (" +
                  variants[j / valid.size()].name() + "): " + errors[j]);
    }
    const std::string name = variants[j / valid.size()].name();
    const Trial& trial = *valid[j % valid.size()];
    std::vector<ReportRow> rows =
        trial_rows(name, trial.id, trial.spec.path.horizon(), results[j]);
    report.rows.insert(report.rows.end(), rows.begin(), rows.end());
    if (options.keep_states) {
      report.trajectories.push_back({name, trial.id, std::move(results[j])});
    }
  }
  report.aggregates = aggregate(report.rows);
  return report;
}

void write_csv(const BenchReport& report, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (const ReportRow& r : report.rows) {
    out << r.variant << ',' << r.trial_id << ',' << r.step << ','
        << (r.success ? 1 : 0) << ',' << r.planner_used << ','
        << fixed(r.wall_time_s, 6) << ',' << fixed(r.tcp_distance_mm, 6) << ','
        << fixed(r.safe_distance_mm, 6) << '\n';
  }
  if (report.aggregates.empty()) return;
  out << '\n'
      << "# aggregates; tcp and safe distance means over successful steps only\n"
      << kAggregateHeader << '\n';
  for (const VariantAggregate& a : report.aggregates) {
    out << a.variant << ',' << fixed(a.success_rate, 4) << ','
        << fixed(a.mean_time_s, 6) << ',' << fixed(a.mean_tcp_distance_mm, 6)
        << ',' << fixed(a.mean_safe_distance_mm, 6) << ',' << a.trials << ','
        << a.steps << ',' << a.successes << '\n';
  }
}

json report_to_json(const BenchReport& report) {
  json trials = json::array();
  for (const TrialManifestEntry& t : report.trials) {
    json e = {{"id", t.id}, {"label", t.label}, {"valid", t.valid}};
    if (!t.valid) e["invalid_reason"] = t.invalid_reason;
    trials.push_back(std::move(e));
  }
  json aggregates = json::array();
  for (const VariantAggregate& a : report.aggregates) {
    aggregates.push_back({{"variant", a.variant},
                          {"success_rate_pct", a.success_rate},
                          {"mean_time_per_step_s", nullable(a.mean_time_s)},
                          {"mean_tcp_distance_mm", nullable(a.mean_tcp_distance_mm)},
                          {"mean_safe_distance_mm", nullable(a.mean_safe_distance_mm)},
                          {"trials", a.trials},
                          {"steps", a.steps},
                          {"successes", a.successes}});
  }
  json rows = json::array();
  for (const ReportRow& r : report.rows) {
    rows.push_back({{"variant", r.variant},
                    {"trial_id", r.trial_id},
                    {"step", r.step},
                    {"success", r.success},
                    {"planner_used", r.planner_used},
                    {"wall_time_s", r.wall_time_s},
                    {"tcp_distance_mm", nullable(r.tcp_distance_mm)},
                    {"safe_distance_mm", nullable(r.safe_distance_mm)}});
  }
  return {{"schema_version", 1},
          {"note", "tcp and safe distance means over successful steps only"},
          {"trials", trials},
          {"invalid_trials", report.invalid_trials()},
          {"aggregates", aggregates},
          {"rows", rows}};
}

void emit_report(const BenchReport& report, ReportFormat format,
                 const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write report " + file.string());
  if (format == ReportFormat::kCsv) {
    write_csv(report, out);
  } else {
    out << report_to_json(report).dump(2) << '\n';
  }
  out.flush();
  if (!out) throw Error("write failed: " + file.string());
}

std::vector<ReportRow> parse_csv_rows(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw Error("CSV report: unexpected header");
  }
  std::vector<ReportRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) break;
    std::vector<std::string> f;
    std::stringstream s(line);
    std::string cell;
    while (std::getline(s, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 8) {
      throw Error("CSV line " + std::to_string(line_no) + ": expected 8 fields");
    }
    ReportRow r;
    r.variant = f[0];
    r.trial_id = static_cast<int>(parse_double(f[1], line_no));
    r.step = static_cast<int>(parse_double(f[2], line_no));
    r.success = f[3] == "1";
    r.planner_used = f[4];
    r.wall_time_s = parse_double(f[5], line_no);
    r.tcp_distance_mm = parse_double(f[6], line_no);
    r.safe_distance_mm = parse_double(f[7], line_no);
    rows.push_back(std::move(r));
  }
  return rows;
}

json trajectory_to_json(const Trajectory& traj) {
  json states = json::array();
  for (const JointVector& q : traj.states) {
    states.push_back(std::vector<double>(q.data(), q.data() + q.size()));
  }
  json steps = json::array();
  for (const StepMetrics& m : traj.per_step) {
    steps.push_back({{"success", m.success},
                     {"planner_used", std::string(to_string(m.planner_used))},
                     {"wall_time_s", m.wall_time},
                     {"tcp_distance_m", m.tcp_distance},
                     {"safe_distance_m", m.safe_distance}});
  }
  return {{"schema_version", 1}, {"states", states}, {"steps", steps}};
}

Trajectory trajectory_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("states") || !doc["states"].is_array()) {
    throw SpecError("/states", "expected an array of joint vectors");
  }
  Trajectory traj;
  const json& states = doc["states"];
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (!states[i].is_array()) {
      throw SpecError("/states/" + std::to_string(i), "expected an array");
    }
    std::vector<double> v;
    for (const json& x : states[i]) {
      if (!x.is_number()) {
        throw SpecError("/states/" + std::to_string(i), "expected numbers");
      }
      v.push_back(x.get<double>());
    }
    traj.states.push_back(Eigen::Map<Eigen::VectorXd>(v.data(), v.size()));
  }
  if (doc.contains("steps")) {
    const json& steps = doc["steps"];
    if (!steps.is_array() || steps.size() != states.size()) {
      throw SpecError("/steps", "expected one entry per state");
    }
    for (std::size_t i = 0; i < steps.size(); ++i) {
      StepMetrics m;
      m.success = steps[i].value("success", false);
      m.wall_time = steps[i].value("wall_time_s", 0.0);
      m.tcp_distance = steps[i].value("tcp_distance_m", 0.0);
      m.safe_distance = steps[i].value("safe_distance_m", 0.0);
      const std::string used = steps[i].value("planner_used", "none");
      for (PlannerUsed p : {PlannerUsed::kCSpace, PlannerUsed::kNullSpace,
                            PlannerUsed::kCSpaceSample, PlannerUsed::kNSpaceSample,
                            PlannerUsed::kNone}) {
        if (to_string(p) == used) m.planner_used = p;
      }
      traj.per_step.push_back(m);
    }
  }
  return traj;
}

}  // namespace htcp
