// colopack: gen -> percentile -> cluster -> sens-table -> solve -> report,
// one subcommand per stage plus `pipeline` chaining all of them.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "colopack/clustering.hpp"
#include "colopack/error.hpp"
#include "colopack/fleet.hpp"
#include "colopack/metrics.hpp"
#include "colopack/pipeline.hpp"
#include "colopack/sensitivity.hpp"
#include "colopack/solver.hpp"
#include "colopack/synth.hpp"
#include "colopack/telemetry.hpp"

namespace fs = std::filesystem;
using namespace colopack;

namespace {

// Output file names, shared by the stage commands and `pipeline`.
constexpr const char* kSpecFile = "spec.json";
constexpr const char* kLimitsFile = "limits.json";
constexpr const char* kClustersFile = "clusters.json";
constexpr const char* kElbowFile = "elbow.csv";
constexpr const char* kPreparedFile = "fleet_prepared.json";
constexpr const char* kTableFile = "table.json";
constexpr const char* kConfigFile = "config.json";
constexpr const char* kResultFile = "result.json";
constexpr const char* kMovesFile = "moves.csv";
constexpr const char* kReportFile = "report.json";
constexpr const char* kReportCsvFile = "report.csv";

struct Options {
  std::string preset = "default";
  std::string fleet;
  std::string trace;
  std::string limits;
  std::string clusters;
  std::string profiles;
  std::string table;
  std::string result;
  std::string mode = "p99";
  std::string weights;
  int max_moves = solver::kDefaultMaxMoves;
  int p = 99;
  int window_days = 7;
  int k = clustering::kDefaultK;
  std::uint64_t seed = 1;
  std::string out = ".";
  bool joint = false;
  int repeat = 1;
  std::int64_t interval = 3600;
};

std::string in_dir(const std::string& dir, const char* name) { return (fs::path(dir) / name).string(); }

void make_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create '" + dir + "': " + ec.message());
}

solver::SolverConfig config_from(const Options& o) {
  solver::SolverConfig cfg = solver::preset(solver::parse_mode(o.mode));
  if (!o.weights.empty()) {
    std::vector<double> w;
    std::stringstream ss(o.weights);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        std::size_t used = 0;
        w.push_back(std::stod(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw Error(ErrorCode::kUsage, "--weights: '" + item + "' is not a number");
      }
    }
    if (w.size() != 4) throw Error(ErrorCode::kUsage, "--weights needs w_hosts,w_cost,w_frag,w_sens");
    cfg.weights = {w[0], w[1], w[2], w[3]};
  }
  cfg.max_moves = o.max_moves;
  cfg.seed = o.seed;
  return cfg;
}

std::string profiles_path(const Options& o) {
  return o.profiles.empty() ? sensitivity::default_profiles_path() : o.profiles;
}

std::string elbow_csv(const Fleet& fleet, std::uint64_t seed) {
  const auto rows = clustering::standardize(clustering::feature_rows(fleet.tasks())).rows;
  std::string out = "k,wcss\n";
  const int k_max = std::min<int>(8, static_cast<int>(rows.size()));
  if (k_max < 1) return out;
  char buf[64];
  for (const auto& [k, w] : clustering::wcss_curve(rows, k_max, seed)) {
    std::snprintf(buf, sizeof buf, "%d,%.17g\n", k, w);
    out += buf;
  }
  return out;
}

// Stages. Each returns what the next stage needs and writes its documents.

telemetry::LimitsResult stage_percentile(const std::vector<telemetry::UsageSample>& trace, const Options& o,
                                         const std::string& dir) {
  const std::int64_t window = o.window_days * telemetry::kDaySeconds;
  telemetry::LimitsResult limits = telemetry::compute_limits(trace, o.p, window);
  for (const auto& w : limits.warnings) std::cerr << "warning: " << w << '\n';
  write_json_file(telemetry::limits_to_json(limits, o.p, window), in_dir(dir, kLimitsFile));
  return limits;
}

std::map<std::string, std::string> stage_cluster(const Fleet& with_p99, const Options& o, const std::string& dir) {
  const auto c = clustering::characterize(with_p99, o.k, o.seed, o.joint);
  write_json_file(clustering::characterization_to_json(c), in_dir(dir, kClustersFile));
  write_text_file(elbow_csv(with_p99, o.seed), in_dir(dir, kElbowFile));
  return c.task_cluster;
}

struct Prepared {
  Fleet fleet;
  sensitivity::SensitivityTable table;
};

Prepared stage_sens_table(const Fleet& with_p99, const std::map<std::string, std::string>& task_cluster,
                          const Options& o, const std::string& dir) {
  const auto candidates = sensitivity::load_profiles(profiles_path(o));
  const auto profiles = sensitivity::profiles_by_cluster(candidates, with_p99.architectures());
  Prepared out{pipeline::apply_clusters(with_p99, task_cluster, profiles), {}};
  out.table = sensitivity::build_table(out.fleet.tasks(), out.fleet.architectures());
  save_fleet(out.fleet, in_dir(dir, kPreparedFile));
  write_json_file(sensitivity::table_to_json(out.table), in_dir(dir, kTableFile));
  return out;
}

solver::SolveResult stage_solve(const Fleet& fleet, const sensitivity::SensitivityTable* table,
                                const solver::SolverConfig& cfg, const std::string& dir) {
  solver::validate(cfg, table);
  const auto result = solver::solve(fleet, cfg, table);
  write_json_file(solver::config_to_json(cfg), in_dir(dir, kConfigFile));
  write_json_file(solver::result_to_json(result), in_dir(dir, kResultFile));
  write_text_file(solver::move_log_csv(result), in_dir(dir, kMovesFile));
  return result;
}

metrics::MetricsReport stage_report(const Fleet& fleet, const solver::SolveResult& result,
                                    const sensitivity::SensitivityTable* table, const solver::SolverConfig& cfg,
                                    const std::string& dir) {
  auto r = metrics::report(fleet, result.initial, result.final, cfg, table);
  write_json_file(metrics::report_to_json(r), in_dir(dir, kReportFile));
  write_text_file(metrics::report_csv(r), in_dir(dir, kReportCsvFile));
  return r;
}

std::optional<sensitivity::SensitivityTable> load_table(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return sensitivity::table_from_json(read_json_file(path));
}

// Commands.

void cmd_gen(const Options& o) {
  make_dir(o.out);
  const auto spec = synth::preset(o.preset, o.seed);
  const auto generated = synth::generate(spec);
  synth::write_files(generated, spec, o.out);
  write_json_file(synth::spec_to_json(spec), in_dir(o.out, kSpecFile));
}

void cmd_percentile(const Options& o) {
  make_dir(o.out);
  stage_percentile(telemetry::read_trace_csv(o.trace), o, o.out);
}

void cmd_cluster(const Options& o) {
  make_dir(o.out);
  const Fleet fleet = pipeline::apply_limits(load_fleet(o.fleet), telemetry::limits_from_json(read_json_file(o.limits)));
  stage_cluster(fleet, o, o.out);
}

void cmd_sens_table(const Options& o) {
  make_dir(o.out);
  const Fleet fleet = pipeline::apply_limits(load_fleet(o.fleet), telemetry::limits_from_json(read_json_file(o.limits)));
  const auto labels = clustering::task_clusters_from_json(read_json_file(o.clusters));
  stage_sens_table(fleet, labels, o, o.out);
}

void cmd_solve(const Options& o) {
  make_dir(o.out);
  const Fleet fleet = load_fleet(o.fleet);
  const auto table = load_table(o.table);
  stage_solve(fleet, table ? &*table : nullptr, config_from(o), o.out);
}

void cmd_report(const Options& o) {
  make_dir(o.out);
  const Fleet fleet = load_fleet(o.fleet);
  const auto table = load_table(o.table);
  const auto result = solver::result_from_json(read_json_file(o.result));
  stage_report(fleet, result, table ? &*table : nullptr, config_from(o), o.out);
}

// One full pass into `dir`; returns the final assignment.
Assignment pipeline_once(const Fleet& fleet, const std::vector<telemetry::UsageSample>& trace, const Options& o,
                         const std::string& dir, metrics::MetricsReport* report) {
  make_dir(dir);
  const auto cfg = config_from(o);
  const auto limits = stage_percentile(trace, o, dir);
  const Fleet with_p99 = pipeline::apply_limits(fleet, limits);
  const auto labels = stage_cluster(with_p99, o, dir);
  const Prepared prepared = stage_sens_table(with_p99, labels, o, dir);
  const auto result = stage_solve(prepared.fleet, &prepared.table, cfg, dir);
  *report = stage_report(prepared.fleet, result, &prepared.table, cfg, dir);
  return result.final;
}

// --repeat N re-solves at the last N cut points spaced --interval seconds
// apart, each on the trace seen so far, starting from the previous packing.
void cmd_pipeline(const Options& o) {
  if (o.repeat < 1) throw Error(ErrorCode::kUsage, "--repeat must be at least 1");
  if (o.interval < 1) throw Error(ErrorCode::kUsage, "--interval must be positive");
  make_dir(o.out);
  Fleet fleet = load_fleet(o.fleet);
  const auto trace = telemetry::read_trace_csv(o.trace);
  if (o.repeat == 1) {
    metrics::MetricsReport r;
    pipeline_once(fleet, trace, o, o.out, &r);
    return;
  }
  if (trace.empty()) throw Error(ErrorCode::kEmptyInput, "trace has no samples");
  std::int64_t last = trace.front().timestamp;
  for (const auto& s : trace) last = std::max(last, s.timestamp);
  std::string rows = "iteration,cutoff,metric,arch,value\n";
  for (int i = 1; i <= o.repeat; ++i) {
    const std::int64_t cutoff = last - static_cast<std::int64_t>(o.repeat - i) * o.interval;
    std::vector<telemetry::UsageSample> seen;
    for (const auto& s : trace) {
      if (s.timestamp <= cutoff) seen.push_back(s);
    }
    char name[32];
    std::snprintf(name, sizeof name, "iter_%03d", i);
    metrics::MetricsReport r;
    fleet = fleet.with_assignment(pipeline_once(fleet, seen, o, in_dir(o.out, name), &r));
    std::istringstream csv(metrics::report_csv(r));
    std::string line;
    std::getline(csv, line);  // header
    while (std::getline(csv, line)) rows += std::to_string(i) + "," + std::to_string(cutoff) + "," + line + "\n";
  }
  write_text_file(rows, in_dir(o.out, "reports.csv"));
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"colopack: percentile-limit, sensitivity-aware task packing"};
  app.require_subcommand(1);

  auto seed = [&](CLI::App* c) { c->add_option("--seed", o.seed, "Seed for every random stage"); };
  auto out = [&](CLI::App* c) { c->add_option("--out", o.out, "Output directory"); };
  auto solver_flags = [&](CLI::App* c) {
    c->add_option("--mode", o.mode, "baseline|p99cpu|p99mem|p99|p99sens");
    c->add_option("--weights", o.weights, "w_hosts,w_cost,w_frag,w_sens (default: mode preset)");
    c->add_option("--max-moves", o.max_moves, "Move budget")->check(CLI::NonNegativeNumber);
  };
  auto percentile_flags = [&](CLI::App* c) {
    c->add_option("--p", o.p, "Percentile")->check(CLI::Range(1, 100));
    c->add_option("--window-days", o.window_days, "Trailing window in days")->check(CLI::PositiveNumber);
  };
  auto cluster_flags = [&](CLI::App* c) {
    c->add_option("--k", o.k, "Clusters per group")->check(CLI::PositiveNumber);
    c->add_flag("--joint", o.joint, "Cluster all tasks together instead of per server type");
  };

  auto* gen = app.add_subcommand("gen", "Write a synthetic fleet and minute trace");
  gen->add_option("--preset", o.preset, "default|short|tiny");
  seed(gen), out(gen);

  auto* pct = app.add_subcommand("percentile", "Per-task percentile limits from a trace");
  pct->add_option("--trace", o.trace, "Trace CSV")->required();
  percentile_flags(pct), out(pct);

  auto* cl = app.add_subcommand("cluster", "Cluster tasks by percentile usage");
  cl->add_option("--fleet", o.fleet, "Fleet JSON")->required();
  cl->add_option("--limits", o.limits, "Limits JSON from percentile")->required();
  cluster_flags(cl), seed(cl), out(cl);

  auto* st = app.add_subcommand("sens-table", "Attach sensitivity profiles and build the per-arch table");
  st->add_option("--fleet", o.fleet, "Fleet JSON")->required();
  st->add_option("--limits", o.limits, "Limits JSON from percentile")->required();
  st->add_option("--clusters", o.clusters, "Clusters JSON from cluster")->required();
  st->add_option("--profiles", o.profiles, "Candidate profiles JSON (default: shipped asset)");
  out(st);

  auto* sv = app.add_subcommand("solve", "Repack tasks");
  sv->add_option("--fleet", o.fleet, "Fleet JSON, with p99 for p99 modes")->required();
  sv->add_option("--table", o.table, "Sensitivity table JSON");
  solver_flags(sv), seed(sv), out(sv);

  auto* rp = app.add_subcommand("report", "Metrics for a solve result");
  rp->add_option("--fleet", o.fleet, "Fleet JSON the result was solved on")->required();
  rp->add_option("--result", o.result, "Result JSON from solve")->required();
  rp->add_option("--table", o.table, "Sensitivity table JSON");
  solver_flags(rp), seed(rp), out(rp);

  auto* pl = app.add_subcommand("pipeline", "All stages from a fleet and trace");
  pl->add_option("--fleet", o.fleet, "Fleet JSON")->required();
  pl->add_option("--trace", o.trace, "Trace CSV")->required();
  pl->add_option("--profiles", o.profiles, "Candidate profiles JSON (default: shipped asset)");
  pl->add_option("--repeat", o.repeat, "Re-solve at this many cut points");
  pl->add_option("--interval", o.interval, "Seconds between cut points");
  percentile_flags(pl), cluster_flags(pl), solver_flags(pl), seed(pl), out(pl);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << error_code_name(ErrorCode::kUsage) << ": " << e.what() << '\n';
    return error_exit_status(ErrorCode::kUsage);
  }

  try {
    if (*gen) cmd_gen(o);
    if (*pct) cmd_percentile(o);
    if (*cl) cmd_cluster(o);
    if (*st) cmd_sens_table(o);
    if (*sv) cmd_solve(o);
    if (*rp) cmd_report(o);
    if (*pl) cmd_pipeline(o);
  } catch (const Error& e) {
    std::cerr << "error: " << error_code_name(e.code()) << ": " << e.what() << '\n';
    return error_exit_status(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return 70;
  }
  return 0;
}
