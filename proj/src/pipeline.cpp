#include "colopack/pipeline.hpp"

#include "colopack/error.hpp"

namespace colopack::pipeline {

Fleet apply_limits(const Fleet& fleet, const telemetry::LimitsResult& limits) {
  std::vector<TaskProfile> tasks = fleet.tasks();
  for (TaskProfile& t : tasks) {
    auto it = limits.limits.find(t.id);
    if (it != limits.limits.end()) t.p99 = it->second.limits;
  }
  return fleet.with_tasks(std::move(tasks));
}

Fleet apply_clusters(const Fleet& fleet, const std::map<std::string, std::string>& task_cluster,
                     const std::map<std::string, SensitivityProfile>& profiles) {
  std::vector<TaskProfile> tasks = fleet.tasks();
  for (TaskProfile& t : tasks) {
    auto c = task_cluster.find(t.id);
    if (c == task_cluster.end()) continue;
    auto p = profiles.find(c->second);
    if (p == profiles.end()) {
      throw Error(ErrorCode::kMissingProfile, "cluster '" + c->second + "' has no sensitivity profile");
    }
    t.cluster = c->second;
    t.base_sensitivity = p->second;
  }
  return fleet.with_tasks(std::move(tasks));
}

telemetry::LimitsResult synth_limits(const synth::Generated& generated,
                                     const synth::GeneratorSpec& spec, int p) {
  telemetry::LimitsResult out;
  std::vector<ResourceVector> series;
  for (const synth::TaskModel& m : generated.models) {
    series.clear();
    for (const auto& s : synth::minute_trace(spec, m)) series.push_back(s.usage);
    out.limits.emplace(m.task_id,
                       telemetry::PercentileLimits{m.task_id, p, telemetry::percentile_vector(series, p),
                                                   series.size()});
  }
  return out;
}

Prepared prepare(const Fleet& fleet, const telemetry::LimitsResult& limits, int k,
                 std::uint64_t seed, bool joint,
                 const std::vector<sensitivity::CandidateProfile>& candidates) {
  Prepared out;
  Fleet with_p99 = apply_limits(fleet, limits);
  out.characterization = clustering::characterize(with_p99, k, seed, joint);
  const auto profiles = sensitivity::profiles_by_cluster(candidates, with_p99.architectures());
  out.fleet = apply_clusters(with_p99, out.characterization.task_cluster, profiles);
  out.table = sensitivity::build_table(out.fleet.tasks(), out.fleet.architectures());
  return out;
}

Outcome run(const Prepared& prepared, const solver::SolverConfig& config) {
  Outcome out;
  out.result = solver::solve(prepared.fleet, config, &prepared.table);
  out.report = metrics::report(prepared.fleet, out.result.initial, out.result.final, config,
                               &prepared.table);
  return out;
}

}  // namespace colopack::pipeline
