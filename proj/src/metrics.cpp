#include "colopack/metrics.hpp"

#include <algorithm>
#include <sstream>

#include "colopack/error.hpp"

namespace colopack::metrics {

using nlohmann::json;
using sensitivity::Scores;

Fragmentation fragmentation(const Fleet& fleet, const Assignment& assignment,
                            solver::LimitMode mode, Resource resource) {
  auto pick = [resource](const ResourceVector& v) {
    return resource == Resource::kCpu ? v.cpu_cores : v.memory_gb;
  };
  double free = 0;
  double capacity = 0;
  for (const auto& [host_id, tasks] : tasks_by_host(assignment)) {
    const double cap = pick(fleet.arch_of_host(host_id).capacity);
    double used = 0;
    for (const std::string& t : tasks) used += pick(solver::effective_limits(fleet.task(t), mode));
    free += cap - used;
    capacity += cap;
  }
  if (capacity == 0) return {0.0, 0.0};
  return {free, 100.0 * free / capacity};
}

std::map<std::string, int> occupied_by_arch(const Fleet& fleet, const Assignment& assignment) {
  std::map<std::string, int> out;
  for (const auto& [host_id, tasks] : tasks_by_host(assignment)) ++out[fleet.host(host_id).arch];
  return out;
}

std::map<std::string, int> freed_by_arch(const Fleet& fleet, const Assignment& before,
                                         const Assignment& after) {
  const auto occupied_after = tasks_by_host(after);
  std::map<std::string, int> out;
  for (const auto& [host_id, tasks] : tasks_by_host(before)) {
    if (!occupied_after.contains(host_id)) ++out[fleet.host(host_id).arch];
  }
  return out;
}

double wsl(const Fleet& fleet, const Assignment& before, const Assignment& after) {
  const auto occupied = occupied_by_arch(fleet, after);
  const auto freed = freed_by_arch(fleet, before, after);
  double total = 0;
  for (const ArchSpec& a : fleet.architectures()) {
    auto o = occupied.find(a.name);
    auto f = freed.find(a.name);
    const int occ = o == occupied.end() ? 0 : o->second;
    const int fr = f == freed.end() ? 0 : f->second;
    total += a.score * occ - a.score * fr;
  }
  return total;
}

double occupied_cost(const Fleet& fleet, const Assignment& assignment) {
  double cost = 0;
  for (const auto& [host_id, tasks] : tasks_by_host(assignment)) {
    cost += fleet.arch_of_host(host_id).cost_weight;
  }
  return cost;
}

double tco_delta(const Fleet& fleet, const Assignment& before, const Assignment& after) {
  const double cb = occupied_cost(fleet, before);
  if (cb == 0) throw Error(ErrorCode::kInvalidValue, "TCO delta undefined: nothing occupied before");
  return 100.0 * (cb - occupied_cost(fleet, after)) / cb;
}

std::map<std::string, double> colocation_factor(const Fleet& fleet, const Assignment& assignment) {
  std::map<std::string, std::pair<int, int>> per_arch;  // hosts, tasks
  for (const auto& [host_id, tasks] : tasks_by_host(assignment)) {
    auto& e = per_arch[fleet.host(host_id).arch];
    e.first += 1;
    e.second += static_cast<int>(tasks.size());
  }
  std::map<std::string, double> out;
  for (const auto& [arch, e] : per_arch) out[arch] = static_cast<double>(e.second) / e.first;
  return out;
}

Interference interference(const Fleet& fleet, const Assignment& assignment,
                          const sensitivity::SensitivityTable& table) {
  Interference out;
  for (const auto& [host_id, tasks] : tasks_by_host(assignment)) {
    const std::string& arch = fleet.host(host_id).arch;
    Scores load;
    for (const std::string& t : tasks) load += table.at(t, arch);
    const Scores over{std::max(0.0, load.cpu - 1.0), std::max(0.0, load.membw - 1.0),
                      std::max(0.0, load.netbw - 1.0)};
    out.per_dimension += over;
    out.excess += over.cpu + over.membw + over.netbw;
    if (load.cpu > 1.0 || load.membw > 1.0 || load.netbw > 1.0) {
      out.tasks_at_risk += static_cast<int>(tasks.size());
    }
  }
  return out;
}

MetricsReport report(const Fleet& fleet, const Assignment& before, const Assignment& after,
                     const solver::SolverConfig& config, const sensitivity::SensitivityTable* table) {
  MetricsReport r;
  r.mode = std::string(solver::mode_name(config.mode));
  r.occupied_before = occupied_by_arch(fleet, before);
  r.occupied_after = occupied_by_arch(fleet, after);
  for (const auto& [arch, n] : r.occupied_before) r.hosts_occupied_before += n;
  for (const auto& [arch, n] : r.occupied_after) r.hosts_occupied_after += n;
  r.hosts_freed = freed_by_arch(fleet, before, after);
  r.hosts_newly_occupied = freed_by_arch(fleet, after, before);
  for (const auto& [task, host] : after) {
    auto it = before.find(task);
    if (it != before.end() && it->second != host) {
      ++r.tasks_moved[fleet.host(host).arch];
      ++r.tasks_moved_total;
    }
  }
  r.fragmentation_cpu = fragmentation(fleet, after, config.mode, Resource::kCpu);
  r.fragmentation_mem = fragmentation(fleet, after, config.mode, Resource::kMemory);
  r.tco = occupied_cost(fleet, before) > 0 ? tco_delta(fleet, before, after) : 0.0;
  r.wsl = wsl(fleet, before, after);
  r.colocation_factor = colocation_factor(fleet, after);
  if (table != nullptr && !table->empty()) {
    r.has_interference = true;
    r.interference = interference(fleet, after, *table);
  }
  return r;
}

json report_to_json(const MetricsReport& r) {
  json j{{"mode", r.mode},
         {"hosts_occupied_before", r.hosts_occupied_before},
         {"hosts_occupied_after", r.hosts_occupied_after},
         {"occupied_before", r.occupied_before},
         {"occupied_after", r.occupied_after},
         {"hosts_freed", r.hosts_freed},
         {"hosts_newly_occupied", r.hosts_newly_occupied},
         {"tasks_moved", r.tasks_moved},
         {"tasks_moved_total", r.tasks_moved_total},
         {"fragmentation_abs", {{"cpu", r.fragmentation_cpu.abs}, {"memory", r.fragmentation_mem.abs}}},
         {"fragmentation_pct", {{"cpu", r.fragmentation_cpu.pct}, {"memory", r.fragmentation_mem.pct}}},
         {"tco_reduction_pct", r.tco},
         {"wsl", r.wsl},
         {"colocation_factor", r.colocation_factor}};
  if (r.has_interference) {
    j["interference"] = {{"excess", r.interference.excess},
                         {"tasks_at_risk", r.interference.tasks_at_risk},
                         {"per_dimension",
                          {{"cpu", r.interference.per_dimension.cpu},
                           {"membw", r.interference.per_dimension.membw},
                           {"netbw", r.interference.per_dimension.netbw}}}};
  }
  return j;
}

std::string report_csv(const MetricsReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "metric,arch,value\n";
  auto row = [&](const char* metric, const std::string& arch, double v) {
    out << metric << ',' << arch << ',' << v << '\n';
  };
  row("hosts_occupied_before", "", r.hosts_occupied_before);
  row("hosts_occupied_after", "", r.hosts_occupied_after);
  for (const auto& [a, n] : r.occupied_before) row("occupied_before", a, n);
  for (const auto& [a, n] : r.occupied_after) row("occupied_after", a, n);
  for (const auto& [a, n] : r.hosts_freed) row("hosts_freed", a, n);
  for (const auto& [a, n] : r.hosts_newly_occupied) row("hosts_newly_occupied", a, n);
  for (const auto& [a, n] : r.tasks_moved) row("tasks_moved", a, n);
  row("tasks_moved_total", "", r.tasks_moved_total);
  row("fragmentation_abs_cpu", "", r.fragmentation_cpu.abs);
  row("fragmentation_abs_memory", "", r.fragmentation_mem.abs);
  row("fragmentation_pct_cpu", "", r.fragmentation_cpu.pct);
  row("fragmentation_pct_memory", "", r.fragmentation_mem.pct);
  row("tco_reduction_pct", "", r.tco);
  row("wsl", "", r.wsl);
  for (const auto& [a, v] : r.colocation_factor) row("colocation_factor", a, v);
  if (r.has_interference) {
    row("interference_excess", "", r.interference.excess);
    row("interference_excess_cpu", "", r.interference.per_dimension.cpu);
    row("interference_excess_membw", "", r.interference.per_dimension.membw);
    row("interference_excess_netbw", "", r.interference.per_dimension.netbw);
    row("tasks_at_risk", "", r.interference.tasks_at_risk);
  }
  return out.str();
}

}  // namespace colopack::metrics
