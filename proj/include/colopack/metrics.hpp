#pragma once

#include <map>
#include <string>

#include "colopack/fleet.hpp"
#include "colopack/sensitivity.hpp"
#include "colopack/solver.hpp"

namespace colopack::metrics {

enum class Resource { kCpu, kMemory };

struct Fragmentation {
  double abs = 0.0;  // unallocated capacity summed over occupied hosts
  double pct = 0.0;  // 100 * abs / occupied capacity; 0 when nothing is occupied
};

Fragmentation fragmentation(const Fleet& fleet, const Assignment& assignment,
                            solver::LimitMode mode, Resource resource);

// Hosts of each architecture with at least one task.
std::map<std::string, int> occupied_by_arch(const Fleet& fleet, const Assignment& assignment);

// Hosts of each architecture occupied in `before` and free in `after`.
std::map<std::string, int> freed_by_arch(const Fleet& fleet, const Assignment& before,
                                         const Assignment& after);

// Weighted-score loss: sum over architectures of
// score * occupied(after) - score * freed(before -> after).
double wsl(const Fleet& fleet, const Assignment& before, const Assignment& after);

// Sum of cost weights of occupied hosts.
double occupied_cost(const Fleet& fleet, const Assignment& assignment);

// Percent reduction of occupied cost from `before` to `after`. Throws
// Error(kInvalidValue) when `before` occupies nothing.
double tco_delta(const Fleet& fleet, const Assignment& before, const Assignment& after);

// Tasks per occupied host, for architectures with occupied hosts.
std::map<std::string, double> colocation_factor(const Fleet& fleet, const Assignment& assignment);

struct Interference {
  double excess = 0.0;  // sum over hosts and dimensions of max(0, load - 1)
  int tasks_at_risk = 0;
  sensitivity::Scores per_dimension;  // excess split by dimension
};

Interference interference(const Fleet& fleet, const Assignment& assignment,
                          const sensitivity::SensitivityTable& table);

struct MetricsReport {
  std::string mode;
  int hosts_occupied_before = 0;
  int hosts_occupied_after = 0;
  std::map<std::string, int> occupied_before;
  std::map<std::string, int> occupied_after;
  std::map<std::string, int> hosts_freed;
  std::map<std::string, int> hosts_newly_occupied;
  std::map<std::string, int> tasks_moved;  // moved tasks by destination architecture
  int tasks_moved_total = 0;
  Fragmentation fragmentation_cpu;
  Fragmentation fragmentation_mem;
  double tco = 0.0;  // percent reduction vs before
  double wsl = 0.0;
  std::map<std::string, double> colocation_factor;
  bool has_interference = false;
  Interference interference;
};

// `after` is evaluated under the config's limit mode; interference needs a
// table and is skipped without one.
MetricsReport report(const Fleet& fleet, const Assignment& before, const Assignment& after,
                     const solver::SolverConfig& config, const sensitivity::SensitivityTable* table);

nlohmann::json report_to_json(const MetricsReport& report);

// Flat rows: metric,arch,value (arch empty for fleet-wide metrics).
std::string report_csv(const MetricsReport& report);

}  // namespace colopack::metrics
