#pragma once

// Small hand-checkable fleets shared by the unit tests and the acceptance run.

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "colopack/fleet.hpp"
#include "colopack/sensitivity.hpp"

namespace fixtures {

using namespace colopack;

inline const ArchSpec& builtin(const std::string& name) {
  static const std::vector<ArchSpec> archs = builtin_architectures();
  for (const ArchSpec& a : archs) {
    if (a.name == name) return a;
  }
  throw std::out_of_range(name);
}

inline ArchSpec box(std::string name, double cores, double mem, ServerType type = ServerType::kTypeI) {
  ArchSpec a;
  a.name = std::move(name);
  a.server_type = type;
  a.capacity = {cores, mem, 10.0, 10.0};
  a.score = 1.0;
  a.cost_weight = default_cost_weight(type);
  return a;
}

inline TaskProfile task(std::string id, double cpu, double mem,
                        std::optional<std::pair<double, double>> p99 = std::nullopt) {
  TaskProfile t;
  t.id = std::move(id);
  t.job_id = "job";
  t.requested = {cpu, mem, 1.0, 1.0};
  if (p99) t.p99 = ResourceVector{p99->first, p99->second, 1.0, 1.0};
  return t;
}

inline sensitivity::SensitivityTable table(const std::vector<std::string>& tasks,
                                           const std::vector<std::string>& archs,
                                           const std::vector<sensitivity::Scores>& per_task) {
  std::vector<sensitivity::Scores> entries;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    for (std::size_t a = 0; a < archs.size(); ++a) entries.push_back(per_task[t]);
  }
  return sensitivity::SensitivityTable(tasks, archs, entries);
}

// One Haswell10 host holding tasks of 20 and 10 cores; cpu sensitivities 0.7
// and 0.5.
struct SingleHost {
  Fleet fleet;
  sensitivity::SensitivityTable table;
};

inline SingleHost single_host() {
  SingleHost f;
  f.fleet = Fleet({builtin("Haswell10")}, {{"h1", "Haswell10"}},
                  {task("a", 20, 8), task("b", 10, 4)}, {{"a", "h1"}, {"b", "h1"}});
  f.table = table({"a", "b"}, {"Haswell10"}, {{0.7, 0.2, 0.1}, {0.5, 0.3, 0.4}});
  return f;
}

// Two 8-core tasks move from one Skylake16 onto two Broadwell18 hosts.
struct Spread {
  Fleet fleet;  // assignment = before
  Assignment after;
};

inline Spread spread_out() {
  Spread f;
  f.fleet = Fleet({builtin("Skylake16"), builtin("Broadwell18")},
                  {{"s16", "Skylake16"}, {"b18a", "Broadwell18"}, {"b18b", "Broadwell18"}},
                  {task("x", 8, 8), task("y", 8, 8)}, {{"x", "s16"}, {"y", "s16"}});
  f.after = {{"x", "b18a"}, {"y", "b18b"}};
  return f;
}

// Ten 2-core tasks over four Broadwell20 hosts: `before` uses w1 and w2,
// `packed` only w1, `spread` all four as 3,3,2,2.
struct Broadwell {
  Fleet fleet;  // assignment = before
  Assignment packed;
  Assignment spread;
  sensitivity::SensitivityTable table;
};

inline Broadwell broadwell() {
  Broadwell f;
  std::vector<TaskProfile> tasks;
  std::vector<std::string> ids;
  Assignment before;
  for (int i = 0; i < 10; ++i) {
    const std::string id = "t" + std::to_string(i);
    tasks.push_back(task(id, 2, 8));
    ids.push_back(id);
    before[id] = i < 5 ? "w1" : "w2";
    f.packed[id] = "w1";
    f.spread[id] = i < 3 ? "w1" : i < 6 ? "w2" : i < 8 ? "w3" : "w4";
  }
  f.fleet = Fleet({builtin("Broadwell20")},
                  {{"w1", "Broadwell20"}, {"w2", "Broadwell20"}, {"w3", "Broadwell20"}, {"w4", "Broadwell20"}},
                  tasks, before);
  std::vector<sensitivity::Scores> scores(10, {0.05, 0.05, 0.05});
  scores[0] = {0.7, 0.05, 0.05};
  scores[1] = {0.5, 0.05, 0.05};
  f.table = table(ids, {"Broadwell20"}, scores);
  return f;
}

// Random tiny instance: up to `max_tasks` tasks on up to `max_hosts` hosts,
// initial assignment feasible under requested limits, p99 below requested.
struct Tiny {
  Fleet fleet;
  sensitivity::SensitivityTable table;
};

inline Tiny random_tiny(std::mt19937_64& rng, int max_tasks, int max_hosts) {
  std::uniform_int_distribution<int> n_tasks(1, max_tasks);
  std::uniform_int_distribution<int> n_hosts(1, max_hosts);
  std::uniform_int_distribution<int> cores(1, 6);
  std::uniform_real_distribution<double> frac(0.2, 1.0);
  std::uniform_real_distribution<double> sens(0.05, 0.8);

  std::vector<ArchSpec> archs{box("small", 8, 16, ServerType::kTypeI),
                              box("large", 16, 32, ServerType::kTypeII)};
  const int h = n_hosts(rng);
  std::vector<Host> hosts;
  std::vector<double> free_cpu;
  std::vector<double> free_mem;
  for (int i = 0; i < h; ++i) {
    const bool large = (rng() & 1) != 0;
    hosts.push_back({"h" + std::to_string(i), large ? "large" : "small"});
    free_cpu.push_back(large ? 16 : 8);
    free_mem.push_back(large ? 32 : 16);
  }
  const int n = n_tasks(rng);
  std::vector<TaskProfile> tasks;
  Assignment assignment;
  std::vector<sensitivity::Scores> scores;
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) {
    const double c = cores(rng);
    const double m = 2.0 * cores(rng);
    // Place on a random host with room, shrinking the task if none has room.
    std::vector<int> fits;
    for (int j = 0; j < h; ++j) {
      if (free_cpu[j] >= c && free_mem[j] >= m) fits.push_back(j);
    }
    double cc = c;
    double mm = m;
    int target;
    if (fits.empty()) {
      target = static_cast<int>(rng() % static_cast<unsigned>(h));
      cc = std::min(c, free_cpu[target]);
      mm = std::min(m, free_mem[target]);
      if (cc <= 0 || mm <= 0) continue;
    } else {
      target = fits[rng() % fits.size()];
    }
    free_cpu[target] -= cc;
    free_mem[target] -= mm;
    const std::string id = "t" + std::to_string(i);
    tasks.push_back(task(id, cc, mm, std::make_pair(cc * frac(rng), mm * frac(rng))));
    assignment[id] = hosts[target].id;
    ids.push_back(id);
    scores.push_back({sens(rng), sens(rng), sens(rng)});
  }
  Tiny out;
  out.fleet = Fleet(archs, hosts, tasks, assignment);
  out.table = table(ids, {"small", "large"}, scores);
  return out;
}

}  // namespace fixtures
