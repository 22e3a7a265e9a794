#pragma once

// Seeded generative checks of the module invariants. Each suite runs `cases`
// random cases and reports how many failed; shared by the gtest runner and
// the acceptance binary.

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "colopack/metrics.hpp"
#include "colopack/sensitivity.hpp"
#include "colopack/solver.hpp"
#include "colopack/telemetry.hpp"
#include "fixtures.hpp"

namespace props {

using namespace colopack;
using sensitivity::Scores;

struct Outcome {
  std::string name;
  int cases = 0;
  int failures = 0;
  std::string first_failure;

  void check(bool ok, const std::string& what) {
    if (ok) return;
    if (failures++ == 0) first_failure = "case " + std::to_string(cases) + ": " + what;
  }
};

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({1e-300, std::abs(a), std::abs(b)});
}

inline bool close(const Scores& a, const Scores& b, double tol) {
  return rel_diff(a.cpu, b.cpu) <= tol && rel_diff(a.membw, b.membw) <= tol &&
         rel_diff(a.netbw, b.netbw) <= tol;
}

inline ArchSpec random_arch(std::mt19937_64& rng, const std::string& name) {
  std::uniform_real_distribution<double> cores(4, 128), bw(0.5, 300), score(0.3, 3);
  ArchSpec a = fixtures::box(name, std::round(cores(rng)), 64);
  a.capacity.membw_gbps = bw(rng);
  a.capacity.netbw_gbps = bw(rng) / 10;
  a.score = score(rng);
  return a;
}

inline SensitivityProfile random_profile(std::mt19937_64& rng, const std::string& base) {
  std::uniform_real_distribution<double> s(0.01, 2.0);
  return {base, s(rng), s(rng), s(rng)};
}

inline Outcome normalize_round_trip(int cases) {
  Outcome o{"normalize round-trip"};
  std::mt19937_64 rng(101);
  for (; o.cases < cases; ++o.cases) {
    const ArchSpec a = random_arch(rng, "A");
    const ArchSpec b = random_arch(rng, "B");
    const SensitivityProfile p = random_profile(rng, "A");
    const Scores back = sensitivity::normalize(sensitivity::rebase(p, b, a), a, b);
    o.check(close(back, {p.cpu, p.membw, p.netbw}, 1e-12), "A->B->A differs");
  }
  return o;
}

inline Outcome normalize_transitivity(int cases) {
  Outcome o{"normalize transitivity"};
  std::mt19937_64 rng(202);
  for (; o.cases < cases; ++o.cases) {
    const ArchSpec a = random_arch(rng, "A");
    const ArchSpec b = random_arch(rng, "B");
    const ArchSpec c = random_arch(rng, "C");
    const SensitivityProfile p = random_profile(rng, "A");
    const Scores direct = sensitivity::normalize(p, c, a);
    const Scores via = sensitivity::normalize(sensitivity::rebase(p, b, a), c, b);
    o.check(close(direct, via, 1e-12), "A->C differs from A->B->C");
  }
  return o;
}

inline Outcome normalize_monotonicity(int cases) {
  Outcome o{"normalize monotonicity"};
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> bump(1.01, 2.0);
  for (; o.cases < cases; ++o.cases) {
    const ArchSpec base = random_arch(rng, "A");
    ArchSpec target = random_arch(rng, "B");
    const SensitivityProfile p = random_profile(rng, "A");
    const Scores before = sensitivity::normalize(p, target, base);
    target.score *= bump(rng);
    target.capacity.membw_gbps *= bump(rng);
    target.capacity.netbw_gbps *= bump(rng);
    const Scores after = sensitivity::normalize(p, target, base);
    o.check(after.cpu < before.cpu && after.membw < before.membw && after.netbw < before.netbw,
            "bigger target did not lower every score");
  }
  return o;
}

inline Outcome percentile_monotonicity(int cases) {
  Outcome o{"percentile monotonicity"};
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<int> len(1, 300), pct(1, 100);
  std::normal_distribution<double> v(10, 5);
  for (; o.cases < cases; ++o.cases) {
    std::vector<double> values(static_cast<std::size_t>(len(rng)));
    for (double& x : values) x = v(rng);
    int p1 = pct(rng), p2 = pct(rng);
    if (p1 > p2) std::swap(p1, p2);
    o.check(telemetry::percentile(values, p1) <= telemetry::percentile(values, p2),
            "p" + std::to_string(p1) + " above p" + std::to_string(p2));
  }
  return o;
}

inline Outcome percentile_permutation(int cases) {
  Outcome o{"percentile permutation/oracle"};
  std::mt19937_64 rng(505);
  std::uniform_int_distribution<int> len(1, 300), pct(1, 100);
  std::uniform_real_distribution<double> v(0, 100);
  for (; o.cases < cases; ++o.cases) {
    std::vector<double> values(static_cast<std::size_t>(len(rng)));
    for (double& x : values) x = std::round(v(rng));  // ties on purpose
    const int p = pct(rng);
    const double got = telemetry::percentile(values, p);
    std::shuffle(values.begin(), values.end(), rng);
    o.check(telemetry::percentile(values, p) == got, "shuffled input changed the percentile");
    std::sort(values.begin(), values.end());
    const std::size_t rank = (static_cast<std::size_t>(p) * values.size() + 99) / 100;
    o.check(got == values[rank - 1], "differs from sort-and-index oracle");
  }
  return o;
}

inline Outcome limits_duplication(int cases) {
  Outcome o{"limits on duplicated trace"};
  std::mt19937_64 rng(606);
  std::uniform_int_distribution<int> tasks(1, 4), len(1, 40), pct(1, 100);
  std::uniform_real_distribution<double> v(0, 10);
  for (; o.cases < cases; ++o.cases) {
    std::vector<telemetry::UsageSample> trace, doubled;
    const int n = tasks(rng);
    for (int t = 0; t < n; ++t) {
      const int m = len(rng);
      for (int k = 0; k < m; ++k) {
        telemetry::UsageSample s{"t" + std::to_string(t), k * 60, {v(rng), v(rng), v(rng), v(rng)}};
        trace.push_back(s);
        doubled.push_back(s);
        doubled.push_back(s);
      }
    }
    const int p = pct(rng);
    const auto a = telemetry::compute_limits(trace, p);
    const auto b = telemetry::compute_limits(doubled, p);
    bool same = a.limits.size() == b.limits.size();
    for (const auto& [id, lim] : a.limits) {
      same = same && b.limits.contains(id) && b.limits.at(id).limits == lim.limits &&
             b.limits.at(id).sample_count == 2 * lim.sample_count;
    }
    o.check(same, "raw duplicated trace changed limits");
    o.check(telemetry::compute_limits(telemetry::aggregate_minutes(doubled), p).limits == a.limits,
            "aggregated duplicated trace changed limits");
  }
  return o;
}

inline Outcome interference_additivity(int cases) {
  Outcome o{"interference additivity"};
  std::mt19937_64 rng(707);
  for (; o.cases < cases; ++o.cases) {
    const auto tiny = fixtures::random_tiny(rng, 8, 1);
    const Fleet& f = tiny.fleet;
    if (f.tasks().empty()) continue;
    const std::string host = f.hosts()[0].id;
    Assignment s1, s2;
    for (const TaskProfile& t : f.tasks()) ((rng() & 1) ? s1 : s2)[t.id] = host;
    const Scores whole = sensitivity::host_sensitivity_load(f, f.assignment(), host, tiny.table);
    const Scores sum = sensitivity::host_sensitivity_load(f, s1, host, tiny.table) +
                       sensitivity::host_sensitivity_load(f, s2, host, tiny.table);
    o.check(std::abs(whole.cpu - sum.cpu) <= 1e-12 && std::abs(whole.membw - sum.membw) <= 1e-12 &&
                std::abs(whole.netbw - sum.netbw) <= 1e-12,
            "load(S1 u S2) != load(S1) + load(S2)");
  }
  return o;
}

inline Outcome shuffle_independence(int cases) {
  Outcome o{"shuffle independence"};
  std::mt19937_64 rng(808);
  for (; o.cases < cases; ++o.cases) {
    const auto tiny = fixtures::random_tiny(rng, 6, 3);
    const Fleet& f = tiny.fleet;
    auto hosts = f.hosts();
    auto tasks = f.tasks();
    std::shuffle(hosts.begin(), hosts.end(), rng);
    std::shuffle(tasks.begin(), tasks.end(), rng);
    const Fleet g(f.architectures(), hosts, tasks, f.assignment());
    o.check(g == f, "fleet depends on input order");

    const solver::SolverConfig cfg = solver::preset(solver::LimitMode::kP99Sens);
    const auto a = solver::solve(f, cfg, &tiny.table);
    const auto b = solver::solve(g, cfg, &tiny.table);
    o.check(a == b, "solve depends on input order");
    o.check(metrics::interference(f, a.final, tiny.table).excess ==
                metrics::interference(g, b.final, tiny.table).excess,
            "interference depends on input order");

    // Interleaving tasks in a trace keeps per-task order, so limits agree.
    std::vector<telemetry::UsageSample> trace;
    for (const TaskProfile& t : f.tasks()) {
      for (int k = 0; k < 5; ++k) {
        trace.push_back({t.id, k * 60, {static_cast<double>(rng() % 100), 1, 1, 1}});
      }
    }
    auto mixed = trace;
    std::stable_sort(mixed.begin(), mixed.end(),
                     [](const auto& x, const auto& y) { return x.timestamp < y.timestamp; });
    o.check(telemetry::compute_limits(trace, 90).limits == telemetry::compute_limits(mixed, 90).limits,
            "limits depend on trace interleaving");
  }
  return o;
}

inline Outcome solver_invariants(int cases) {
  Outcome o{"solver feasibility/monotonicity/determinism"};
  std::mt19937_64 rng(909);
  for (; o.cases < cases; ++o.cases) {
    const auto tiny = fixtures::random_tiny(rng, 8, 4);
    const auto mode = static_cast<solver::LimitMode>(rng() % 5);
    solver::SolverConfig cfg = solver::preset(mode);
    cfg.max_moves = static_cast<int>(rng() % 6);
    const auto r = solver::solve(tiny.fleet, cfg, &tiny.table);
    o.check(r == solver::solve(tiny.fleet, cfg, &tiny.table), "rerun differs");
    o.check(static_cast<int>(r.moves_applied.size()) <= cfg.max_moves, "budget exceeded");

    Assignment current = solver::replay(r.initial, r.repairs);
    o.check(solver::all_feasible(tiny.fleet, current, mode), "infeasible after repairs");
    double previous = r.initial_objective;
    std::size_t next = 0;
    for (std::size_t s = 0; s < r.step_moves.size(); ++s) {
      for (int k = 0; k < r.step_moves[s]; ++k) {
        current = solver::replay(current, std::span(&r.moves_applied[next++], 1));
        o.check(solver::all_feasible(tiny.fleet, current, mode), "infeasible after a move");
      }
      o.check(r.objective_trace[s] < previous, "objective did not decrease");
      o.check(solver::objective(tiny.fleet, current, cfg, &tiny.table) == r.objective_trace[s],
              "trace differs from recomputed objective");
      previous = r.objective_trace[s];
    }
    o.check(current == r.final, "replay does not reach final");
  }
  return o;
}

inline Outcome sensitivity_weight_monotonicity(int cases) {
  Outcome o{"raising w_sens never raises interference"};
  std::mt19937_64 rng(1010);
  for (; o.cases < cases; ++o.cases) {
    const auto tiny = fixtures::random_tiny(rng, 6, 3);
    solver::SolverConfig off = solver::preset(solver::LimitMode::kP99);
    solver::SolverConfig on = off;
    on.weights.sens = 10;
    const double a =
        metrics::interference(tiny.fleet, solver::solve(tiny.fleet, off, &tiny.table).final, tiny.table).excess;
    const double b =
        metrics::interference(tiny.fleet, solver::solve(tiny.fleet, on, &tiny.table).final, tiny.table).excess;
    std::ostringstream msg;
    msg << "w_sens=0 gives " << a << ", w_sens=10 gives " << b;
    o.check(b <= a + 1e-12, msg.str());
  }
  return o;
}

inline Outcome report_invariants(int cases) {
  Outcome o{"report invariants"};
  std::mt19937_64 rng(1111);
  for (; o.cases < cases; ++o.cases) {
    const auto tiny = fixtures::random_tiny(rng, 8, 4);
    const auto cfg = solver::preset(solver::LimitMode::kP99);
    const auto r = solver::solve(tiny.fleet, cfg, &tiny.table);
    const auto rep = metrics::report(tiny.fleet, r.initial, r.final, cfg, &tiny.table);
    double occupied_cpu = 0;
    for (const auto& [host, tasks] : tasks_by_host(r.final)) {
      occupied_cpu += tiny.fleet.arch_of_host(host).capacity.cpu_cores;
    }
    if (occupied_cpu > 0) {
      o.check(std::abs(rep.fragmentation_cpu.pct - 100.0 * rep.fragmentation_cpu.abs / occupied_cpu) <= 1e-9,
              "pct not recomputable from abs");
    }
    o.check(rep.fragmentation_cpu.pct >= -1e-9 && rep.fragmentation_cpu.pct <= 100.0 + 1e-9, "pct out of range");
    o.check(rep.interference.tasks_at_risk <= static_cast<int>(tiny.fleet.tasks().size()), "too many at risk");
    o.check(rep.interference.excess >= 0.0, "negative excess");
  }
  return o;
}

}  // namespace props
