// Acceptance run: one PASS/FAIL line per criterion.
//   acceptance                 all criteria
//   acceptance --criterion N   only criterion N; exit status 1 if it fails

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "colopack/clustering.hpp"
#include "colopack/metrics.hpp"
#include "colopack/pipeline.hpp"
#include "colopack/sensitivity.hpp"
#include "colopack/solver.hpp"
#include "colopack/synth.hpp"
#include "colopack/telemetry.hpp"
#include "fixtures.hpp"
#include "property_suites.hpp"

using namespace colopack;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (ok) return;
    if (!pass) detail << "; ";
    pass = false;
    detail << what;
  }
};

// Published reference scores on Haswell10 and Broadwell20: cpu, membw, netbw.
struct Printed {
  const char* service;
  double h10[3];
  double b20[3];
};

constexpr Printed kReference[] = {
    {"Log1", {0.83, 0.92, 1.32}, {0.68, 0.60, 0.60}},
    {"KeyVal1", {0.77, 0.63, 1.32}, {0.63, 0.41, 0.61}},
    {"NN1", {0.77, 0.79, 0.80}, {0.63, 0.53, 0.36}},
    {"KeyVal2", {0.75, 0.92, 1.12}, {0.64, 0.45, 0.51}},
    {"KeyVal3", {0.99, 1.15, 1.98}, {0.81, 0.76, 0.90}},
    {"Rank2", {1.13, 1.31, 1.98}, {0.93, 0.86, 0.96}},
};

void normalization_vs_table(Verdict& v) {
  const auto archs = builtin_architectures();
  auto arch = [&](const std::string& n) -> const ArchSpec& {
    return *std::find_if(archs.begin(), archs.end(), [&](const ArchSpec& a) { return a.name == n; });
  };
  const auto candidates = sensitivity::load_profiles(sensitivity::default_profiles_path());
  const char* dims[] = {"cpu", "membw", "netbw"};
  int checked = 0;
  int matched = 0;
  for (const Printed& row : kReference) {
    auto c = std::find_if(candidates.begin(), candidates.end(),
                          [&](const auto& x) { return x.service == row.service; });
    if (c == candidates.end()) {
      v.require(false, std::string("no profile for ") + row.service);
      continue;
    }
    const ArchSpec& base = arch(c->profile.base_arch);
    for (const auto& [target, printed] : {std::pair{"Haswell10", row.h10}, std::pair{"Broadwell20", row.b20}}) {
      const sensitivity::Scores s = sensitivity::normalize(c->profile, arch(target), base);
      const double got[] = {s.cpu, s.membw, s.netbw};
      for (int d = 0; d < 3; ++d) {
        ++checked;
        const double diff = std::abs(got[d] - printed[d]);
        const bool outlier = std::string(row.service) == "Log1" && std::string(target) == "Broadwell20" && d == 1;
        const bool ok = outlier ? diff > 0.02 : diff <= 0.02;
        if (ok) {
          ++matched;
          continue;
        }
        std::ostringstream what;
        what.precision(3);
        what << row.service << '/' << target << '/' << dims[d] << " got " << got[d] << " printed " << printed[d];
        if (outlier) what << " (expected to differ)";
        v.require(false, what.str());
      }
    }
  }
  v.detail << (v.pass ? "" : " | ") << matched << '/' << checked << " entries as expected";
}

void oracle_equivalence(Verdict& v) {
  std::mt19937_64 rng(2024);
  int worst_hosts = 0;
  double worst_ratio = 0;
  for (int i = 0; i < 200; ++i) {
    const auto tiny = fixtures::random_tiny(rng, 6, 3);
    const auto mode = static_cast<solver::LimitMode>(i % 5);
    const solver::SolverConfig cfg = solver::preset(mode);
    const auto r = solver::solve(tiny.fleet, cfg, &tiny.table);
    const Assignment best = solver::brute_force_optimal(tiny.fleet, cfg, &tiny.table);
    const double got = solver::objective(tiny.fleet, r.final, cfg, &tiny.table);
    const double opt = solver::objective(tiny.fleet, best, cfg, &tiny.table);
    const int dh = static_cast<int>(tasks_by_host(r.final).size()) - static_cast<int>(tasks_by_host(best).size());
    worst_hosts = std::max(worst_hosts, dh);
    if (opt > 0) worst_ratio = std::max(worst_ratio, got / opt);
    std::string id = "instance " + std::to_string(i);
    v.require(solver::all_feasible(tiny.fleet, r.final, mode), id + " infeasible");
    v.require(dh <= 1, id + " uses " + std::to_string(dh) + " hosts more than optimal");
    v.require(got <= 1.15 * opt + 1e-12, id + " objective ratio " + std::to_string(got / opt));
  }
  v.detail << (v.pass ? "" : " | ") << "200 instances, worst host gap " << worst_hosts << ", worst ratio "
           << worst_ratio;
}

double frag_sum(const metrics::MetricsReport& r) { return r.fragmentation_cpu.pct + r.fragmentation_mem.pct; }

void efficiency_tradeoff(Verdict& v) {
  const auto spec = synth::default_preset(1);
  const auto gen = synth::generate(spec);
  const auto limits = pipeline::synth_limits(gen, spec, 99);
  const auto prepared = pipeline::prepare(gen.fleet, limits, clustering::kDefaultK, spec.seed, false,
                                          sensitivity::load_profiles(sensitivity::default_profiles_path()));
  // Budget: one move per task, so the search can converge on this fleet.
  const int budget = static_cast<int>(gen.fleet.tasks().size());
  auto run = [&](solver::LimitMode mode) {
    solver::SolverConfig cfg = solver::preset(mode);
    cfg.max_moves = budget;
    cfg.seed = spec.seed;
    return pipeline::run(prepared, cfg).report;
  };
  const auto base = run(solver::LimitMode::kOriginal);
  const auto p99 = run(solver::LimitMode::kP99);
  const auto sens = run(solver::LimitMode::kP99Sens);

  const double freed = 1.0 - static_cast<double>(p99.hosts_occupied_after) / base.hosts_occupied_after;
  const double frag_cut = 1.0 - frag_sum(p99) / frag_sum(base);
  const double risk_cut =
      1.0 - static_cast<double>(sens.interference.tasks_at_risk) / std::max(1, p99.interference.tasks_at_risk);
  v.require(gen.fleet.tasks().size() >= 2000 && gen.fleet.hosts().size() >= 800, "fleet below 2000 tasks/800 hosts");
  v.require(freed >= 0.25, "P99 freed only " + std::to_string(100 * freed) + "% of baseline hosts");
  v.require(frag_cut >= 0.30, "fragmentation cut only " + std::to_string(100 * frag_cut) + "%");
  v.require(sens.interference.excess < p99.interference.excess, "P99Sens excess not below P99");
  v.require(sens.interference.tasks_at_risk < p99.interference.tasks_at_risk, "P99Sens tasks_at_risk not below P99");
  v.require(sens.hosts_occupied_after >= p99.hosts_occupied_after, "P99Sens uses fewer hosts than P99");
  v.detail.precision(3);
  v.detail << (v.pass ? "" : " | ") << "hosts baseline " << base.hosts_occupied_after << " p99 "
           << p99.hosts_occupied_after << " p99sens " << sens.hosts_occupied_after << "; frag(cpu+mem) "
           << frag_sum(base) << " -> " << frag_sum(p99) << "; excess " << p99.interference.excess << " -> "
           << sens.interference.excess << "; at risk " << p99.interference.tasks_at_risk << " -> "
           << sens.interference.tasks_at_risk << " (" << 100 * risk_cut << "% fewer, 20% target "
           << (risk_cut >= 0.20 ? "met" : "not met") << ")";
}

void determinism_and_monotonicity(Verdict& v) {
  const auto spec = synth::short_preset(4);
  const auto gen = synth::generate(spec);
  const auto prepared = pipeline::prepare(gen.fleet, pipeline::synth_limits(gen, spec, 99), 3, spec.seed, false,
                                          sensitivity::load_profiles(sensitivity::default_profiles_path()));
  std::size_t steps = 0;
  for (auto mode : {solver::LimitMode::kP99, solver::LimitMode::kP99Sens}) {
    const auto cfg = solver::preset(mode);
    const auto a = solver::solve(prepared.fleet, cfg, &prepared.table);
    const auto b = solver::solve(prepared.fleet, cfg, &prepared.table);
    const std::string name(solver::mode_name(mode));
    v.require(solver::result_to_json(a).dump() == solver::result_to_json(b).dump(), name + " results differ");
    v.require(static_cast<int>(a.moves_applied.size()) <= cfg.max_moves, name + " over budget");
    Assignment current = solver::replay(a.initial, a.repairs);
    double previous = a.initial_objective;
    std::size_t next = 0;
    for (std::size_t s = 0; s < a.step_moves.size(); ++s) {
      for (int k = 0; k < a.step_moves[s]; ++k) {
        const auto& move = a.moves_applied[next++];
        current = solver::replay(current, std::span(&move, 1));
        std::vector<std::string> touched;
        if (const auto* r = std::get_if<solver::Relocate>(&move)) {
          touched = {r->from, r->to};
        } else {
          const auto& sw = std::get<solver::Swap>(move);
          touched = {current.at(sw.task_a), current.at(sw.task_b)};
        }
        for (const auto& h : touched) {
          v.require(solver::feasible(prepared.fleet, current, h, {}, mode),
                    name + " infeasible host " + h + " at step " + std::to_string(s + 1));
        }
      }
      v.require(a.objective_trace[s] < previous, name + " objective not decreasing at step " + std::to_string(s + 1));
      previous = a.objective_trace[s];
    }
    v.require(current == a.final, name + " replay does not reach final");
    v.require(solver::all_feasible(prepared.fleet, a.final, mode), name + " final infeasible");
    steps += a.step_moves.size();
  }
  v.detail << (v.pass ? "" : " | ") << steps << " steps replayed";
}

void clustering_recovery(Verdict& v) {
  const auto b = synth::blobs(3, 300, 11);
  const auto m = clustering::kmeans(b.rows, 3, 5);
  std::set<std::pair<int, int>> pairs;
  for (std::size_t i = 0; i < b.rows.size(); ++i) pairs.insert({b.labels[i], m.row_labels[i]});
  v.require(pairs.size() == 3, "label purity below 100% (" + std::to_string(pairs.size()) + " blob/cluster pairs)");
  const auto curve = clustering::wcss_curve(b.rows, 8, 5);
  for (std::size_t i = 1; i < curve.size(); ++i) {
    v.require(curve[i].second <= curve[i - 1].second, "WCSS rises at k=" + std::to_string(curve[i].first));
  }
  const int elbow = clustering::pick_elbow(curve);
  v.require(elbow == 3, "elbow at k=" + std::to_string(elbow));
  v.detail << (v.pass ? "" : " | ") << "elbow " << elbow << ", wcss(3) " << curve[2].second;
}

void percentile_granularity(Verdict& v) {
  const auto spec = synth::short_preset(6);
  const auto gen = synth::generate(spec);
  double worst = 0;
  for (std::size_t i = 0; i < gen.models.size(); i += 100) {
    const auto seconds = synth::second_trace(spec, gen.models[i], telemetry::kDaySeconds);
    const auto fine = telemetry::compute_limits(seconds, 99).limits.begin()->second.limits;
    const auto coarse =
        telemetry::compute_limits(telemetry::aggregate_minutes(seconds), 99).limits.begin()->second.limits;
    for (auto [a, b] : {std::pair{fine.cpu_cores, coarse.cpu_cores}, std::pair{fine.memory_gb, coarse.memory_gb},
                        std::pair{fine.membw_gbps, coarse.membw_gbps}, std::pair{fine.netbw_gbps, coarse.netbw_gbps}}) {
      const double rel = std::abs(a - b) / b;
      worst = std::max(worst, rel);
      v.require(rel < 0.01, gen.models[i].task_id + " differs by " + std::to_string(100 * rel) + "%");
    }
  }
  v.detail << (v.pass ? "" : " | ") << "20 tasks x 86400 s, worst relative gap " << 100 * worst << "%";
}

void metric_identities(Verdict& v) {
  using metrics::Resource;
  const solver::LimitMode orig = solver::LimitMode::kOriginal;
  auto near = [&](double got, double want, const std::string& what) {
    v.require(std::abs(got - want) <= 1e-9, what + " = " + std::to_string(got) + ", want " + std::to_string(want));
  };
  int checks = 0;
  auto count = [&] { ++checks; };

  const auto s = fixtures::single_host();
  const Assignment& sa = s.fleet.assignment();
  near(metrics::fragmentation(s.fleet, sa, orig, Resource::kCpu).abs, 18.0, "single frag cpu abs"), count();
  near(metrics::fragmentation(s.fleet, sa, orig, Resource::kCpu).pct, 37.5, "single frag cpu pct"), count();
  near(metrics::fragmentation(s.fleet, sa, orig, Resource::kMemory).abs, 20.0, "single frag mem abs"), count();
  near(metrics::wsl(s.fleet, sa, sa), 1.63, "single wsl"), count();
  near(metrics::tco_delta(s.fleet, sa, sa), 0.0, "single tco"), count();
  near(metrics::colocation_factor(s.fleet, sa).at("Haswell10"), 2.0, "single colocation"), count();
  near(metrics::interference(s.fleet, sa, s.table).excess, 0.2, "single excess"), count();
  near(metrics::interference(s.fleet, sa, s.table).tasks_at_risk, 2, "single at risk"), count();

  const auto sp = fixtures::spread_out();
  const Assignment& before = sp.fleet.assignment();
  near(metrics::wsl(sp.fleet, before, sp.after), -0.52, "spread wsl"), count();
  near(metrics::tco_delta(sp.fleet, before, sp.after), 20.0, "spread tco"), count();
  near(metrics::fragmentation(sp.fleet, sp.after, orig, Resource::kCpu).pct, 75.0, "spread frag cpu pct"), count();
  near(metrics::fragmentation(sp.fleet, sp.after, orig, Resource::kMemory).abs, 48.0, "spread frag mem abs"), count();
  near(metrics::colocation_factor(sp.fleet, sp.after).at("Broadwell18"), 1.0, "spread colocation"), count();
  v.require(!metrics::colocation_factor(sp.fleet, sp.after).contains("Skylake16"), "unused arch in colocation map"),
      count();

  const auto bw = fixtures::broadwell();
  const Assignment& bb = bw.fleet.assignment();
  near(metrics::tco_delta(bw.fleet, bb, bw.packed), 50.0, "broadwell tco"), count();
  near(metrics::colocation_factor(bw.fleet, bw.spread).at("Broadwell20"), 2.5, "broadwell colocation"), count();
  near(metrics::wsl(bw.fleet, bb, bw.packed), 1.98 - 1.98, "broadwell wsl"), count();
  near(metrics::fragmentation(bw.fleet, bw.packed, orig, Resource::kCpu).abs, 36.0, "broadwell frag cpu abs"), count();
  near(metrics::interference(bw.fleet, bw.packed, bw.table).excess, 0.6, "broadwell packed excess"), count();
  near(metrics::interference(bw.fleet, bw.spread, bw.table).excess, 0.25, "broadwell spread excess"), count();
  near(metrics::interference(bw.fleet, bw.spread, bw.table).tasks_at_risk, 3, "broadwell spread at risk"), count();
  v.detail << (v.pass ? "" : " | ") << checks << " identities on 3 fixtures";
}

void property_suites(Verdict& v) {
  constexpr int kCases = 1000;
  const props::Outcome suites[] = {
      props::normalize_round_trip(kCases),   props::normalize_transitivity(kCases),
      props::normalize_monotonicity(kCases), props::percentile_monotonicity(kCases),
      props::percentile_permutation(kCases), props::limits_duplication(kCases),
      props::interference_additivity(kCases), props::shuffle_independence(kCases),
  };
  for (const auto& o : suites) {
    v.require(o.cases >= kCases && o.failures == 0,
              o.name + ": " + std::to_string(o.failures) + "/" + std::to_string(o.cases) + " failed (" +
                  o.first_failure + ")");
  }
  v.detail << (v.pass ? "" : " | ") << std::size(suites) << " suites x " << kCases << " cases";
}

struct Criterion {
  int id;
  const char* title;
  std::function<void(Verdict&)> run;
};

const Criterion kCriteria[] = {
    {1, "sensitivity normalization vs published reference", normalization_vs_table},
    {2, "oracle equivalence on 200 tiny instances", oracle_equivalence},
    {3, "efficiency trade-off on default synthetic fleet", efficiency_tradeoff},
    {4, "solver determinism, monotonicity, replay feasibility", determinism_and_monotonicity},
    {5, "clustering recovery and elbow", clustering_recovery},
    {6, "percentile granularity seconds vs minutes", percentile_granularity},
    {7, "metric identities on micro-fixtures", metric_identities},
    {8, "property suites", property_suites},
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--criterion N]\n", argv[0]);
      return 2;
    }
  }
  int failed = 0;
  for (const Criterion& c : kCriteria) {
    if (only != 0 && c.id != only) continue;
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(v);
    } catch (const std::exception& e) {
      v.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] %d %s (%.2fs): %s\n", v.pass ? "PASS" : "FAIL", c.id, c.title, secs, v.detail.str().c_str());
    if (!v.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
