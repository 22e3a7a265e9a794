#include <gtest/gtest.h>

#include <filesystem>

#include "colopack/error.hpp"
#include "colopack/solver.hpp"
#include "colopack/synth.hpp"
#include "colopack/telemetry.hpp"

using namespace colopack;
using namespace colopack::synth;

TEST(Generator, DeterministicUnderSeed) {
  const auto spec = tiny_preset(7);
  const Generated a = generate(spec);
  const Generated b = generate(spec);
  EXPECT_EQ(a.fleet, b.fleet);
  EXPECT_EQ(minute_trace(spec, a.models[3]), minute_trace(spec, b.models[3]));

  const auto other = tiny_preset(8);
  EXPECT_NE(minute_trace(other, generate(other).models[3]), minute_trace(spec, a.models[3]));
}

TEST(Generator, InitialAssignmentFeasibleUnderRequested) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Generated g = generate(tiny_preset(seed));
    EXPECT_TRUE(solver::all_feasible(g.fleet, g.fleet.assignment(), solver::LimitMode::kOriginal));
  }
  const Generated big = generate(short_preset(1));
  EXPECT_TRUE(solver::all_feasible(big.fleet, big.fleet.assignment(), solver::LimitMode::kOriginal));
  EXPECT_EQ(big.fleet.tasks().size(), 2000u);
  EXPECT_EQ(big.fleet.hosts().size(), 900u);
}

TEST(Generator, LongTailOfLowCpuUtilization) {
  const auto spec = default_preset(1);
  const Generated g = generate(spec);
  int low = 0;
  for (const TaskModel& m : g.models) {
    if (m.mean.cpu_cores <= 0.25 * m.requested.cpu_cores) ++low;
  }
  EXPECT_GE(low, static_cast<int>(0.9 * g.models.size()));
}

TEST(Generator, EmpiricalP99NearTarget) {
  const auto spec = short_preset(3);
  const Generated g = generate(spec);
  for (std::size_t i = 0; i < g.models.size(); i += 37) {
    const auto trace = minute_trace(spec, g.models[i]);
    const auto r = telemetry::compute_limits(trace, 99);
    const ResourceVector p99 = r.limits.at(g.models[i].task_id).limits;
    const ResourceVector& target = g.models[i].target_p99;
    EXPECT_NEAR(p99.cpu_cores, target.cpu_cores, 0.05 * target.cpu_cores) << g.models[i].task_id;
    EXPECT_NEAR(p99.memory_gb, target.memory_gb, 0.05 * target.memory_gb);
    EXPECT_NEAR(p99.netbw_gbps, target.netbw_gbps, 0.05 * target.netbw_gbps);
  }
}

TEST(Generator, FlatTraceWithoutAmplitudeOrNoise) {
  auto spec = tiny_preset(2);
  spec.diurnal_amplitude = 0;
  spec.noise = 0;
  const Generated g = generate(spec);
  const auto trace = minute_trace(spec, g.models[0]);
  for (const auto& s : trace) EXPECT_EQ(s.usage, trace.front().usage);
  const auto r = telemetry::compute_limits(trace, 99);
  EXPECT_EQ(r.limits.at(g.models[0].task_id).limits, g.models[0].mean);
}

TEST(Generator, SecondTraceAveragesBackToMinutes) {
  const auto spec = tiny_preset(4);
  const Generated g = generate(spec);
  const auto seconds = second_trace(spec, g.models[1], 600);
  ASSERT_EQ(seconds.size(), 600u);
  const auto minutes = telemetry::aggregate_minutes(seconds);
  const auto exact = minute_trace(spec, g.models[1]);
  ASSERT_EQ(minutes.size(), 10u);
  for (std::size_t i = 0; i < minutes.size(); ++i) {
    EXPECT_EQ(minutes[i].timestamp, exact[i].timestamp);
    EXPECT_NEAR(minutes[i].usage.cpu_cores, exact[i].usage.cpu_cores, spec.jitter * exact[i].usage.cpu_cores);
  }
}

TEST(Generator, InsufficientCapacityFailsBeforeWriting) {
  auto spec = tiny_preset(1);
  spec.hosts_per_arch = {{"Broadwell18", 1}};
  spec.n_tasks = 100;
  try {
    generate(spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnsatisfiable);
  }
}

TEST(Generator, ValidatesSpec) {
  auto spec = tiny_preset(1);
  spec.tail_fraction = 1.5;
  EXPECT_THROW(validate(spec), Error);
  spec = tiny_preset(1);
  spec.hosts_per_arch = {};
  EXPECT_THROW(validate(spec), Error);
  spec = tiny_preset(1);
  spec.hosts_per_arch["Pentium"] = 3;
  EXPECT_THROW(validate(spec), Error);
  EXPECT_THROW(preset("huge"), Error);
}

TEST(Generator, SpecJsonRoundTrip) {
  const auto spec = default_preset(99);
  EXPECT_EQ(spec_from_json(spec_to_json(spec)), spec);
}

TEST(Generator, WrittenFilesMatchInMemory) {
  const auto spec = tiny_preset(5);
  const Generated g = generate(spec);
  const auto dir = std::filesystem::temp_directory_path() / "colopack_synth_test";
  write_files(g, spec, dir.string());
  EXPECT_EQ(load_fleet((dir / "fleet.json").string()), g.fleet);
  EXPECT_EQ(telemetry::read_trace_csv((dir / "trace.csv").string()), full_trace(g, spec));
  std::filesystem::remove_all(dir);
}

TEST(Blobs, CentersAreWellSeparated) {
  const auto b = blobs(5, 50, 1);
  for (std::size_t i = 0; i < b.centers.size(); ++i) {
    for (std::size_t j = i + 1; j < b.centers.size(); ++j) {
      double d = 0;
      for (int k = 0; k < 3; ++k) d += (b.centers[i][k] - b.centers[j][k]) * (b.centers[i][k] - b.centers[j][k]);
      EXPECT_GE(std::sqrt(d), 6.0 * b.sigma);
    }
  }
  EXPECT_THROW(blobs(3, 2, 1), Error);
}
