#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "colopack/clustering.hpp"
#include "colopack/fleet.hpp"
#include "colopack/telemetry.hpp"

namespace colopack::synth {

// Mean and spread of one utilization dimension, as a fraction of the request.
struct Spread {
  double mean = 0.0;
  double stddev = 0.0;
  friend bool operator==(const Spread&, const Spread&) = default;
};

// Utilization mix for a share of the tasks. cpu/mem/netbw are p99 usage over
// requested.
struct UtilizationProfile {
  std::string name;
  double weight = 1.0;
  Spread cpu;
  Spread mem;
  Spread netbw;
  friend bool operator==(const UtilizationProfile&, const UtilizationProfile&) = default;
};

struct GeneratorSpec {
  std::uint64_t seed = 1;
  std::map<std::string, int> hosts_per_arch;
  int n_tasks = 0;
  std::vector<UtilizationProfile> profiles;
  double diurnal_amplitude = 0.3;  // in [0, 1]
  double tail_fraction = 0.05;     // share of tasks drawn from the hot tail profile
  UtilizationProfile tail;         // utilization for the tail share
  double noise = 0.05;             // bounded multiplicative minute noise, in [0, 1)
  double jitter = 0.005;           // bounded per-second noise around each minute
  int days = 7;
  std::int64_t start = 1'700'006'400;  // day aligned

  friend bool operator==(const GeneratorSpec&, const GeneratorSpec&) = default;
};

// Throws Error(kInvalidValue) for out-of-range fractions, unknown
// architectures, no hosts or no profiles.
void validate(const GeneratorSpec& spec);

// 2,000 tasks on 900 hosts over 7 days.
GeneratorSpec default_preset(std::uint64_t seed = 1);
// Same fleet, one day of samples.
GeneratorSpec short_preset(std::uint64_t seed = 1);
// 40 tasks on 24 hosts, one day.
GeneratorSpec tiny_preset(std::uint64_t seed = 1);
// "default", "short" or "tiny".
GeneratorSpec preset(const std::string& name, std::uint64_t seed = 1);

nlohmann::json spec_to_json(const GeneratorSpec& spec);
GeneratorSpec spec_from_json(const nlohmann::json& j);

// Per-task model behind the trace. usage(minute) =
//   requested * mean * (1 + amplitude * sin(2 pi minute / 1440 + phase)) * (1 + noise * e)
// with e uniform in [-1, 1], clamped to the request.
struct TaskModel {
  std::string task_id;
  std::string profile;  // utilization profile name, "tail" for the tail share
  ResourceVector requested;
  ResourceVector mean;        // mean usage
  ResourceVector target_p99;  // generator-side p99 estimate
  double phase = 0.0;
  std::uint64_t stream = 0;  // per-task random stream id
};

struct Generated {
  Fleet fleet;  // no p99 yet; assignment is first fit by requested limits
  std::vector<TaskModel> models;
};

// Throws Error(kUnsatisfiable) when the requested limits do not fit the fleet.
Generated generate(const GeneratorSpec& spec);

// Minute samples of one task over spec.days.
std::vector<telemetry::UsageSample> minute_trace(const GeneratorSpec& spec, const TaskModel& model);

// Per-second samples: each minute value times (1 + jitter * e), e uniform in
// [-1, 1]. Spans `seconds` from spec.start.
std::vector<telemetry::UsageSample> second_trace(const GeneratorSpec& spec, const TaskModel& model,
                                                 std::int64_t seconds);

// Minute samples of every task, grouped by task id.
std::vector<telemetry::UsageSample> full_trace(const Generated& generated, const GeneratorSpec& spec);

// Writes fleet.json and trace.csv into `dir`, streaming the trace task by task.
void write_files(const Generated& generated, const GeneratorSpec& spec, const std::string& dir);

struct Blobs {
  std::vector<clustering::FeatureRow> rows;
  std::vector<int> labels;                   // true blob per row
  std::vector<clustering::Point> centers;    // true blob means
  double sigma = 1.0;
};

// k isotropic Gaussian blobs, n rows dealt round robin, centers at least 6
// sigma apart.
Blobs blobs(int k, int n, std::uint64_t seed);

}  // namespace colopack::synth
