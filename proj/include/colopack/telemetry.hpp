#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "colopack/fleet.hpp"

namespace colopack::telemetry {

inline constexpr std::int64_t kMinuteSeconds = 60;
inline constexpr std::int64_t kDaySeconds = 86'400;
inline constexpr std::int64_t kDefaultWindowSeconds = 7 * kDaySeconds;

struct UsageSample {
  std::string task_id;
  std::int64_t timestamp = 0;  // seconds since epoch
  ResourceVector usage;

  friend bool operator==(const UsageSample&, const UsageSample&) = default;
};

struct PercentileLimits {
  std::string task_id;
  int percentile = 99;
  ResourceVector limits;
  std::size_t sample_count = 0;

  friend bool operator==(const PercentileLimits&, const PercentileLimits&) = default;
};

struct LimitsResult {
  std::map<std::string, PercentileLimits> limits;
  // One line per task dropped because it had no samples in the window.
  std::vector<std::string> warnings;
};

// Start of the epoch-aligned minute bucket holding `timestamp`.
std::int64_t minute_bucket(std::int64_t timestamp);

// One mean sample per (task, minute bucket), grouped by task id and then in
// bucket order. Throws Error(kOutOfOrder) naming the task and input offset
// when a task's timestamps go backwards.
std::vector<UsageSample> aggregate_minutes(std::span<const UsageSample> samples);

// Nearest-rank percentile: the element at 1-based rank ceil(p/100 * n) of
// the sorted values.
double percentile(std::span<const double> values, int p);

// Per-dimension nearest-rank percentile over a single task's series.
ResourceVector percentile_vector(std::span<const ResourceVector> series, int p);

// Percentile limits per task over the trailing `window_seconds` ending at the
// largest timestamp in `trace`.
LimitsResult compute_limits(std::span<const UsageSample> trace, int p,
                            std::int64_t window_seconds = kDefaultWindowSeconds);

// Worker count from COLOPACK_THREADS (default: hardware concurrency, min 1).
unsigned worker_count();

// CSV trace: header task_id,timestamp,cpu_cores,memory_gb,membw_gbps,netbw_gbps
inline constexpr const char* kTraceHeader =
    "task_id,timestamp,cpu_cores,memory_gb,membw_gbps,netbw_gbps";

std::vector<UsageSample> read_trace_csv(const std::string& path);
std::string format_trace_row(const UsageSample& sample);
void write_trace_csv(std::span<const UsageSample> samples, const std::string& path);

nlohmann::json limits_to_json(const LimitsResult& result, int p, std::int64_t window_seconds);
LimitsResult limits_from_json(const nlohmann::json& j);

}  // namespace colopack::telemetry
