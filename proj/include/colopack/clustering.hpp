#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "colopack/fleet.hpp"

namespace colopack::clustering {

// (cpu_cores, memory_gb, netbw_gbps) at the task's percentile limit.
using Point = std::array<double, 3>;

struct FeatureRow {
  std::string task_id;
  Point features{};

  friend bool operator==(const FeatureRow&, const FeatureRow&) = default;
};

// Per-dimension z-score parameters. A zero spread is stored as 1.
struct Standardization {
  Point mean{0.0, 0.0, 0.0};
  Point stddev{1.0, 1.0, 1.0};

  Point apply(const Point& p) const;
  Point invert(const Point& p) const;
};

struct StandardizedRows {
  std::vector<FeatureRow> rows;
  Standardization stats;
};

StandardizedRows standardize(std::span<const FeatureRow> raw);

// Feature rows from task p99 limits; throws Error(kMissingEntry) when a task
// has no p99.
std::vector<FeatureRow> feature_rows(std::span<const TaskProfile> tasks);

struct ClusterModel {
  int k = 0;
  // Ordered by ascending coordinate sum, so cluster 0 is the lightest.
  std::vector<Point> centroids;
  std::vector<std::string> names;     // "low"/"medium"/"high" when k == 3
  std::vector<int> row_labels;        // aligned with the input rows
  std::map<std::string, int> labels;  // task id -> cluster index
  double wcss = 0.0;
  std::uint64_t seed = 0;
};

inline constexpr int kMaxIterations = 300;
inline constexpr double kShiftTolerance = 1e-9;
inline constexpr int kDefaultRestarts = 10;
inline constexpr int kDefaultK = 3;

// Lloyd's algorithm from k-means++ seeding; the lowest-WCSS model over
// `restarts` seeded runs is kept. Throws Error(kInvalidValue) unless
// 1 <= k <= rows.size().
ClusterModel kmeans(std::span<const FeatureRow> rows, int k, std::uint64_t seed,
                    int restarts = kDefaultRestarts);

// Sum of squared distances of each row to its own centroid.
double recompute_wcss(std::span<const FeatureRow> rows, const ClusterModel& model);

using CurvePoint = std::pair<int, double>;  // (k, wcss)

std::vector<CurvePoint> wcss_curve(std::span<const FeatureRow> rows, int k_max, std::uint64_t seed);

// Interior k farthest from the chord joining the first and last curve
// points; ties go to the smaller k. Needs at least three points.
int pick_elbow(std::span<const CurvePoint> curve);

// Every task inherits the profile of its cluster's name. Throws
// Error(kMissingProfile) for a populated cluster without a profile.
std::map<std::string, SensitivityProfile> attach_profiles(
    const ClusterModel& model, const std::map<std::string, SensitivityProfile>& profiles);

// One clustering group (an umbrella server type, or the whole fleet).
struct GroupReport {
  std::string group;
  StandardizedRows input;
  ClusterModel model;
};

struct Characterization {
  std::vector<GroupReport> groups;
  std::map<std::string, std::string> task_cluster;  // task id -> cluster name
};

// Clusters tasks by p99 features, separately per server type of each task's
// current host unless `joint`. Groups smaller than k use k = group size.
Characterization characterize(const Fleet& fleet, int k, std::uint64_t seed, bool joint);

// Centroids in original units, per-cluster counts and task labels.
nlohmann::json characterization_to_json(const Characterization& c);
std::map<std::string, std::string> task_clusters_from_json(const nlohmann::json& j);

}  // namespace colopack::clustering
