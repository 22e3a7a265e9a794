#include "colopack/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "colopack/error.hpp"

namespace colopack::clustering {

using nlohmann::json;

Point Standardization::apply(const Point& p) const {
  Point out;
  for (int d = 0; d < 3; ++d) out[d] = (p[d] - mean[d]) / stddev[d];
  return out;
}

Point Standardization::invert(const Point& p) const {
  Point out;
  for (int d = 0; d < 3; ++d) out[d] = p[d] * stddev[d] + mean[d];
  return out;
}

StandardizedRows standardize(std::span<const FeatureRow> raw) {
  StandardizedRows out;
  if (raw.empty()) return out;
  const double n = static_cast<double>(raw.size());
  for (int d = 0; d < 3; ++d) {
    double sum = 0;
    for (const FeatureRow& r : raw) sum += r.features[d];
    const double mean = sum / n;
    double ss = 0;
    for (const FeatureRow& r : raw) ss += (r.features[d] - mean) * (r.features[d] - mean);
    const double sd = std::sqrt(ss / n);
    out.stats.mean[d] = mean;
    out.stats.stddev[d] = sd > 0 ? sd : 1.0;
  }
  out.rows.reserve(raw.size());
  for (const FeatureRow& r : raw) out.rows.push_back({r.task_id, out.stats.apply(r.features)});
  return out;
}

std::vector<FeatureRow> feature_rows(std::span<const TaskProfile> tasks) {
  std::vector<FeatureRow> rows;
  rows.reserve(tasks.size());
  for (const TaskProfile& t : tasks) {
    if (!t.p99) throw Error(ErrorCode::kMissingEntry, "task '" + t.id + "' has no p99 limits");
    rows.push_back({t.id, {t.p99->cpu_cores, t.p99->memory_gb, t.p99->netbw_gbps}});
  }
  return rows;
}

namespace {

double dist2(const Point& a, const Point& b) {
  double s = 0;
  for (int d = 0; d < 3; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
  return s;
}

int nearest(const Point& p, const std::vector<Point>& centroids) {
  int best = 0;
  double best_d = dist2(p, centroids[0]);
  for (int c = 1; c < static_cast<int>(centroids.size()); ++c) {
    const double d = dist2(p, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

double uniform01(std::mt19937_64& rng) {
  return std::generate_canonical<double, 53>(rng);
}

std::vector<Point> plus_plus_seeds(std::span<const FeatureRow> rows, int k, std::mt19937_64& rng) {
  const std::size_t n = rows.size();
  std::vector<Point> centroids;
  std::vector<bool> chosen(n, false);
  std::size_t first = std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
  centroids.push_back(rows[first].features);
  chosen[first] = true;

  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = dist2(rows[i].features, centroids[0]);

  while (static_cast<int>(centroids.size()) < k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = n;
    if (total > 0) {
      const double target = uniform01(rng) * total;
      double acc = 0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (d2[i] > 0 && acc >= target) {
          pick = i;
          break;
        }
      }
      if (pick == n) {  // rounding at the tail
        for (std::size_t i = n; i-- > 0;) {
          if (d2[i] > 0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        if (!chosen[i]) {
          pick = i;
          break;
        }
      }
    }
    chosen[pick] = true;
    centroids.push_back(rows[pick].features);
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], dist2(rows[i].features, centroids.back()));
    }
  }
  return centroids;
}

struct LloydResult {
  std::vector<Point> centroids;
  std::vector<int> labels;
  double wcss = 0;
};

LloydResult lloyd(std::span<const FeatureRow> rows, std::vector<Point> centroids) {
  const std::size_t n = rows.size();
  const int k = static_cast<int>(centroids.size());
  std::vector<int> labels(n, 0);

  for (int iter = 0; iter < kMaxIterations; ++iter) {
    for (std::size_t i = 0; i < n; ++i) labels[i] = nearest(rows[i].features, centroids);

    // Repair empty clusters by moving their centroid onto the point farthest
    // from its own centroid (taken from a cluster with more than one member).
    std::vector<int> counts(k, 0);
    for (int l : labels) ++counts[l];
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      std::size_t far = n;
      double far_d = -1;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[labels[i]] <= 1) continue;
        const double d = dist2(rows[i].features, centroids[labels[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far == n) break;
      --counts[labels[far]];
      labels[far] = c;
      counts[c] = 1;
      centroids[c] = rows[far].features;
    }

    std::vector<Point> next(k, Point{0, 0, 0});
    for (std::size_t i = 0; i < n; ++i) {
      for (int d = 0; d < 3; ++d) next[labels[i]][d] += rows[i].features[d];
    }
    double shift = 0;
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        next[c] = centroids[c];
        continue;
      }
      for (int d = 0; d < 3; ++d) next[c][d] /= counts[c];
      shift = std::max(shift, std::sqrt(dist2(next[c], centroids[c])));
    }
    centroids = std::move(next);
    if (shift < kShiftTolerance) break;
  }

  LloydResult r{std::move(centroids), std::move(labels), 0.0};
  for (std::size_t i = 0; i < n; ++i) r.wcss += dist2(rows[i].features, r.centroids[r.labels[i]]);
  return r;
}

std::vector<std::string> magnitude_names(int k) {
  if (k == 3) return {"low", "medium", "high"};
  std::vector<std::string> names;
  for (int i = 0; i < k; ++i) names.push_back("cluster" + std::to_string(i));
  return names;
}

}  // namespace

ClusterModel kmeans(std::span<const FeatureRow> rows, int k, std::uint64_t seed, int restarts) {
  if (k < 1) throw Error(ErrorCode::kInvalidValue, "k must be at least 1");
  if (static_cast<std::size_t>(k) > rows.size()) {
    throw Error(ErrorCode::kInvalidValue, "k = " + std::to_string(k) + " exceeds " +
                                              std::to_string(rows.size()) + " rows");
  }
  restarts = std::max(1, restarts);

  LloydResult best;
  bool have_best = false;
  for (int r = 0; r < restarts; ++r) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(r)};
    std::mt19937_64 rng(seq);
    LloydResult run = lloyd(rows, plus_plus_seeds(rows, k, rng));
    if (!have_best || run.wcss < best.wcss) {
      best = std::move(run);
      have_best = true;
    }
  }

  // Canonical order: ascending coordinate sum, ties by coordinates.
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const Point& pa = best.centroids[a];
    const Point& pb = best.centroids[b];
    const double sa = pa[0] + pa[1] + pa[2];
    const double sb = pb[0] + pb[1] + pb[2];
    if (sa != sb) return sa < sb;
    return pa < pb;
  });
  std::vector<int> rank(k);
  for (int i = 0; i < k; ++i) rank[order[i]] = i;

  ClusterModel model;
  model.k = k;
  model.seed = seed;
  model.names = magnitude_names(k);
  for (int i = 0; i < k; ++i) model.centroids.push_back(best.centroids[order[i]]);
  model.row_labels.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    model.row_labels[i] = rank[best.labels[i]];
    model.labels[rows[i].task_id] = model.row_labels[i];
  }
  model.wcss = best.wcss;
  return model;
}

double recompute_wcss(std::span<const FeatureRow> rows, const ClusterModel& model) {
  double s = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    s += dist2(rows[i].features, model.centroids[model.row_labels[i]]);
  }
  return s;
}

std::vector<CurvePoint> wcss_curve(std::span<const FeatureRow> rows, int k_max, std::uint64_t seed) {
  if (k_max < 1) throw Error(ErrorCode::kInvalidValue, "k_max must be at least 1");
  std::vector<CurvePoint> curve;
  for (int k = 1; k <= k_max; ++k) curve.emplace_back(k, kmeans(rows, k, seed).wcss);
  return curve;
}

int pick_elbow(std::span<const CurvePoint> curve) {
  if (curve.size() < 3) throw Error(ErrorCode::kInvalidValue, "elbow needs at least three points");
  const double x0 = curve.front().first;
  const double y0 = curve.front().second;
  const double x1 = curve.back().first;
  const double y1 = curve.back().second;
  const double dx = x1 - x0;
  const double dy = y1 - y0;
  const double len = std::hypot(dx, dy);
  if (len == 0) return curve[1].first;

  double scale = 0;
  for (const CurvePoint& p : curve) scale = std::max(scale, std::abs(p.second));
  const double tie = 1e-12 * std::max(1.0, scale);

  int best_k = curve[1].first;
  double best = -1;
  for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
    const double d = std::abs(dy * (curve[i].first - x0) - dx * (curve[i].second - y0)) / len;
    if (d > best + tie) {
      best = d;
      best_k = curve[i].first;
    }
  }
  return best_k;
}

std::map<std::string, SensitivityProfile> attach_profiles(
    const ClusterModel& model, const std::map<std::string, SensitivityProfile>& profiles) {
  std::map<std::string, SensitivityProfile> out;
  for (const auto& [task, label] : model.labels) {
    const std::string& name = model.names.at(label);
    auto it = profiles.find(name);
    if (it == profiles.end()) {
      throw Error(ErrorCode::kMissingProfile, "cluster '" + name + "' has no sensitivity profile");
    }
    out.emplace(task, it->second);
  }
  return out;
}

Characterization characterize(const Fleet& fleet, int k, std::uint64_t seed, bool joint) {
  std::map<std::string, std::vector<TaskProfile>> groups;
  for (const TaskProfile& t : fleet.tasks()) {
    const std::string group =
        joint ? "all"
              : std::string(server_type_name(fleet.arch_of_host(fleet.assignment().at(t.id)).server_type));
    groups[group].push_back(t);
  }

  Characterization out;
  for (auto& [group, tasks] : groups) {
    GroupReport report;
    report.group = group;
    report.input = standardize(feature_rows(tasks));
    const int group_k = std::min<int>(k, static_cast<int>(tasks.size()));
    report.model = kmeans(report.input.rows, group_k, seed);
    for (const auto& [task, label] : report.model.labels) {
      out.task_cluster[task] = report.model.names[label];
    }
    out.groups.push_back(std::move(report));
  }
  return out;
}

json characterization_to_json(const Characterization& c) {
  json groups = json::array();
  for (const GroupReport& g : c.groups) {
    json clusters = json::array();
    std::vector<int> counts(g.model.k, 0);
    for (int l : g.model.row_labels) ++counts[l];
    for (int i = 0; i < g.model.k; ++i) {
      const Point centroid = g.input.stats.invert(g.model.centroids[i]);
      clusters.push_back({{"name", g.model.names[i]},
                          {"count", counts[i]},
                          {"centroid", {{"cpu_cores", centroid[0]},
                                        {"memory_gb", centroid[1]},
                                        {"netbw_gbps", centroid[2]}}}});
    }
    groups.push_back({{"group", g.group},
                      {"k", g.model.k},
                      {"seed", g.model.seed},
                      {"wcss", g.model.wcss},
                      {"clusters", std::move(clusters)}});
  }
  json labels = json::object();
  for (const auto& [task, name] : c.task_cluster) labels[task] = name;
  return json{{"groups", std::move(groups)}, {"labels", std::move(labels)}};
}

std::map<std::string, std::string> task_clusters_from_json(const json& j) {
  try {
    return j.at("labels").get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("cluster document: ") + e.what());
  }
}

}  // namespace colopack::clustering
