#include "colopack/telemetry.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "colopack/error.hpp"

namespace colopack::telemetry {

using nlohmann::json;

std::int64_t minute_bucket(std::int64_t timestamp) {
  std::int64_t r = timestamp % kMinuteSeconds;
  if (r < 0) r += kMinuteSeconds;
  return timestamp - r;
}

namespace {

// Input offsets of each task's samples, tasks ordered by id.
std::map<std::string, std::vector<std::size_t>> group_by_task(
    std::span<const UsageSample> samples, bool require_order) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto& offsets = groups[samples[i].task_id];
    if (require_order && !offsets.empty() &&
        samples[offsets.back()].timestamp > samples[i].timestamp) {
      throw Error(ErrorCode::kOutOfOrder, "task '" + samples[i].task_id +
                                              "' timestamp goes backwards at offset " +
                                              std::to_string(i));
    }
    offsets.push_back(i);
  }
  return groups;
}

}  // namespace

std::vector<UsageSample> aggregate_minutes(std::span<const UsageSample> samples) {
  std::vector<UsageSample> out;
  for (const auto& [task_id, offsets] : group_by_task(samples, true)) {
    std::size_t i = 0;
    while (i < offsets.size()) {
      const std::int64_t bucket = minute_bucket(samples[offsets[i]].timestamp);
      ResourceVector sum;
      std::size_t n = 0;
      for (; i < offsets.size() && minute_bucket(samples[offsets[i]].timestamp) == bucket; ++i) {
        sum += samples[offsets[i]].usage;
        ++n;
      }
      out.push_back({task_id, bucket, sum * (1.0 / static_cast<double>(n))});
    }
  }
  return out;
}

double percentile(std::span<const double> values, int p) {
  if (values.empty()) throw Error(ErrorCode::kEmptyInput, "percentile of an empty series");
  if (p < 1 || p > 100) {
    throw Error(ErrorCode::kInvalidValue, "percentile must be in [1, 100], got " + std::to_string(p));
  }
  const std::size_t n = values.size();
  const std::size_t rank = (static_cast<std::size_t>(p) * n + 99) / 100;  // ceil(p*n/100)
  std::vector<double> sorted(values.begin(), values.end());
  auto nth = sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1);
  std::nth_element(sorted.begin(), nth, sorted.end());
  return *nth;
}

ResourceVector percentile_vector(std::span<const ResourceVector> series, int p) {
  std::vector<double> column(series.size());
  auto pick = [&](double ResourceVector::*field) {
    for (std::size_t i = 0; i < series.size(); ++i) column[i] = series[i].*field;
    return percentile(column, p);
  };
  return {pick(&ResourceVector::cpu_cores), pick(&ResourceVector::memory_gb),
          pick(&ResourceVector::membw_gbps), pick(&ResourceVector::netbw_gbps)};
}

unsigned worker_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("COLOPACK_THREADS")) {
    unsigned cap = 0;
    auto [ptr, ec] = std::from_chars(env, env + std::char_traits<char>::length(env), cap);
    if (ec == std::errc() && cap > 0) n = std::min(n, cap);
  }
  return n;
}

LimitsResult compute_limits(std::span<const UsageSample> trace, int p,
                            std::int64_t window_seconds) {
  if (p < 1 || p > 100) {
    throw Error(ErrorCode::kInvalidValue, "percentile must be in [1, 100], got " + std::to_string(p));
  }
  if (window_seconds <= 0) throw Error(ErrorCode::kInvalidValue, "window must be positive");

  LimitsResult result;
  if (trace.empty()) return result;

  std::int64_t end = trace.front().timestamp;
  for (const UsageSample& s : trace) end = std::max(end, s.timestamp);
  const std::int64_t start = end - window_seconds;  // window is (start, end]

  auto groups = group_by_task(trace, false);
  std::vector<const std::pair<const std::string, std::vector<std::size_t>>*> work;
  for (const auto& g : groups) work.push_back(&g);

  std::vector<std::optional<PercentileLimits>> computed(work.size());
  auto run = [&](std::size_t begin, std::size_t stride) {
    std::vector<ResourceVector> series;
    for (std::size_t w = begin; w < work.size(); w += stride) {
      series.clear();
      for (std::size_t off : work[w]->second) {
        if (trace[off].timestamp > start) series.push_back(trace[off].usage);
      }
      if (series.empty()) continue;
      computed[w] = PercentileLimits{work[w]->first, p, percentile_vector(series, p), series.size()};
    }
  };

  const unsigned workers = std::min<std::size_t>(worker_count(), std::max<std::size_t>(1, work.size()));
  if (workers <= 1) {
    run(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(run, t, workers);
  }

  for (std::size_t w = 0; w < work.size(); ++w) {
    if (computed[w]) {
      result.limits.emplace(work[w]->first, std::move(*computed[w]));
    } else {
      result.warnings.push_back("task '" + work[w]->first + "' has no samples in the window");
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

double parse_double(std::string_view field, std::size_t line) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw Error(ErrorCode::kParse, "trace line " + std::to_string(line) + ": bad number '" +
                                       std::string(field) + "'");
  }
  return v;
}

std::int64_t parse_int(std::string_view field, std::size_t line) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw Error(ErrorCode::kParse, "trace line " + std::to_string(line) + ": bad timestamp '" +
                                       std::string(field) + "'");
  }
  return v;
}

}  // namespace

std::vector<UsageSample> read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kParse, path + ": empty trace file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceHeader) {
    throw Error(ErrorCode::kParse, path + ": unexpected header '" + line + "'");
  }

  std::vector<UsageSample> out;
  std::size_t lineno = 1;
  std::vector<std::string_view> fields;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    fields.clear();
    std::string_view rest(line);
    while (true) {
      auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 6) {
      throw Error(ErrorCode::kParse, path + ": line " + std::to_string(lineno) +
                                         " has " + std::to_string(fields.size()) +
                                         " fields, expected 6");
    }
    UsageSample s;
    s.task_id = std::string(fields[0]);
    s.timestamp = parse_int(fields[1], lineno);
    s.usage = {parse_double(fields[2], lineno), parse_double(fields[3], lineno),
               parse_double(fields[4], lineno), parse_double(fields[5], lineno)};
    if (!is_valid(s.usage)) {
      throw Error(ErrorCode::kInvalidValue,
                  path + ": line " + std::to_string(lineno) + " has negative usage");
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::string format_trace_row(const UsageSample& s) {
  auto num = [](double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
  };
  return s.task_id + ',' + std::to_string(s.timestamp) + ',' + num(s.usage.cpu_cores) + ',' +
         num(s.usage.memory_gb) + ',' + num(s.usage.membw_gbps) + ',' + num(s.usage.netbw_gbps);
}

void write_trace_csv(std::span<const UsageSample> samples, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path + "'");
  out << kTraceHeader << '\n';
  for (const UsageSample& s : samples) out << format_trace_row(s) << '\n';
}

json limits_to_json(const LimitsResult& result, int p, std::int64_t window_seconds) {
  json limits = json::object();
  for (const auto& [task, l] : result.limits) {
    json entry = to_json(l.limits);
    entry["sample_count"] = l.sample_count;
    limits[task] = std::move(entry);
  }
  return json{{"percentile", p},
              {"window_seconds", window_seconds},
              {"limits", std::move(limits)},
              {"warnings", result.warnings}};
}

LimitsResult limits_from_json(const json& j) {
  try {
    LimitsResult r;
    const int p = j.at("percentile").get<int>();
    for (const auto& [task, entry] : j.at("limits").items()) {
      r.limits.emplace(task, PercentileLimits{task, p, resource_vector_from_json(entry),
                                              entry.at("sample_count").get<std::size_t>()});
    }
    if (j.contains("warnings")) r.warnings = j["warnings"].get<std::vector<std::string>>();
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("percentile document: ") + e.what());
  }
}

}  // namespace colopack::telemetry
