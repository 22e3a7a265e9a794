#include "colopack/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "colopack/error.hpp"

namespace colopack::synth {

using nlohmann::json;
using telemetry::UsageSample;

namespace {

constexpr double kMinFraction = 0.02;
constexpr double kMaxFraction = 0.95;
constexpr double kMembwPerCore = 1.5;   // GB/s requested per core
constexpr double kNetbwPerCore = 0.25;  // Gb/s requested per core

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(salt)};
  return std::mt19937_64(seq);
}

double uniform(std::mt19937_64& rng) { return std::generate_canonical<double, 53>(rng); }

// Symmetric draw in [-1, 1].
double symmetric(std::mt19937_64& rng) { return 2.0 * uniform(rng) - 1.0; }

// Box-Muller keeps draws identical across standard libraries.
double gaussian(std::mt19937_64& rng) {
  const double u1 = std::max(uniform(rng), 1e-300);
  const double u2 = uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double draw_fraction(std::mt19937_64& rng, const Spread& s) {
  return std::clamp(s.mean + s.stddev * gaussian(rng), kMinFraction, kMaxFraction);
}

void check_spread(const Spread& s, const std::string& what) {
  if (!(s.mean >= 0 && s.mean <= 1 && s.stddev >= 0 && std::isfinite(s.stddev))) {
    throw Error(ErrorCode::kInvalidValue, what + ": mean must be in [0,1] and stddev >= 0");
  }
}

void check_profile(const UtilizationProfile& p) {
  if (!(p.weight >= 0) || !std::isfinite(p.weight)) {
    throw Error(ErrorCode::kInvalidValue, "profile '" + p.name + "': weight must be >= 0");
  }
  check_spread(p.cpu, "profile '" + p.name + "' cpu");
  check_spread(p.mem, "profile '" + p.name + "' mem");
  check_spread(p.netbw, "profile '" + p.name + "' netbw");
}

bool in_unit(double x) { return x >= 0 && x <= 1; }

}  // namespace

void validate(const GeneratorSpec& spec) {
  if (!in_unit(spec.diurnal_amplitude)) throw Error(ErrorCode::kInvalidValue, "diurnal_amplitude must be in [0,1]");
  if (!in_unit(spec.tail_fraction)) throw Error(ErrorCode::kInvalidValue, "tail_fraction must be in [0,1]");
  if (!(spec.noise >= 0 && spec.noise < 1)) throw Error(ErrorCode::kInvalidValue, "noise must be in [0,1)");
  if (!(spec.jitter >= 0 && spec.jitter < 1)) throw Error(ErrorCode::kInvalidValue, "jitter must be in [0,1)");
  if (spec.n_tasks < 0) throw Error(ErrorCode::kInvalidValue, "n_tasks must be >= 0");
  if (spec.days < 1) throw Error(ErrorCode::kInvalidValue, "days must be >= 1");
  if (spec.start % telemetry::kMinuteSeconds != 0) {
    throw Error(ErrorCode::kInvalidValue, "start must be minute aligned");
  }
  int hosts = 0;
  const auto archs = builtin_architectures();
  for (const auto& [arch, n] : spec.hosts_per_arch) {
    if (std::none_of(archs.begin(), archs.end(), [&](const ArchSpec& a) { return a.name == arch; })) {
      throw Error(ErrorCode::kInvalidValue, "unknown architecture '" + arch + "'");
    }
    if (n < 0) throw Error(ErrorCode::kInvalidValue, "host count for '" + arch + "' must be >= 0");
    hosts += n;
  }
  if (hosts == 0) throw Error(ErrorCode::kInvalidValue, "generator needs at least one host");
  if (spec.profiles.empty()) throw Error(ErrorCode::kInvalidValue, "generator needs a utilization profile");
  double weight = 0;
  for (const UtilizationProfile& p : spec.profiles) {
    check_profile(p);
    weight += p.weight;
  }
  if (weight <= 0) throw Error(ErrorCode::kInvalidValue, "profile weights sum to zero");
  check_profile(spec.tail);
}

GeneratorSpec default_preset(std::uint64_t seed) {
  GeneratorSpec s;
  s.seed = seed;
  s.hosts_per_arch = {{"Haswell10", 200}, {"Haswell12", 100}, {"Skylake14", 200},
                      {"Skylake16", 100}, {"Broadwell18", 200}, {"Broadwell20", 100}};
  s.n_tasks = 2000;
  s.profiles = {
      {"batch", 0.5, {0.18, 0.05}, {0.35, 0.08}, {0.15, 0.05}},
      {"serving", 0.3, {0.25, 0.04}, {0.50, 0.08}, {0.45, 0.08}},
      {"storage", 0.2, {0.20, 0.04}, {0.60, 0.10}, {0.80, 0.08}},
  };
  s.tail = {"tail", 1.0, {0.70, 0.10}, {0.70, 0.10}, {0.50, 0.10}};
  s.tail_fraction = 0.05;
  s.diurnal_amplitude = 0.3;
  s.noise = 0.05;
  s.jitter = 0.005;
  s.days = 7;
  return s;
}

GeneratorSpec short_preset(std::uint64_t seed) {
  GeneratorSpec s = default_preset(seed);
  s.days = 1;
  return s;
}

GeneratorSpec tiny_preset(std::uint64_t seed) {
  GeneratorSpec s = default_preset(seed);
  s.hosts_per_arch = {{"Haswell10", 4}, {"Haswell12", 4}, {"Skylake14", 4},
                      {"Skylake16", 4}, {"Broadwell18", 4}, {"Broadwell20", 4}};
  s.n_tasks = 40;
  s.days = 1;
  return s;
}

GeneratorSpec preset(const std::string& name, std::uint64_t seed) {
  if (name == "default") return default_preset(seed);
  if (name == "short") return short_preset(seed);
  if (name == "tiny") return tiny_preset(seed);
  throw Error(ErrorCode::kUsage, "unknown preset '" + name + "' (expected default|short|tiny)");
}

namespace {

json spread_json(const Spread& s) { return json{{"mean", s.mean}, {"stddev", s.stddev}}; }

Spread spread_from(const json& j) { return {j.at("mean").get<double>(), j.at("stddev").get<double>()}; }

json profile_json(const UtilizationProfile& p) {
  return json{{"name", p.name},
              {"weight", p.weight},
              {"cpu", spread_json(p.cpu)},
              {"mem", spread_json(p.mem)},
              {"netbw", spread_json(p.netbw)}};
}

UtilizationProfile profile_from(const json& j) {
  return {j.at("name").get<std::string>(), j.value("weight", 1.0), spread_from(j.at("cpu")),
          spread_from(j.at("mem")), spread_from(j.at("netbw"))};
}

}  // namespace

json spec_to_json(const GeneratorSpec& s) {
  json profiles = json::array();
  for (const auto& p : s.profiles) profiles.push_back(profile_json(p));
  return json{{"seed", s.seed},
              {"hosts_per_arch", s.hosts_per_arch},
              {"n_tasks", s.n_tasks},
              {"profiles", std::move(profiles)},
              {"tail", profile_json(s.tail)},
              {"tail_fraction", s.tail_fraction},
              {"diurnal_amplitude", s.diurnal_amplitude},
              {"noise", s.noise},
              {"jitter", s.jitter},
              {"days", s.days},
              {"start", s.start}};
}

GeneratorSpec spec_from_json(const json& j) {
  try {
    GeneratorSpec s = default_preset(j.value("seed", std::uint64_t{1}));
    if (j.contains("hosts_per_arch")) s.hosts_per_arch = j["hosts_per_arch"].get<std::map<std::string, int>>();
    s.n_tasks = j.value("n_tasks", s.n_tasks);
    if (j.contains("profiles")) {
      s.profiles.clear();
      for (const json& p : j["profiles"]) s.profiles.push_back(profile_from(p));
    }
    if (j.contains("tail")) s.tail = profile_from(j["tail"]);
    s.tail_fraction = j.value("tail_fraction", s.tail_fraction);
    s.diurnal_amplitude = j.value("diurnal_amplitude", s.diurnal_amplitude);
    s.noise = j.value("noise", s.noise);
    s.jitter = j.value("jitter", s.jitter);
    s.days = j.value("days", s.days);
    s.start = j.value("start", s.start);
    validate(s);
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("generator spec: ") + e.what());
  }
}

namespace {

std::string padded(const char* prefix, std::size_t i, std::size_t n) {
  std::string digits = std::to_string(i);
  const std::size_t width = std::max<std::size_t>(4, std::to_string(n).size());
  return prefix + std::string(width - std::min(width, digits.size()), '0') + digits;
}

ResourceVector draw_request(std::mt19937_64& rng) {
  static constexpr double kCores[] = {2, 4, 8, 16};
  static constexpr double kWeights[] = {0.30, 0.35, 0.25, 0.10};
  double u = uniform(rng);
  double cores = kCores[3];
  for (int i = 0; i < 4; ++i) {
    if (u < kWeights[i]) {
      cores = kCores[i];
      break;
    }
    u -= kWeights[i];
  }
  // GiB per core, log-normal around 2.
  const double ratio = std::clamp(2.0 * std::exp(0.5 * gaussian(rng)), 0.5, 8.0);
  const double mem = std::round(cores * ratio * 4.0) / 4.0;
  return {cores, mem, cores * kMembwPerCore, cores * kNetbwPerCore};
}

}  // namespace

Generated generate(const GeneratorSpec& spec) {
  validate(spec);
  const auto archs = builtin_architectures();

  // Host ids are dealt over a shuffled arch sequence so first fit sees a mix.
  std::vector<std::string> host_archs;
  for (const ArchSpec& a : archs) {
    auto it = spec.hosts_per_arch.find(a.name);
    if (it != spec.hosts_per_arch.end()) host_archs.insert(host_archs.end(), it->second, a.name);
  }
  std::mt19937_64 rng = make_rng(spec.seed, 0, 0);
  for (std::size_t i = host_archs.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform(rng) * static_cast<double>(i));
    std::swap(host_archs[i - 1], host_archs[std::min(j, i - 1)]);
  }
  std::vector<Host> hosts;
  for (std::size_t i = 0; i < host_archs.size(); ++i) {
    hosts.push_back({padded("h", i, host_archs.size()), host_archs[i]});
  }

  double total_weight = 0;
  for (const auto& p : spec.profiles) total_weight += p.weight;

  const double peak = (1.0 + spec.diurnal_amplitude) * (1.0 + spec.noise);
  Generated out;
  std::vector<TaskProfile> tasks;
  const auto n = static_cast<std::size_t>(spec.n_tasks);
  for (std::size_t i = 0; i < n; ++i) {
    TaskModel m;
    m.task_id = padded("t", i, n);
    m.stream = i + 1;
    m.requested = draw_request(rng);

    const UtilizationProfile* profile = &spec.tail;
    if (uniform(rng) >= spec.tail_fraction) {
      double u = uniform(rng) * total_weight;
      profile = &spec.profiles.back();
      for (const auto& p : spec.profiles) {
        if (u < p.weight) {
          profile = &p;
          break;
        }
        u -= p.weight;
      }
    }
    m.profile = profile->name;
    const double cpu = draw_fraction(rng, profile->cpu);
    const double mem = draw_fraction(rng, profile->mem);
    const double net = draw_fraction(rng, profile->netbw);
    m.target_p99 = {m.requested.cpu_cores * cpu, m.requested.memory_gb * mem,
                    m.requested.membw_gbps * cpu, m.requested.netbw_gbps * net};
    m.mean = m.target_p99 * (1.0 / peak);
    m.phase = 2.0 * std::numbers::pi * uniform(rng);

    TaskProfile t;
    t.id = m.task_id;
    t.job_id = "job-" + m.profile + "-" + std::to_string(i / 10);
    t.requested = m.requested;
    tasks.push_back(std::move(t));
    out.models.push_back(std::move(m));
  }

  // First fit by requested limits, hosts in id order.
  std::vector<double> cpu(hosts.size(), 0.0), mem(hosts.size(), 0.0);
  Assignment assignment;
  auto arch_of = [&](const std::string& name) -> const ArchSpec& {
    return *std::find_if(archs.begin(), archs.end(), [&](const ArchSpec& a) { return a.name == name; });
  };
  for (const TaskProfile& t : tasks) {
    bool placed = false;
    for (std::size_t h = 0; h < hosts.size(); ++h) {
      const ResourceVector& cap = arch_of(hosts[h].arch).capacity;
      if (cpu[h] + t.requested.cpu_cores <= cap.cpu_cores &&
          mem[h] + t.requested.memory_gb <= cap.memory_gb) {
        cpu[h] += t.requested.cpu_cores;
        mem[h] += t.requested.memory_gb;
        assignment.emplace(t.id, hosts[h].id);
        placed = true;
        break;
      }
    }
    if (!placed) {
      throw Error(ErrorCode::kUnsatisfiable,
                  "fleet capacity is insufficient for the requested limits (task '" + t.id + "')");
    }
  }
  out.fleet = Fleet(archs, std::move(hosts), std::move(tasks), std::move(assignment));
  return out;
}

namespace {

// Minute usage values shared by the minute and second traces.
std::vector<ResourceVector> minute_values(const GeneratorSpec& spec, const TaskModel& m) {
  const std::int64_t minutes = static_cast<std::int64_t>(spec.days) * 1440;
  std::mt19937_64 rng = make_rng(spec.seed, m.stream, 1);
  std::vector<ResourceVector> out;
  out.reserve(static_cast<std::size_t>(minutes));
  for (std::int64_t i = 0; i < minutes; ++i) {
    const double diurnal =
        1.0 + spec.diurnal_amplitude *
                  std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / 1440.0 + m.phase);
    auto value = [&](double mean, double cap) {
      return std::min(cap, mean * diurnal * (1.0 + spec.noise * symmetric(rng)));
    };
    const double c = value(m.mean.cpu_cores, m.requested.cpu_cores);
    const double g = value(m.mean.memory_gb, m.requested.memory_gb);
    const double b = value(m.mean.membw_gbps, m.requested.membw_gbps);
    const double n = value(m.mean.netbw_gbps, m.requested.netbw_gbps);
    out.push_back({c, g, b, n});
  }
  return out;
}

}  // namespace

std::vector<UsageSample> minute_trace(const GeneratorSpec& spec, const TaskModel& model) {
  std::vector<UsageSample> out;
  const auto values = minute_values(spec, model);
  out.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out.push_back({model.task_id, spec.start + static_cast<std::int64_t>(i) * telemetry::kMinuteSeconds,
                   values[i]});
  }
  return out;
}

std::vector<UsageSample> second_trace(const GeneratorSpec& spec, const TaskModel& model,
                                      std::int64_t seconds) {
  const auto values = minute_values(spec, model);
  const std::int64_t limit =
      std::min<std::int64_t>(seconds, static_cast<std::int64_t>(values.size()) * telemetry::kMinuteSeconds);
  std::mt19937_64 rng = make_rng(spec.seed, model.stream, 2);
  std::vector<UsageSample> out;
  out.reserve(static_cast<std::size_t>(std::max<std::int64_t>(0, limit)));
  for (std::int64_t s = 0; s < limit; ++s) {
    const ResourceVector& v = values[static_cast<std::size_t>(s / telemetry::kMinuteSeconds)];
    ResourceVector u;
    u.cpu_cores = v.cpu_cores * (1.0 + spec.jitter * symmetric(rng));
    u.memory_gb = v.memory_gb * (1.0 + spec.jitter * symmetric(rng));
    u.membw_gbps = v.membw_gbps * (1.0 + spec.jitter * symmetric(rng));
    u.netbw_gbps = v.netbw_gbps * (1.0 + spec.jitter * symmetric(rng));
    out.push_back({model.task_id, spec.start + s, u});
  }
  return out;
}

std::vector<UsageSample> full_trace(const Generated& generated, const GeneratorSpec& spec) {
  std::vector<UsageSample> out;
  for (const TaskModel& m : generated.models) {
    auto t = minute_trace(spec, m);
    out.insert(out.end(), std::make_move_iterator(t.begin()), std::make_move_iterator(t.end()));
  }
  return out;
}

void write_files(const Generated& generated, const GeneratorSpec& spec, const std::string& dir) {
  std::filesystem::create_directories(dir);
  save_fleet(generated.fleet, (std::filesystem::path(dir) / "fleet.json").string());
  const std::string path = (std::filesystem::path(dir) / "trace.csv").string();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path + "'");
  out << telemetry::kTraceHeader << '\n';
  for (const TaskModel& m : generated.models) {
    for (const UsageSample& s : minute_trace(spec, m)) out << telemetry::format_trace_row(s) << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path + "'");
}

Blobs blobs(int k, int n, std::uint64_t seed) {
  if (k < 1 || n < k) throw Error(ErrorCode::kInvalidValue, "blobs need k >= 1 and n >= k");
  Blobs out;
  out.sigma = 1.0;
  for (int c = 0; c < k; ++c) {
    // Neighbouring centers sit 10 sigma apart along a bent line.
    out.centers.push_back({10.0 * c, 4.0 * (c % 2), 2.0 * (c % 3)});
  }
  std::mt19937_64 rng = make_rng(seed, 0, 3);
  for (int i = 0; i < n; ++i) {
    const int c = i % k;
    clustering::Point p = out.centers[static_cast<std::size_t>(c)];
    for (double& x : p) x += out.sigma * gaussian(rng);
    out.rows.push_back({padded("b", static_cast<std::size_t>(i), static_cast<std::size_t>(n)), p});
    out.labels.push_back(c);
  }
  return out;
}

}  // namespace colopack::synth
