#include "colopack/fleet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "colopack/error.hpp"

namespace colopack {

using nlohmann::json;

ResourceVector& ResourceVector::operator+=(const ResourceVector& other) {
  cpu_cores += other.cpu_cores;
  memory_gb += other.memory_gb;
  membw_gbps += other.membw_gbps;
  netbw_gbps += other.netbw_gbps;
  return *this;
}

ResourceVector& ResourceVector::operator-=(const ResourceVector& other) {
  cpu_cores -= other.cpu_cores;
  memory_gb -= other.memory_gb;
  membw_gbps -= other.membw_gbps;
  netbw_gbps -= other.netbw_gbps;
  return *this;
}

ResourceVector operator*(const ResourceVector& v, double factor) {
  return {v.cpu_cores * factor, v.memory_gb * factor, v.membw_gbps * factor,
          v.netbw_gbps * factor};
}

bool is_valid(const ResourceVector& v) {
  for (double x : {v.cpu_cores, v.memory_gb, v.membw_gbps, v.netbw_gbps}) {
    if (!std::isfinite(x) || x < 0.0) return false;
  }
  return true;
}

std::string_view server_type_name(ServerType type) {
  return type == ServerType::kTypeI ? "TypeI" : "TypeII";
}

ServerType parse_server_type(std::string_view name) {
  if (name == "TypeI") return ServerType::kTypeI;
  if (name == "TypeII") return ServerType::kTypeII;
  throw Error(ErrorCode::kParse, "unknown server_type '" + std::string(name) + "'");
}

double default_cost_weight(ServerType type) {
  return type == ServerType::kTypeI ? kDefaultCostTypeI : kDefaultCostTypeII;
}

std::vector<ArchSpec> builtin_architectures() {
  auto make = [](const char* name, ServerType type, double cores, double mem,
                 double membw, double netbw, double score) {
    return ArchSpec{name, type, {cores, mem, membw, netbw}, score, default_cost_weight(type)};
  };
  using enum ServerType;
  return {
      make("Haswell10", kTypeI, 48, 32, 75.6, 5, 1.63),
      make("Haswell12", kTypeII, 48, 256, 120, 5, 1.79),
      make("Skylake14", kTypeI, 36, 64, 76, 25, 1.29),
      make("Skylake16", kTypeII, 80, 256, 170, 12.5, 2.52),
      make("Broadwell18", kTypeI, 32, 32, 42, 25, 1.0),
      make("Broadwell20", kTypeII, 56, 256, 153, 12.5, 1.98),
  };
}

// ---------------------------------------------------------------------------
// Fleet

Fleet::Fleet(std::vector<ArchSpec> architectures, std::vector<Host> hosts,
             std::vector<TaskProfile> tasks, Assignment assignment)
    : architectures_(std::move(architectures)),
      hosts_(std::move(hosts)),
      tasks_(std::move(tasks)),
      assignment_(std::move(assignment)) {
  std::sort(hosts_.begin(), hosts_.end(),
            [](const Host& a, const Host& b) { return a.id < b.id; });
  std::sort(tasks_.begin(), tasks_.end(),
            [](const TaskProfile& a, const TaskProfile& b) { return a.id < b.id; });
  index_and_validate();
}

void Fleet::index_and_validate() {
  arch_by_name_.clear();
  host_by_id_.clear();
  task_by_id_.clear();

  for (std::size_t i = 0; i < architectures_.size(); ++i) {
    const ArchSpec& a = architectures_[i];
    if (!arch_by_name_.emplace(a.name, i).second) {
      throw Error(ErrorCode::kDuplicateId, "duplicate architecture '" + a.name + "'");
    }
    const ResourceVector& c = a.capacity;
    if (!is_valid(c) || c.cpu_cores <= 0 || c.memory_gb <= 0 || c.membw_gbps <= 0 ||
        c.netbw_gbps <= 0) {
      throw Error(ErrorCode::kInvalidValue,
                  "architecture '" + a.name + "' needs a strictly positive capacity");
    }
    if (!(a.score > 0) || !std::isfinite(a.score)) {
      throw Error(ErrorCode::kInvalidValue, "architecture '" + a.name + "' needs score > 0");
    }
    if (!(a.cost_weight > 0) || !std::isfinite(a.cost_weight)) {
      throw Error(ErrorCode::kInvalidValue,
                  "architecture '" + a.name + "' needs cost_weight > 0");
    }
  }

  for (std::size_t i = 0; i < hosts_.size(); ++i) {
    const Host& h = hosts_[i];
    if (!host_by_id_.emplace(h.id, i).second) {
      throw Error(ErrorCode::kDuplicateId, "duplicate host '" + h.id + "'");
    }
    if (!arch_by_name_.contains(h.arch)) {
      throw Error(ErrorCode::kDanglingReference,
                  "host '" + h.id + "' references unknown architecture '" + h.arch + "'");
    }
  }

  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    const TaskProfile& t = tasks_[i];
    if (!task_by_id_.emplace(t.id, i).second) {
      throw Error(ErrorCode::kDuplicateId, "duplicate task '" + t.id + "'");
    }
    if (!is_valid(t.requested)) {
      throw Error(ErrorCode::kInvalidValue, "task '" + t.id + "' has invalid requested limits");
    }
    if (t.p99 && !is_valid(*t.p99)) {
      throw Error(ErrorCode::kInvalidValue, "task '" + t.id + "' has invalid p99 limits");
    }
    if (t.base_sensitivity) {
      const SensitivityProfile& s = *t.base_sensitivity;
      if (!arch_by_name_.contains(s.base_arch)) {
        throw Error(ErrorCode::kDanglingReference, "task '" + t.id +
                                                       "' sensitivity references unknown "
                                                       "architecture '" +
                                                       s.base_arch + "'");
      }
      for (double x : {s.cpu, s.membw, s.netbw}) {
        if (!std::isfinite(x) || x < 0) {
          throw Error(ErrorCode::kInvalidValue,
                      "task '" + t.id + "' has an invalid sensitivity score");
        }
      }
    }
  }

  check_assignment(*this, assignment_);
}

const ArchSpec& Fleet::arch(std::string_view name) const {
  auto idx = arch_index(name);
  if (!idx) {
    throw Error(ErrorCode::kDanglingReference, "unknown architecture '" + std::string(name) + "'");
  }
  return architectures_[*idx];
}

const ArchSpec& Fleet::arch_of_host(std::string_view host_id) const {
  return arch(host(host_id).arch);
}

const Host& Fleet::host(std::string_view id) const {
  auto idx = host_index(id);
  if (!idx) throw Error(ErrorCode::kDanglingReference, "unknown host '" + std::string(id) + "'");
  return hosts_[*idx];
}

const TaskProfile& Fleet::task(std::string_view id) const {
  auto idx = task_index(id);
  if (!idx) throw Error(ErrorCode::kDanglingReference, "unknown task '" + std::string(id) + "'");
  return tasks_[*idx];
}

namespace {
std::optional<std::size_t> lookup(const std::unordered_map<std::string, std::size_t>& m,
                                  std::string_view key) {
  auto it = m.find(std::string(key));
  if (it == m.end()) return std::nullopt;
  return it->second;
}
}  // namespace

std::optional<std::size_t> Fleet::arch_index(std::string_view name) const {
  return lookup(arch_by_name_, name);
}
std::optional<std::size_t> Fleet::host_index(std::string_view id) const {
  return lookup(host_by_id_, id);
}
std::optional<std::size_t> Fleet::task_index(std::string_view id) const {
  return lookup(task_by_id_, id);
}

Fleet Fleet::with_tasks(std::vector<TaskProfile> tasks) const {
  return Fleet(architectures_, hosts_, std::move(tasks), assignment_);
}

Fleet Fleet::with_assignment(Assignment assignment) const {
  Fleet copy = *this;
  check_assignment(copy, assignment);
  copy.assignment_ = std::move(assignment);
  return copy;
}

void check_assignment(const Fleet& fleet, const Assignment& assignment) {
  for (const auto& [task_id, host_id] : assignment) {
    if (!fleet.task_index(task_id)) {
      throw Error(ErrorCode::kDanglingReference,
                  "assignment references unknown task '" + task_id + "'");
    }
    if (!fleet.host_index(host_id)) {
      throw Error(ErrorCode::kDanglingReference,
                  "task '" + task_id + "' assigned to unknown host '" + host_id + "'");
    }
  }
  for (const TaskProfile& t : fleet.tasks()) {
    if (!assignment.contains(t.id)) {
      throw Error(ErrorCode::kDanglingReference, "task '" + t.id + "' has no host");
    }
  }
}

std::map<std::string, std::vector<std::string>> tasks_by_host(const Assignment& assignment) {
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& [task, host] : assignment) out[host].push_back(task);
  return out;
}

// ---------------------------------------------------------------------------
// JSON

json to_json(const ResourceVector& v) {
  return json{{"cpu_cores", v.cpu_cores},
              {"memory_gb", v.memory_gb},
              {"membw_gbps", v.membw_gbps},
              {"netbw_gbps", v.netbw_gbps}};
}

ResourceVector resource_vector_from_json(const json& j) {
  ResourceVector v;
  v.cpu_cores = j.at("cpu_cores").get<double>();
  v.memory_gb = j.at("memory_gb").get<double>();
  v.membw_gbps = j.value("membw_gbps", 0.0);
  v.netbw_gbps = j.value("netbw_gbps", 0.0);
  return v;
}

json to_json(const SensitivityProfile& p) {
  return json{{"base_arch", p.base_arch}, {"cpu", p.cpu}, {"membw", p.membw}, {"netbw", p.netbw}};
}

SensitivityProfile sensitivity_profile_from_json(const json& j) {
  SensitivityProfile p;
  p.base_arch = j.at("base_arch").get<std::string>();
  p.cpu = j.at("cpu").get<double>();
  p.membw = j.at("membw").get<double>();
  p.netbw = j.at("netbw").get<double>();
  return p;
}

json fleet_to_json(const Fleet& fleet) {
  json archs = json::array();
  for (const ArchSpec& a : fleet.architectures()) {
    archs.push_back({{"name", a.name},
                     {"server_type", server_type_name(a.server_type)},
                     {"capacity", to_json(a.capacity)},
                     {"score", a.score},
                     {"cost_weight", a.cost_weight}});
  }
  json hosts = json::array();
  for (const Host& h : fleet.hosts()) hosts.push_back({{"id", h.id}, {"arch", h.arch}});
  json tasks = json::array();
  for (const TaskProfile& t : fleet.tasks()) {
    json jt{{"id", t.id}, {"job_id", t.job_id}, {"requested", to_json(t.requested)}};
    if (t.p99) jt["p99"] = to_json(*t.p99);
    if (t.cluster) jt["cluster"] = *t.cluster;
    if (t.base_sensitivity) jt["base_sensitivity"] = to_json(*t.base_sensitivity);
    tasks.push_back(std::move(jt));
  }
  json assignment = json::object();
  for (const auto& [task, host] : fleet.assignment()) assignment[task] = host;
  return json{{"architectures", std::move(archs)},
              {"hosts", std::move(hosts)},
              {"tasks", std::move(tasks)},
              {"assignment", std::move(assignment)}};
}

Fleet fleet_from_json(const json& j) {
  try {
    std::vector<ArchSpec> archs;
    for (const json& ja : j.at("architectures")) {
      ArchSpec a;
      a.name = ja.at("name").get<std::string>();
      a.server_type = parse_server_type(ja.at("server_type").get<std::string>());
      a.capacity = resource_vector_from_json(ja.at("capacity"));
      a.score = ja.at("score").get<double>();
      a.cost_weight = ja.value("cost_weight", default_cost_weight(a.server_type));
      archs.push_back(std::move(a));
    }
    std::vector<Host> hosts;
    for (const json& jh : j.at("hosts")) {
      hosts.push_back({jh.at("id").get<std::string>(), jh.at("arch").get<std::string>()});
    }
    std::vector<TaskProfile> tasks;
    for (const json& jt : j.at("tasks")) {
      TaskProfile t;
      t.id = jt.at("id").get<std::string>();
      t.job_id = jt.value("job_id", t.id);
      t.requested = resource_vector_from_json(jt.at("requested"));
      if (jt.contains("p99") && !jt["p99"].is_null()) t.p99 = resource_vector_from_json(jt["p99"]);
      if (jt.contains("cluster") && !jt["cluster"].is_null()) {
        t.cluster = jt["cluster"].get<std::string>();
      }
      if (jt.contains("base_sensitivity") && !jt["base_sensitivity"].is_null()) {
        t.base_sensitivity = sensitivity_profile_from_json(jt["base_sensitivity"]);
      }
      tasks.push_back(std::move(t));
    }
    Assignment assignment;
    if (j.contains("assignment")) {
      for (const auto& [task, host] : j["assignment"].items()) {
        assignment[task] = host.get<std::string>();
      }
    }
    return Fleet(std::move(archs), std::move(hosts), std::move(tasks), std::move(assignment));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("fleet document: ") + e.what());
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, path + ": " + e.what());
  }
}

void write_text_file(const std::string& text, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path + "'");
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path + "'");
}

void write_json_file(const json& j, const std::string& path) {
  write_text_file(j.dump(2) + "\n", path);
}

Fleet load_fleet(const std::string& path) { return fleet_from_json(read_json_file(path)); }

void save_fleet(const Fleet& fleet, const std::string& path) {
  write_json_file(fleet_to_json(fleet), path);
}

}  // namespace colopack
