#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace colopack {

// Capacities, limits and usage share one shape. Units: cores, GiB, GB/s, Gb/s.
struct ResourceVector {
  double cpu_cores = 0.0;
  double memory_gb = 0.0;
  double membw_gbps = 0.0;
  double netbw_gbps = 0.0;

  ResourceVector& operator+=(const ResourceVector& other);
  ResourceVector& operator-=(const ResourceVector& other);
  friend ResourceVector operator+(ResourceVector a, const ResourceVector& b) { return a += b; }
  friend ResourceVector operator-(ResourceVector a, const ResourceVector& b) { return a -= b; }
  friend bool operator==(const ResourceVector&, const ResourceVector&) = default;
};

ResourceVector operator*(const ResourceVector& v, double factor);

// Finite and non-negative in every component.
bool is_valid(const ResourceVector& v);

enum class ServerType { kTypeI, kTypeII };

std::string_view server_type_name(ServerType type);
ServerType parse_server_type(std::string_view name);

// Relative TCO unit used when a fleet file does not set cost_weight. These
// are configuration defaults, not measured costs.
inline constexpr double kDefaultCostTypeI = 1.0;
inline constexpr double kDefaultCostTypeII = 2.5;

double default_cost_weight(ServerType type);

struct ArchSpec {
  std::string name;
  ServerType server_type = ServerType::kTypeI;
  ResourceVector capacity;
  double score = 1.0;  // relative throughput, Broadwell18 == 1
  double cost_weight = kDefaultCostTypeI;

  double membw_per_core() const { return capacity.membw_gbps / capacity.cpu_cores; }
  double netbw_per_core() const { return capacity.netbw_gbps / capacity.cpu_cores; }

  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

// The six production architectures with their published capacities and
// throughput scores, in table order.
std::vector<ArchSpec> builtin_architectures();

struct Host {
  std::string id;
  std::string arch;

  friend bool operator==(const Host&, const Host&) = default;
};

// Fraction of each shared dimension that must stay available to a task,
// measured on `base_arch`. 1.0 means the whole dimension.
struct SensitivityProfile {
  std::string base_arch;
  double cpu = 0.0;
  double membw = 0.0;
  double netbw = 0.0;

  friend bool operator==(const SensitivityProfile&, const SensitivityProfile&) = default;
};

struct TaskProfile {
  std::string id;
  std::string job_id;
  ResourceVector requested;
  std::optional<ResourceVector> p99;
  std::optional<std::string> cluster;
  std::optional<SensitivityProfile> base_sensitivity;

  friend bool operator==(const TaskProfile&, const TaskProfile&) = default;
};

// task id -> host id. Ordered so every walk over it is deterministic.
using Assignment = std::map<std::string, std::string>;

// Cross-referenced, validated fleet. Hosts and tasks are kept sorted by id;
// architectures keep their input order.
class Fleet {
 public:
  Fleet() = default;

  // Throws Error on duplicate ids, dangling references, invalid capacities
  // or a non-total assignment.
  Fleet(std::vector<ArchSpec> architectures, std::vector<Host> hosts,
        std::vector<TaskProfile> tasks, Assignment assignment);

  const std::vector<ArchSpec>& architectures() const { return architectures_; }
  const std::vector<Host>& hosts() const { return hosts_; }
  const std::vector<TaskProfile>& tasks() const { return tasks_; }
  const Assignment& assignment() const { return assignment_; }

  const ArchSpec& arch(std::string_view name) const;
  const ArchSpec& arch_of_host(std::string_view host_id) const;
  const Host& host(std::string_view id) const;
  const TaskProfile& task(std::string_view id) const;

  std::optional<std::size_t> arch_index(std::string_view name) const;
  std::optional<std::size_t> host_index(std::string_view id) const;
  std::optional<std::size_t> task_index(std::string_view id) const;

  // Copies with replaced parts, re-validated.
  Fleet with_tasks(std::vector<TaskProfile> tasks) const;
  Fleet with_assignment(Assignment assignment) const;

  friend bool operator==(const Fleet& a, const Fleet& b) {
    return a.architectures_ == b.architectures_ && a.hosts_ == b.hosts_ &&
           a.tasks_ == b.tasks_ && a.assignment_ == b.assignment_;
  }

 private:
  void index_and_validate();

  std::vector<ArchSpec> architectures_;
  std::vector<Host> hosts_;
  std::vector<TaskProfile> tasks_;
  Assignment assignment_;

  std::unordered_map<std::string, std::size_t> arch_by_name_;
  std::unordered_map<std::string, std::size_t> host_by_id_;
  std::unordered_map<std::string, std::size_t> task_by_id_;
};

// Validates that `assignment` maps every task of `fleet` to a known host.
void check_assignment(const Fleet& fleet, const Assignment& assignment);

// Hosts with at least one task under `assignment`.
std::map<std::string, std::vector<std::string>> tasks_by_host(const Assignment& assignment);

nlohmann::json to_json(const ResourceVector& v);
ResourceVector resource_vector_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SensitivityProfile& p);
SensitivityProfile sensitivity_profile_from_json(const nlohmann::json& j);

nlohmann::json fleet_to_json(const Fleet& fleet);
Fleet fleet_from_json(const nlohmann::json& j);

Fleet load_fleet(const std::string& path);
void save_fleet(const Fleet& fleet, const std::string& path);

// Shared file helpers; throw Error(kIo/kParse).
nlohmann::json read_json_file(const std::string& path);
void write_json_file(const nlohmann::json& j, const std::string& path);
void write_text_file(const std::string& text, const std::string& path);

}  // namespace colopack
