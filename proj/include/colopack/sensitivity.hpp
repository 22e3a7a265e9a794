#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "colopack/fleet.hpp"

namespace colopack::sensitivity {

// Per-dimension scores on one architecture.
struct Scores {
  double cpu = 0.0;
  double membw = 0.0;
  double netbw = 0.0;

  Scores& operator+=(const Scores& o) {
    cpu += o.cpu;
    membw += o.membw;
    netbw += o.netbw;
    return *this;
  }
  friend Scores operator+(Scores a, const Scores& b) { return a += b; }
  friend bool operator==(const Scores&, const Scores&) = default;
};

// Rescales a profile measured on `base` onto `target`:
//   cpu   by base.score / target.score
//   membw by base membw-per-core / target membw-per-core
//   netbw by base netbw-per-core / target netbw-per-core
// Throws Error(kInvalidValue) when `base` is not the profile's base arch or an
// architecture has a zero score, core count or bandwidth.
Scores normalize(const SensitivityProfile& profile, const ArchSpec& target, const ArchSpec& base);

// Same as normalize() but returns a profile whose base is `target`.
SensitivityProfile rebase(const SensitivityProfile& profile, const ArchSpec& target,
                          const ArchSpec& base);

// A measured candidate service and the workload cluster it represents.
struct CandidateProfile {
  std::string service;
  std::string cluster_label;
  SensitivityProfile profile;
  bool base_inferred = false;  // base architecture is our inference

  friend bool operator==(const CandidateProfile&, const CandidateProfile&) = default;
};

std::vector<CandidateProfile> profiles_from_json(const nlohmann::json& j);
nlohmann::json profiles_to_json(std::span<const CandidateProfile> profiles);
std::vector<CandidateProfile> load_profiles(const std::string& path);

// Location of the shipped candidate-profile data asset.
std::string default_profiles_path();

// Component-wise maximum of two profiles, taken on `a`'s base architecture.
SensitivityProfile merge_max(const SensitivityProfile& a, const SensitivityProfile& b,
                             std::span<const ArchSpec> archs);

// One profile per cluster label; labels with several candidates are merged
// with merge_max in input order.
std::map<std::string, SensitivityProfile> profiles_by_cluster(
    std::span<const CandidateProfile> candidates, std::span<const ArchSpec> archs);

// Dense (task, architecture) -> Scores lookup.
class SensitivityTable {
 public:
  SensitivityTable() = default;
  SensitivityTable(std::vector<std::string> task_ids, std::vector<std::string> arch_names,
                   std::vector<Scores> entries);

  const std::vector<std::string>& task_ids() const { return task_ids_; }
  const std::vector<std::string>& arch_names() const { return arch_names_; }
  bool empty() const { return task_ids_.empty(); }

  // Throws Error(kMissingEntry) for unknown pairs.
  const Scores& at(std::string_view task_id, std::string_view arch) const;
  const Scores& at(std::size_t task_idx, std::size_t arch_idx) const {
    return entries_[task_idx * arch_names_.size() + arch_idx];
  }

  std::optional<std::size_t> task_index(std::string_view task_id) const;
  std::optional<std::size_t> arch_index(std::string_view arch) const;

  friend bool operator==(const SensitivityTable& a, const SensitivityTable& b) {
    return a.task_ids_ == b.task_ids_ && a.arch_names_ == b.arch_names_ && a.entries_ == b.entries_;
  }

 private:
  std::vector<std::string> task_ids_;
  std::vector<std::string> arch_names_;
  std::vector<Scores> entries_;  // row-major, task then arch
  std::unordered_map<std::string, std::size_t> task_lookup_;
  std::unordered_map<std::string, std::size_t> arch_lookup_;
};

// Every task must carry base_sensitivity; throws Error(kMissingProfile)
// otherwise. Rows follow task id order.
SensitivityTable build_table(std::span<const TaskProfile> tasks, std::span<const ArchSpec> archs);

// Sum of the table scores of the tasks assigned to `host_id`, on the host's
// architecture.
Scores host_sensitivity_load(const Fleet& fleet, const Assignment& assignment,
                             std::string_view host_id, const SensitivityTable& table);

// Full-precision document; `rounded` adds a 2-decimal view for reports.
nlohmann::json table_to_json(const SensitivityTable& table, bool rounded = false);
SensitivityTable table_from_json(const nlohmann::json& j);

}  // namespace colopack::sensitivity
