#include "colopack/sensitivity.hpp"

#include <algorithm>
#include <cmath>

#include "colopack/error.hpp"

namespace colopack::sensitivity {

using nlohmann::json;

namespace {

void require_normalizable(const ArchSpec& a) {
  const ResourceVector& c = a.capacity;
  if (!(a.score > 0) || !(c.cpu_cores > 0) || !(c.membw_gbps > 0) || !(c.netbw_gbps > 0)) {
    throw Error(ErrorCode::kInvalidValue,
                "architecture '" + a.name + "' has a zero score, core count or bandwidth");
  }
}

const ArchSpec& find_arch(std::span<const ArchSpec> archs, std::string_view name) {
  auto it = std::find_if(archs.begin(), archs.end(), [&](const ArchSpec& a) { return a.name == name; });
  if (it == archs.end()) {
    throw Error(ErrorCode::kDanglingReference, "unknown architecture '" + std::string(name) + "'");
  }
  return *it;
}

}  // namespace

Scores normalize(const SensitivityProfile& profile, const ArchSpec& target, const ArchSpec& base) {
  if (profile.base_arch != base.name) {
    throw Error(ErrorCode::kInvalidValue, "profile measured on '" + profile.base_arch +
                                              "' normalized with base '" + base.name + "'");
  }
  require_normalizable(base);
  require_normalizable(target);
  if (target.name == base.name) return {profile.cpu, profile.membw, profile.netbw};
  return {
      profile.cpu * base.score / target.score,
      profile.membw * base.membw_per_core() / target.membw_per_core(),
      profile.netbw * base.netbw_per_core() / target.netbw_per_core(),
  };
}

SensitivityProfile rebase(const SensitivityProfile& profile, const ArchSpec& target,
                          const ArchSpec& base) {
  Scores s = normalize(profile, target, base);
  return {target.name, s.cpu, s.membw, s.netbw};
}

// ---------------------------------------------------------------------------
// Candidate profiles

std::vector<CandidateProfile> profiles_from_json(const json& j) {
  try {
    std::vector<CandidateProfile> out;
    for (const json& e : j) {
      CandidateProfile c;
      c.service = e.at("service").get<std::string>();
      c.cluster_label = e.at("cluster_label").get<std::string>();
      c.profile = sensitivity_profile_from_json(e);
      c.base_inferred = e.value("base_inferred", false);
      for (double x : {c.profile.cpu, c.profile.membw, c.profile.netbw}) {
        if (!std::isfinite(x) || x < 0) {
          throw Error(ErrorCode::kInvalidValue, "profile '" + c.service + "' has a negative score");
        }
      }
      out.push_back(std::move(c));
    }
    return out;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("profile document: ") + e.what());
  }
}

json profiles_to_json(std::span<const CandidateProfile> profiles) {
  json out = json::array();
  for (const CandidateProfile& c : profiles) {
    json e = to_json(c.profile);
    e["service"] = c.service;
    e["cluster_label"] = c.cluster_label;
    e["base_inferred"] = c.base_inferred;
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<CandidateProfile> load_profiles(const std::string& path) {
  return profiles_from_json(read_json_file(path));
}

std::string default_profiles_path() { return std::string(COLOPACK_DATA_DIR) + "/profiles.json"; }

SensitivityProfile merge_max(const SensitivityProfile& a, const SensitivityProfile& b,
                             std::span<const ArchSpec> archs) {
  const ArchSpec& base_a = find_arch(archs, a.base_arch);
  const ArchSpec& base_b = find_arch(archs, b.base_arch);
  Scores bb = normalize(b, base_a, base_b);
  return {a.base_arch, std::max(a.cpu, bb.cpu), std::max(a.membw, bb.membw),
          std::max(a.netbw, bb.netbw)};
}

std::map<std::string, SensitivityProfile> profiles_by_cluster(
    std::span<const CandidateProfile> candidates, std::span<const ArchSpec> archs) {
  std::map<std::string, SensitivityProfile> out;
  for (const CandidateProfile& c : candidates) {
    find_arch(archs, c.profile.base_arch);
    auto [it, inserted] = out.emplace(c.cluster_label, c.profile);
    if (!inserted) it->second = merge_max(it->second, c.profile, archs);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Table

SensitivityTable::SensitivityTable(std::vector<std::string> task_ids,
                                   std::vector<std::string> arch_names, std::vector<Scores> entries)
    : task_ids_(std::move(task_ids)), arch_names_(std::move(arch_names)), entries_(std::move(entries)) {
  if (entries_.size() != task_ids_.size() * arch_names_.size()) {
    throw Error(ErrorCode::kInvalidValue, "sensitivity table is not tasks x architectures");
  }
  for (std::size_t i = 0; i < task_ids_.size(); ++i) {
    if (!task_lookup_.emplace(task_ids_[i], i).second) {
      throw Error(ErrorCode::kDuplicateId, "duplicate task '" + task_ids_[i] + "' in sensitivity table");
    }
  }
  for (std::size_t i = 0; i < arch_names_.size(); ++i) {
    if (!arch_lookup_.emplace(arch_names_[i], i).second) {
      throw Error(ErrorCode::kDuplicateId,
                  "duplicate architecture '" + arch_names_[i] + "' in sensitivity table");
    }
  }
}

std::optional<std::size_t> SensitivityTable::task_index(std::string_view task_id) const {
  auto it = task_lookup_.find(std::string(task_id));
  if (it == task_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> SensitivityTable::arch_index(std::string_view arch) const {
  auto it = arch_lookup_.find(std::string(arch));
  if (it == arch_lookup_.end()) return std::nullopt;
  return it->second;
}

const Scores& SensitivityTable::at(std::string_view task_id, std::string_view arch) const {
  auto t = task_index(task_id);
  auto a = arch_index(arch);
  if (!t || !a) {
    throw Error(ErrorCode::kMissingEntry, "no sensitivity entry for task '" + std::string(task_id) +
                                              "' on '" + std::string(arch) + "'");
  }
  return at(*t, *a);
}

SensitivityTable build_table(std::span<const TaskProfile> tasks, std::span<const ArchSpec> archs) {
  std::vector<const TaskProfile*> ordered;
  for (const TaskProfile& t : tasks) ordered.push_back(&t);
  std::sort(ordered.begin(), ordered.end(),
            [](const TaskProfile* a, const TaskProfile* b) { return a->id < b->id; });

  std::vector<std::string> task_ids;
  std::vector<std::string> arch_names;
  std::vector<Scores> entries;
  for (const ArchSpec& a : archs) arch_names.push_back(a.name);
  entries.reserve(ordered.size() * archs.size());
  for (const TaskProfile* t : ordered) {
    if (!t->base_sensitivity) {
      throw Error(ErrorCode::kMissingProfile, "task '" + t->id + "' has no sensitivity profile");
    }
    const ArchSpec& base = find_arch(archs, t->base_sensitivity->base_arch);
    for (const ArchSpec& a : archs) entries.push_back(normalize(*t->base_sensitivity, a, base));
    task_ids.push_back(t->id);
  }
  return SensitivityTable(std::move(task_ids), std::move(arch_names), std::move(entries));
}

Scores host_sensitivity_load(const Fleet& fleet, const Assignment& assignment,
                             std::string_view host_id, const SensitivityTable& table) {
  const std::string& arch = fleet.host(host_id).arch;
  Scores load;
  for (const auto& [task, host] : assignment) {
    if (host == host_id) load += table.at(task, arch);
  }
  return load;
}

json table_to_json(const SensitivityTable& table, bool rounded) {
  auto r = [rounded](double v) { return rounded ? std::round(v * 100.0) / 100.0 : v; };
  json rows = json::object();
  for (std::size_t t = 0; t < table.task_ids().size(); ++t) {
    json row = json::object();
    for (std::size_t a = 0; a < table.arch_names().size(); ++a) {
      const Scores& s = table.at(t, a);
      row[table.arch_names()[a]] = {{"cpu", r(s.cpu)}, {"membw", r(s.membw)}, {"netbw", r(s.netbw)}};
    }
    rows[table.task_ids()[t]] = std::move(row);
  }
  return json{{"architectures", table.arch_names()}, {"rounded", rounded}, {"entries", std::move(rows)}};
}

SensitivityTable table_from_json(const json& j) {
  try {
    auto arch_names = j.at("architectures").get<std::vector<std::string>>();
    std::vector<std::string> task_ids;
    std::vector<Scores> entries;
    for (const auto& [task, row] : j.at("entries").items()) {
      task_ids.push_back(task);
      for (const std::string& a : arch_names) {
        const json& e = row.at(a);
        entries.push_back({e.at("cpu").get<double>(), e.at("membw").get<double>(),
                           e.at("netbw").get<double>()});
      }
    }
    return SensitivityTable(std::move(task_ids), std::move(arch_names), std::move(entries));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("sensitivity table document: ") + e.what());
  }
}

}  // namespace colopack::sensitivity
