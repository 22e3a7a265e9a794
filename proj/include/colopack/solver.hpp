#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "colopack/fleet.hpp"
#include "colopack/sensitivity.hpp"

namespace colopack::solver {

// Which limits count against host capacity (one row per packing experiment).
enum class LimitMode { kOriginal, kP99Cpu, kP99Mem, kP99, kP99Sens };

// CLI spelling: baseline, p99cpu, p99mem, p99, p99sens.
std::string_view mode_name(LimitMode mode);
LimitMode parse_mode(std::string_view name);

struct Weights {
  double hosts = 1.0;
  double cost = 1.0;
  double frag = 0.1;
  double sens = 0.0;

  friend bool operator==(const Weights&, const Weights&) = default;
};

inline constexpr int kDefaultMaxMoves = 400;

struct SolverConfig {
  LimitMode mode = LimitMode::kP99;
  Weights weights;
  int max_moves = kDefaultMaxMoves;
  std::uint64_t seed = 0;

  friend bool operator==(const SolverConfig&, const SolverConfig&) = default;
};

// Documented weight presets: (hosts 1, cost 1, frag 0.1, sens 0), with
// sens = 10 for kP99Sens.
SolverConfig preset(LimitMode mode);

// Throws Error(kInvalidValue) for negative weights, all-zero weights or a
// negative move budget, and Error(kMissingProfile) when the mode or weights
// need a sensitivity table that is absent.
void validate(const SolverConfig& config, const sensitivity::SensitivityTable* table);

struct Relocate {
  std::string task;
  std::string from;
  std::string to;
  friend bool operator==(const Relocate&, const Relocate&) = default;
};

struct Swap {
  std::string task_a;
  std::string task_b;
  friend bool operator==(const Swap&, const Swap&) = default;
};

using Move = std::variant<Relocate, Swap>;

// Applies moves in order; throws Error(kInvalidValue) if a move does not
// match the current assignment.
Assignment replay(Assignment assignment, std::span<const Move> moves);

struct ArchStats {
  int occupied_before = 0;
  int occupied_after = 0;
  int freed = 0;
  int newly_occupied = 0;
  friend bool operator==(const ArchStats&, const ArchStats&) = default;
};

struct SolveResult {
  Assignment initial;
  Assignment final;
  // Relocations that made the start feasible under the chosen limits.
  std::vector<Move> repairs;
  std::vector<Move> moves_applied;
  // Moves per accepted step; a host evacuation is one step of several moves.
  std::vector<int> step_moves;
  double initial_objective = 0.0;
  // Objective after each accepted step.
  std::vector<double> objective_trace;
  std::map<std::string, ArchStats> stats;

  friend bool operator==(const SolveResult&, const SolveResult&) = default;
};

// Requested limits with p99 substituted per mode. Only cpu_cores and
// memory_gb are ever substituted. Throws Error(kMissingEntry) when the mode
// needs a p99 the task lacks.
ResourceVector effective_limits(const TaskProfile& task, LimitMode mode);

// True iff the tasks on `host_id` plus `incoming` fit in the host's cores and
// memory under `mode`. Tasks already on the host are counted once.
bool feasible(const Fleet& fleet, const Assignment& assignment, std::string_view host_id,
              std::span<const std::string> incoming, LimitMode mode);

// Feasibility of every occupied host.
bool all_feasible(const Fleet& fleet, const Assignment& assignment, LimitMode mode);

struct ObjectiveTerms {
  int hosts_occupied = 0;
  double cost = 0.0;           // sum of occupied cost weights
  double fragmentation = 0.0;  // cpu and memory, each over fleet capacity
  double interference = 0.0;
  double total = 0.0;
};

ObjectiveTerms objective_terms(const Fleet& fleet, const Assignment& assignment,
                               const SolverConfig& config,
                               const sensitivity::SensitivityTable* table);

double objective(const Fleet& fleet, const Assignment& assignment, const SolverConfig& config,
                 const sensitivity::SensitivityTable* table);

// Greedy first-improvement local search from the fleet's assignment.
SolveResult solve(const Fleet& fleet, const SolverConfig& config,
                  const sensitivity::SensitivityTable* table);

inline constexpr std::size_t kBruteForceMaxTasks = 8;
inline constexpr std::size_t kBruteForceMaxHosts = 4;

// Exhaustive minimum-objective feasible assignment; ties go to the
// lexicographically smallest host-index vector (tasks and hosts by id).
// Throws Error(kTooLarge) beyond 8 tasks or 4 hosts and Error(kUnsatisfiable)
// when no feasible assignment exists.
Assignment brute_force_optimal(const Fleet& fleet, const SolverConfig& config,
                               const sensitivity::SensitivityTable* table);

// Cold-start placement: tasks by decreasing limits onto the first host that
// fits, hosts ordered by (cost_weight desc, id).
Assignment first_fit_decreasing(const Fleet& fleet, LimitMode mode);

nlohmann::json config_to_json(const SolverConfig& config);
SolverConfig config_from_json(const nlohmann::json& j);

nlohmann::json move_to_json(const Move& move);
Move move_from_json(const nlohmann::json& j);
nlohmann::json result_to_json(const SolveResult& result);
SolveResult result_from_json(const nlohmann::json& j);

// Replayable move log: step,kind,task_a,task_b,from,to
std::string move_log_csv(const SolveResult& result);

}  // namespace colopack::solver
