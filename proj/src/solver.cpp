#include "colopack/solver.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "colopack/error.hpp"
#include "colopack/metrics.hpp"

namespace colopack::solver {

using nlohmann::json;
using sensitivity::Scores;
using sensitivity::SensitivityTable;

namespace {

// Strict improvement threshold for accepting a step.
constexpr double kImprovement = 1e-9;

bool fits(double load, double cap) { return load <= cap + 1e-9 * std::max(1.0, cap); }

double excess(const Scores& s) {
  return std::max(0.0, s.cpu - 1.0) + std::max(0.0, s.membw - 1.0) + std::max(0.0, s.netbw - 1.0);
}

Scores operator-(Scores a, const Scores& b) {
  a.cpu -= b.cpu;
  a.membw -= b.membw;
  a.netbw -= b.netbw;
  return a;
}

bool needs_table(const SolverConfig& config) {
  return config.mode == LimitMode::kP99Sens || config.weights.sens > 0;
}

}  // namespace

std::string_view mode_name(LimitMode mode) {
  switch (mode) {
    case LimitMode::kOriginal: return "baseline";
    case LimitMode::kP99Cpu: return "p99cpu";
    case LimitMode::kP99Mem: return "p99mem";
    case LimitMode::kP99: return "p99";
    case LimitMode::kP99Sens: return "p99sens";
  }
  return "baseline";
}

LimitMode parse_mode(std::string_view name) {
  for (LimitMode m : {LimitMode::kOriginal, LimitMode::kP99Cpu, LimitMode::kP99Mem, LimitMode::kP99,
                      LimitMode::kP99Sens}) {
    if (mode_name(m) == name) return m;
  }
  if (name == "original") return LimitMode::kOriginal;
  throw Error(ErrorCode::kUsage, "unknown mode '" + std::string(name) +
                                     "' (expected baseline|p99cpu|p99mem|p99|p99sens)");
}

SolverConfig preset(LimitMode mode) {
  SolverConfig c;
  c.mode = mode;
  c.weights = Weights{1.0, 1.0, 0.1, mode == LimitMode::kP99Sens ? 10.0 : 0.0};
  return c;
}

void validate(const SolverConfig& config, const SensitivityTable* table) {
  const Weights& w = config.weights;
  for (double x : {w.hosts, w.cost, w.frag, w.sens}) {
    if (!std::isfinite(x) || x < 0) throw Error(ErrorCode::kInvalidValue, "weights must be >= 0");
  }
  if (w.hosts == 0 && w.cost == 0 && w.frag == 0 && w.sens == 0) {
    throw Error(ErrorCode::kInvalidValue, "at least one weight must be positive");
  }
  if (config.max_moves < 0) throw Error(ErrorCode::kInvalidValue, "max_moves must be >= 0");
  if (needs_table(config) && (table == nullptr || table->empty())) {
    throw Error(ErrorCode::kMissingProfile,
                "mode " + std::string(mode_name(config.mode)) + " needs a sensitivity table");
  }
}

ResourceVector effective_limits(const TaskProfile& task, LimitMode mode) {
  if (mode == LimitMode::kOriginal) return task.requested;
  if (!task.p99) {
    throw Error(ErrorCode::kMissingEntry, "task '" + task.id + "' has no p99 limits for mode " +
                                              std::string(mode_name(mode)));
  }
  ResourceVector out = task.requested;
  if (mode != LimitMode::kP99Mem) out.cpu_cores = task.p99->cpu_cores;
  if (mode != LimitMode::kP99Cpu) out.memory_gb = task.p99->memory_gb;
  return out;
}

bool feasible(const Fleet& fleet, const Assignment& assignment, std::string_view host_id,
              std::span<const std::string> incoming, LimitMode mode) {
  const ArchSpec& arch = fleet.arch_of_host(host_id);
  std::set<std::string> members(incoming.begin(), incoming.end());
  for (const auto& [task, host] : assignment) {
    if (host == host_id) members.insert(task);
  }
  double cpu = 0;
  double mem = 0;
  for (const std::string& t : members) {
    const ResourceVector lim = effective_limits(fleet.task(t), mode);
    cpu += lim.cpu_cores;
    mem += lim.memory_gb;
  }
  return fits(cpu, arch.capacity.cpu_cores) && fits(mem, arch.capacity.memory_gb);
}

bool all_feasible(const Fleet& fleet, const Assignment& assignment, LimitMode mode) {
  for (const auto& [host, tasks] : tasks_by_host(assignment)) {
    if (!feasible(fleet, assignment, host, {}, mode)) return false;
  }
  return true;
}

ObjectiveTerms objective_terms(const Fleet& fleet, const Assignment& assignment,
                               const SolverConfig& config, const SensitivityTable* table) {
  if (config.weights.sens > 0 && (table == nullptr || table->empty())) {
    throw Error(ErrorCode::kMissingProfile, "sensitivity weight set without a sensitivity table");
  }
  ObjectiveTerms terms;
  double fleet_cpu = 0;
  double fleet_mem = 0;
  for (const Host& h : fleet.hosts()) {
    fleet_cpu += fleet.arch(h.arch).capacity.cpu_cores;
    fleet_mem += fleet.arch(h.arch).capacity.memory_gb;
  }
  for (const auto& [host, tasks] : tasks_by_host(assignment)) {
    ++terms.hosts_occupied;
    terms.cost += fleet.arch_of_host(host).cost_weight;
  }
  if (fleet_cpu > 0) {
    using metrics::Resource;
    terms.fragmentation =
        metrics::fragmentation(fleet, assignment, config.mode, Resource::kCpu).abs / fleet_cpu +
        metrics::fragmentation(fleet, assignment, config.mode, Resource::kMemory).abs / fleet_mem;
  }
  if (config.weights.sens > 0) terms.interference = metrics::interference(fleet, assignment, *table).excess;
  const Weights& w = config.weights;
  terms.total = w.hosts * terms.hosts_occupied + w.cost * terms.cost + w.frag * terms.fragmentation +
                w.sens * terms.interference;
  return terms;
}

double objective(const Fleet& fleet, const Assignment& assignment, const SolverConfig& config,
                 const SensitivityTable* table) {
  return objective_terms(fleet, assignment, config, table).total;
}

Assignment replay(Assignment assignment, std::span<const Move> moves) {
  for (const Move& move : moves) {
    if (const auto* r = std::get_if<Relocate>(&move)) {
      auto it = assignment.find(r->task);
      if (it == assignment.end() || it->second != r->from || r->from == r->to) {
        throw Error(ErrorCode::kInvalidValue, "move of '" + r->task + "' does not match the assignment");
      }
      it->second = r->to;
    } else {
      const Swap& s = std::get<Swap>(move);
      auto a = assignment.find(s.task_a);
      auto b = assignment.find(s.task_b);
      if (a == assignment.end() || b == assignment.end() || a->second == b->second) {
        throw Error(ErrorCode::kInvalidValue,
                    "swap of '" + s.task_a + "' and '" + s.task_b + "' does not match the assignment");
      }
      std::swap(a->second, b->second);
    }
  }
  return assignment;
}

// ---------------------------------------------------------------------------
// Incremental packing state over dense indices. Hosts and tasks are indexed in
// id order, so per-host sums follow the same order as the map-based metrics.

namespace {

class Packing {
 public:
  Packing(const Fleet& fleet, const SolverConfig& config, const SensitivityTable* table)
      : fleet_(fleet), weights_(config.weights), use_sens_(config.weights.sens > 0) {
    const auto& hosts = fleet.hosts();
    const auto& tasks = fleet.tasks();
    const auto& archs = fleet.architectures();
    n_ = tasks.size();
    m_ = hosts.size();
    arch_count_ = archs.size();

    for (const Host& h : hosts) {
      const ArchSpec& a = fleet.arch(h.arch);
      host_arch_.push_back(*fleet.arch_index(h.arch));
      cap_cpu_.push_back(a.capacity.cpu_cores);
      cap_mem_.push_back(a.capacity.memory_gb);
      cost_.push_back(a.cost_weight);
      fleet_cpu_ += a.capacity.cpu_cores;
      fleet_mem_ += a.capacity.memory_gb;
    }
    for (const TaskProfile& t : tasks) {
      const ResourceVector lim = effective_limits(t, config.mode);
      lim_cpu_.push_back(lim.cpu_cores);
      lim_mem_.push_back(lim.memory_gb);
    }
    if (use_sens_ || (table != nullptr && !table->empty() && config.mode == LimitMode::kP99Sens)) {
      sens_.resize(n_ * arch_count_);
      for (std::size_t t = 0; t < n_; ++t) {
        for (std::size_t a = 0; a < arch_count_; ++a) {
          sens_[t * arch_count_ + a] = table->at(tasks[t].id, archs[a].name);
        }
      }
    }

    assign_.resize(n_);
    members_.resize(m_);
    load_cpu_.assign(m_, 0.0);
    load_mem_.assign(m_, 0.0);
    host_sens_.assign(m_, Scores{});
    for (std::size_t t = 0; t < n_; ++t) {
      const std::size_t h = *fleet.host_index(fleet.assignment().at(tasks[t].id));
      assign_[t] = h;
      members_[h].push_back(t);
    }
    for (std::size_t h = 0; h < m_; ++h) refresh(h);
  }

  std::size_t tasks() const { return n_; }
  std::size_t hosts() const { return m_; }
  std::size_t host_of(std::size_t t) const { return assign_[t]; }
  std::size_t count(std::size_t h) const { return members_[h].size(); }
  const std::vector<std::size_t>& members(std::size_t h) const { return members_[h]; }
  double cost(std::size_t h) const { return cost_[h]; }

  const Scores& sens(std::size_t t, std::size_t h) const {
    return sens_[t * arch_count_ + host_arch_[h]];
  }

  bool host_fits(std::size_t h) const {
    return fits(load_cpu_[h], cap_cpu_[h]) && fits(load_mem_[h], cap_mem_[h]);
  }

  bool fits_with(std::size_t h, double cpu, double mem) const {
    return fits(load_cpu_[h] + cpu, cap_cpu_[h]) && fits(load_mem_[h] + mem, cap_mem_[h]);
  }

  bool can_take(std::size_t h, std::size_t t) const { return fits_with(h, lim_cpu_[t], lim_mem_[t]); }

  double lim_cpu(std::size_t t) const { return lim_cpu_[t]; }
  std::size_t arch(std::size_t h) const { return host_arch_[h]; }
  double cap_cpu(std::size_t h) const { return cap_cpu_[h]; }
  double cap_mem(std::size_t h) const { return cap_mem_[h]; }
  // Unused share of cores plus unused share of memory.
  double room(std::size_t h) const {
    return (cap_cpu_[h] - load_cpu_[h]) / cap_cpu_[h] + (cap_mem_[h] - load_mem_[h]) / cap_mem_[h];
  }
  double lim_mem(std::size_t t) const { return lim_mem_[t]; }

  // Objective cost of keeping host h occupied.
  double host_cost(std::size_t h) const {
    return weights_.hosts + weights_.cost * cost_[h] +
           weights_.frag * (cap_cpu_[h] / fleet_cpu_ + cap_mem_[h] / fleet_mem_);
  }

  double sens_weight() const { return use_sens_ ? weights_.sens : 0.0; }
  bool uses_sens() const { return use_sens_; }
  const Scores& host_sens(std::size_t h) const { return host_sens_[h]; }

  double relocate_delta(std::size_t t, std::size_t to) const {
    const std::size_t from = assign_[t];
    double d = 0;
    if (members_[from].size() == 1) d -= host_cost(from);
    if (members_[to].empty()) d += host_cost(to);
    if (use_sens_) {
      const Scores left = members_[from].size() == 1 ? Scores{} : host_sens_[from] - sens(t, from);
      d += weights_.sens * (excess(left) - excess(host_sens_[from]));
      d += weights_.sens * (excess(host_sens_[to] + sens(t, to)) - excess(host_sens_[to]));
    }
    return d;
  }

  bool swap_fits(std::size_t a, std::size_t b) const {
    const std::size_t ha = assign_[a];
    const std::size_t hb = assign_[b];
    return fits_with(ha, lim_cpu_[b] - lim_cpu_[a], lim_mem_[b] - lim_mem_[a]) &&
           fits_with(hb, lim_cpu_[a] - lim_cpu_[b], lim_mem_[a] - lim_mem_[b]);
  }

  double swap_delta(std::size_t a, std::size_t b) const {
    const std::size_t ha = assign_[a];
    const std::size_t hb = assign_[b];
    const Scores na = host_sens_[ha] - sens(a, ha) + sens(b, ha);
    const Scores nb = host_sens_[hb] - sens(b, hb) + sens(a, hb);
    return weights_.sens * (excess(na) + excess(nb) - excess(host_sens_[ha]) - excess(host_sens_[hb]));
  }

  void relocate(std::size_t t, std::size_t to) {
    const std::size_t from = assign_[t];
    auto& src = members_[from];
    src.erase(std::find(src.begin(), src.end(), t));
    auto& dst = members_[to];
    dst.insert(std::upper_bound(dst.begin(), dst.end(), t), t);
    assign_[t] = to;
    refresh(from);
    refresh(to);
  }

  void swap(std::size_t a, std::size_t b) {
    const std::size_t ha = assign_[a];
    const std::size_t hb = assign_[b];
    relocate(a, hb);
    relocate(b, ha);
  }

  Assignment assignment() const {
    Assignment out;
    const auto& tasks = fleet_.tasks();
    const auto& hosts = fleet_.hosts();
    for (std::size_t t = 0; t < n_; ++t) out.emplace(tasks[t].id, hosts[assign_[t]].id);
    return out;
  }

  const std::string& task_id(std::size_t t) const { return fleet_.tasks()[t].id; }
  const std::string& host_id(std::size_t h) const { return fleet_.hosts()[h].id; }

 private:
  // Recomputes host sums from its members in id order.
  void refresh(std::size_t h) {
    double cpu = 0;
    double mem = 0;
    Scores s;
    for (std::size_t t : members_[h]) {
      cpu += lim_cpu_[t];
      mem += lim_mem_[t];
      if (!sens_.empty()) s += sens(t, h);
    }
    load_cpu_[h] = cpu;
    load_mem_[h] = mem;
    host_sens_[h] = s;
  }

  const Fleet& fleet_;
  Weights weights_;
  bool use_sens_;
  std::size_t n_ = 0;
  std::size_t m_ = 0;
  std::size_t arch_count_ = 0;
  double fleet_cpu_ = 0;
  double fleet_mem_ = 0;

  std::vector<std::size_t> host_arch_;
  std::vector<double> cap_cpu_, cap_mem_, cost_;
  std::vector<double> lim_cpu_, lim_mem_;
  std::vector<Scores> sens_;

  std::vector<std::size_t> assign_;
  std::vector<std::vector<std::size_t>> members_;
  std::vector<double> load_cpu_, load_mem_;
  std::vector<Scores> host_sens_;
};

// Occupied hosts first, then free ones; each group by cost weight descending,
// then id.
std::vector<std::size_t> target_order(const Packing& p) {
  std::vector<std::size_t> order(p.hosts());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const bool fa = p.count(a) == 0;
    const bool fb = p.count(b) == 0;
    if (fa != fb) return fb;
    return p.cost(a) > p.cost(b);
  });
  return order;
}

struct Action {
  std::size_t task;
  std::size_t other;  // target host, or the other task of a swap
  bool swap = false;
};

// One accepted step: one move, or several applied in order.
struct Step {
  std::vector<Action> actions;
  int moves() const { return static_cast<int>(actions.size()); }
};

std::optional<Step> find_relocation(const Packing& p, const std::vector<std::size_t>& order) {
  for (std::size_t t = 0; t < p.tasks(); ++t) {
    const std::size_t from = p.host_of(t);
    // Without sensitivity, moving a task off a shared host changes nothing.
    if (!p.uses_sens() && p.count(from) > 1) continue;
    for (std::size_t to : order) {
      if (to == from || !p.can_take(to, t)) continue;
      if (p.relocate_delta(t, to) < -kImprovement) return Step{{{t, to}}};
    }
  }
  return std::nullopt;
}

std::optional<Step> find_swap(const Packing& p) {
  if (!p.uses_sens()) return std::nullopt;  // swaps only change interference
  for (std::size_t a = 0; a < p.tasks(); ++a) {
    for (std::size_t b = a + 1; b < p.tasks(); ++b) {
      if (p.host_of(a) == p.host_of(b)) continue;
      if (p.swap_delta(a, b) < -kImprovement && p.swap_fits(a, b)) {
        return Step{{{a, b, true}}};
      }
    }
  }
  return std::nullopt;
}

// Moves every task off one occupied host onto other occupied hosts. Each task
// goes to the feasible target with the smallest interference increase, first
// in target order on ties.
std::optional<Step> find_evacuation(const Packing& p, const std::vector<std::size_t>& order,
                                    int budget) {
  std::vector<std::size_t> sources;
  for (std::size_t h = 0; h < p.hosts(); ++h) {
    if (p.count(h) >= 2 && static_cast<int>(p.count(h)) <= budget) sources.push_back(h);
  }
  std::stable_sort(sources.begin(), sources.end(), [&](std::size_t a, std::size_t b) {
    if (p.count(a) != p.count(b)) return p.count(a) < p.count(b);
    return p.cost(a) > p.cost(b);
  });

  std::vector<std::size_t> targets;
  for (std::size_t h : order) {
    if (p.count(h) > 0) targets.push_back(h);
  }

  struct Overlay {
    double cpu = 0, mem = 0;
    Scores sens;
  };
  std::vector<std::pair<std::size_t, Overlay>> touched;
  auto overlay_of = [&](std::size_t h) -> Overlay* {
    for (auto& [host, o] : touched) {
      if (host == h) return &o;
    }
    return nullptr;
  };

  const double ws = p.sens_weight();
  for (std::size_t src : sources) {
    touched.clear();
    Step step;
    double delta = -p.host_cost(src) - ws * excess(p.host_sens(src));
    bool placed_all = true;
    for (std::size_t t : p.members(src)) {
      std::size_t best = p.hosts();
      double best_d = 0;
      for (std::size_t h : targets) {
        if (h == src) continue;
        const Overlay* o = overlay_of(h);
        const double cpu = p.lim_cpu(t) + (o ? o->cpu : 0.0);
        const double mem = p.lim_mem(t) + (o ? o->mem : 0.0);
        if (!p.fits_with(h, cpu, mem)) continue;
        double d = 0;
        if (ws > 0) {
          const Scores before = p.host_sens(h) + (o ? o->sens : Scores{});
          d = ws * (excess(before + p.sens(t, h)) - excess(before));
        }
        if (best == p.hosts() || d < best_d) {
          best = h;
          best_d = d;
          if (ws == 0 || d == 0) break;
        }
      }
      if (best == p.hosts()) {
        placed_all = false;
        break;
      }
      Overlay* o = overlay_of(best);
      if (o == nullptr) {
        touched.emplace_back(best, Overlay{});
        o = &touched.back().second;
      }
      o->cpu += p.lim_cpu(t);
      o->mem += p.lim_mem(t);
      if (ws > 0) o->sens += p.sens(t, best);
      delta += best_d;
      step.actions.push_back({t, best});
    }
    if (placed_all && delta < -kImprovement) return step;

    // Otherwise move the whole host onto one free, cheaper host.
    double cpu = 0, mem = 0;
    for (std::size_t t : p.members(src)) {
      cpu += p.lim_cpu(t);
      mem += p.lim_mem(t);
    }
    for (std::size_t h : order) {
      if (p.count(h) > 0 || !p.fits_with(h, cpu, mem)) continue;
      double d = p.host_cost(h) - p.host_cost(src);
      if (ws > 0) {
        Scores moved;
        for (std::size_t t : p.members(src)) moved += p.sens(t, h);
        d += ws * (excess(moved) - excess(p.host_sens(src)));
      }
      if (d < -kImprovement) {
        Step whole;
        for (std::size_t t : p.members(src)) whole.actions.push_back({t, h});
        return whole;
      }
    }
  }
  return std::nullopt;
}

constexpr std::size_t kRepackMaxTasks = 6;
constexpr std::size_t kRepackNeighbours = 4;
constexpr std::size_t kRepackFreePerArch = 2;

// Orders relocations so every intermediate packing stays feasible. When no
// pending move fits, two tasks bound for each other's hosts swap, or else one
// task is parked on another group host with room. Returns false if that still
// deadlocks or the budget runs out.
bool sequence_moves(const Packing& p, std::vector<std::pair<std::size_t, std::size_t>> pending,
                    const std::vector<std::size_t>& hosts, int budget, Step& step) {
  std::map<std::size_t, std::pair<double, double>> load;
  for (std::size_t h : hosts) {
    double c = 0, m = 0;
    for (std::size_t t : p.members(h)) {
      c += p.lim_cpu(t);
      m += p.lim_mem(t);
    }
    load[h] = {c, m};
  }
  std::map<std::size_t, std::size_t> at;
  for (const auto& [t, to] : pending) at[t] = p.host_of(t);
  auto room_for = [&](std::size_t t, std::size_t h) {
    return fits(load[h].first + p.lim_cpu(t), p.cap_cpu(h)) && fits(load[h].second + p.lim_mem(t), p.cap_mem(h));
  };
  auto move = [&](std::size_t t, std::size_t to) {
    load[at[t]].first -= p.lim_cpu(t);
    load[at[t]].second -= p.lim_mem(t);
    load[to].first += p.lim_cpu(t);
    load[to].second += p.lim_mem(t);
    at[t] = to;
    step.actions.push_back({t, to});
  };
  bool parked = false;
  while (!pending.empty()) {
    if (static_cast<int>(step.actions.size()) >= budget) return false;
    auto next = std::find_if(pending.begin(), pending.end(),
                             [&](const auto& mv) { return room_for(mv.first, mv.second); });
    if (next != pending.end()) {
      const auto [t, to] = *next;
      pending.erase(next);
      move(t, to);
      parked = false;
      continue;
    }
    // Two tasks bound for each other's hosts can trade places in one move.
    bool swapped = false;
    for (std::size_t i = 0; i < pending.size() && !swapped; ++i) {
      for (std::size_t j = i + 1; j < pending.size() && !swapped; ++j) {
        const auto [a, ta] = pending[i];
        const auto [b, tb] = pending[j];
        if (ta != at[b] || tb != at[a]) continue;
        const double dc = p.lim_cpu(b) - p.lim_cpu(a);
        const double dm = p.lim_mem(b) - p.lim_mem(a);
        if (!fits(load[at[a]].first + dc, p.cap_cpu(at[a])) || !fits(load[at[a]].second + dm, p.cap_mem(at[a])) ||
            !fits(load[at[b]].first - dc, p.cap_cpu(at[b])) || !fits(load[at[b]].second - dm, p.cap_mem(at[b]))) {
          continue;
        }
        load[at[a]].first += dc;
        load[at[a]].second += dm;
        load[at[b]].first -= dc;
        load[at[b]].second -= dm;
        std::swap(at[a], at[b]);
        step.actions.push_back({a, b, true});
        pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(j));
        pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(i));
        swapped = true;
      }
    }
    if (swapped) {
      parked = false;
      continue;
    }
    if (parked) return false;  // parking twice in a row makes no progress
    bool moved = false;
    for (const auto& [t, to] : pending) {
      for (std::size_t h : hosts) {
        if (h == at[t] || h == to || !room_for(t, h)) continue;
        move(t, h);
        moved = true;
        break;
      }
      if (moved) break;
    }
    if (!moved) return false;
    parked = true;
  }
  return true;
}

// Exact re-optimization of a small group: one host plus up to two of the
// roomiest occupied hosts, repacked onto those hosts and a few free ones.
// Catches moves single relocations cannot reach, such as a task stepping
// aside so another can move in, or one large host split onto two small ones.
std::optional<Step> find_repack(const Packing& p, const std::vector<std::size_t>& order, int budget) {
  std::vector<std::size_t> occupied;
  std::vector<std::size_t> spare;  // first free hosts of each arch, in target order
  std::map<std::size_t, std::size_t> spare_per_arch;
  for (std::size_t h : order) {
    if (p.count(h) > 0) {
      occupied.push_back(h);
    } else if (spare_per_arch[p.arch(h)]++ < kRepackFreePerArch) {
      spare.push_back(h);
    }
  }
  std::vector<std::size_t> roomy = occupied;
  std::stable_sort(roomy.begin(), roomy.end(), [&](std::size_t a, std::size_t b) {
    if (p.room(a) != p.room(b)) return p.room(a) > p.room(b);
    return a < b;
  });
  std::vector<std::size_t> sources = occupied;
  std::stable_sort(sources.begin(), sources.end(), [&](std::size_t a, std::size_t b) {
    if (p.count(a) != p.count(b)) return p.count(a) < p.count(b);
    if (p.cost(a) != p.cost(b)) return p.cost(a) > p.cost(b);
    return a < b;
  });

  const double ws = p.sens_weight();
  for (std::size_t src : sources) {
    if (p.count(src) > kRepackMaxTasks) continue;
    std::vector<std::size_t> near;
    for (std::size_t h : roomy) {
      if (h != src && near.size() < kRepackNeighbours) near.push_back(h);
    }
    std::vector<std::vector<std::size_t>> groups{{src}};
    for (std::size_t i = 0; i < near.size(); ++i) groups.push_back({src, near[i]});
    for (std::size_t i = 0; i < near.size(); ++i) {
      for (std::size_t j = i + 1; j < near.size(); ++j) groups.push_back({src, near[i], near[j]});
    }
    for (const auto& group : groups) {
      std::vector<std::size_t> pool;
      for (std::size_t h : group) pool.insert(pool.end(), p.members(h).begin(), p.members(h).end());
      if (pool.size() > kRepackMaxTasks) continue;
      std::stable_sort(pool.begin(), pool.end(), [&](std::size_t a, std::size_t b) {
        if (p.lim_cpu(a) != p.lim_cpu(b)) return p.lim_cpu(a) > p.lim_cpu(b);
        return a < b;
      });
      std::vector<std::size_t> targets = group;
      targets.insert(targets.end(), spare.begin(), spare.end());
      const std::size_t k = targets.size();

      double before = 0;
      for (std::size_t h : group) before += p.host_cost(h) + ws * excess(p.host_sens(h));
      double best = before - kImprovement;
      std::vector<std::size_t> pick(pool.size());
      std::optional<Step> best_step;
      std::vector<double> cpu(k, 0.0), mem(k, 0.0);
      std::vector<Scores> sens(k);
      std::vector<int> used(k, 0);

      // Branch and bound on the objective of the group; opening a host adds
      // its cost, adding a task never lowers interference.
      auto dfs = [&](auto&& self, std::size_t i, double partial) -> bool {
        if (partial >= best) return false;
        if (i == pool.size()) {
          std::vector<std::pair<std::size_t, std::size_t>> pending;
          for (std::size_t q = 0; q < pool.size(); ++q) {
            if (targets[pick[q]] != p.host_of(pool[q])) pending.emplace_back(pool[q], targets[pick[q]]);
          }
          std::sort(pending.begin(), pending.end());
          Step seq;
          if (pending.empty() || !sequence_moves(p, pending, targets, budget, seq)) return false;
          best = partial;
          best_step = std::move(seq);
          return ws == 0;
        }
        const std::size_t t = pool[i];
        for (std::size_t j = 0; j < k; ++j) {
          const std::size_t h = targets[j];
          if (used[j] == 0) {
            // Empty hosts of one arch are interchangeable; try the first.
            bool twin = false;
            for (std::size_t q = 0; q < j && !twin; ++q) twin = used[q] == 0 && p.arch(targets[q]) == p.arch(h);
            if (twin) continue;
          }
          if (!fits(cpu[j] + p.lim_cpu(t), p.cap_cpu(h)) || !fits(mem[j] + p.lim_mem(t), p.cap_mem(h))) continue;
          double d = used[j] == 0 ? p.host_cost(h) : 0.0;
          const Scores old = sens[j];
          if (ws > 0) {
            sens[j] += p.sens(t, h);
            d += ws * (excess(sens[j]) - excess(old));
          }
          cpu[j] += p.lim_cpu(t);
          mem[j] += p.lim_mem(t);
          ++used[j];
          pick[i] = j;
          const bool done = self(self, i + 1, partial + d);
          --used[j];
          cpu[j] -= p.lim_cpu(t);
          mem[j] -= p.lim_mem(t);
          sens[j] = old;
          if (done) return true;
        }
        return false;
      };
      dfs(dfs, 0, 0.0);
      if (best_step) return best_step;
    }
  }
  return std::nullopt;
}

std::vector<ResourceVector> limits_of(const Fleet& fleet, LimitMode mode) {
  std::vector<ResourceVector> out;
  for (const TaskProfile& t : fleet.tasks()) out.push_back(effective_limits(t, mode));
  return out;
}

void require_placeable(const Fleet& fleet, LimitMode mode) {
  const auto limits = limits_of(fleet, mode);
  for (std::size_t t = 0; t < limits.size(); ++t) {
    bool ok = false;
    for (const ArchSpec& a : fleet.architectures()) {
      const bool has_host = std::any_of(fleet.hosts().begin(), fleet.hosts().end(),
                                        [&](const Host& h) { return h.arch == a.name; });
      if (has_host && fits(limits[t].cpu_cores, a.capacity.cpu_cores) &&
          fits(limits[t].memory_gb, a.capacity.memory_gb)) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw Error(ErrorCode::kUnsatisfiable,
                  "task '" + fleet.tasks()[t].id + "' fits on no host under mode " +
                      std::string(mode_name(mode)));
    }
  }
}

std::map<std::string, ArchStats> arch_stats(const Fleet& fleet, const Assignment& before,
                                            const Assignment& after) {
  std::map<std::string, ArchStats> out;
  for (const ArchSpec& a : fleet.architectures()) out[a.name];
  for (const auto& [arch, n] : metrics::occupied_by_arch(fleet, before)) out[arch].occupied_before = n;
  for (const auto& [arch, n] : metrics::occupied_by_arch(fleet, after)) out[arch].occupied_after = n;
  for (const auto& [arch, n] : metrics::freed_by_arch(fleet, before, after)) out[arch].freed = n;
  for (const auto& [arch, n] : metrics::freed_by_arch(fleet, after, before)) out[arch].newly_occupied = n;
  return out;
}

}  // namespace

SolveResult solve(const Fleet& fleet, const SolverConfig& config, const SensitivityTable* table) {
  validate(config, table);
  require_placeable(fleet, config.mode);

  Packing p(fleet, config, table);
  SolveResult result;
  result.initial = fleet.assignment();

  // Make the start feasible under the chosen limits by relocating only.
  for (std::size_t h = 0; h < p.hosts(); ++h) {
    if (p.host_fits(h)) continue;
    const std::vector<std::size_t> evict = p.members(h);
    for (std::size_t t : evict) {
      if (p.host_fits(h)) break;
      for (std::size_t to : target_order(p)) {
        if (to == h || !p.can_take(to, t)) continue;
        result.repairs.push_back(Relocate{p.task_id(t), p.host_id(h), p.host_id(to)});
        p.relocate(t, to);
        break;
      }
    }
    if (!p.host_fits(h)) {
      throw Error(ErrorCode::kUnsatisfiable,
                  "host '" + p.host_id(h) + "' cannot be made feasible by relocating its tasks");
    }
  }

  result.initial_objective = objective(fleet, p.assignment(), config, table);
  int used = 0;
  while (used < config.max_moves) {
    const auto order = target_order(p);
    std::optional<Step> step = find_relocation(p, order);
    if (!step) step = find_swap(p);
    if (!step) step = find_evacuation(p, order, config.max_moves - used);
    if (!step) step = find_repack(p, order, config.max_moves - used);
    if (!step) break;

    for (const Action& a : step->actions) {
      if (a.swap) {
        result.moves_applied.push_back(Swap{p.task_id(a.task), p.task_id(a.other)});
        p.swap(a.task, a.other);
      } else {
        result.moves_applied.push_back(Relocate{p.task_id(a.task), p.host_id(p.host_of(a.task)), p.host_id(a.other)});
        p.relocate(a.task, a.other);
      }
    }
    used += step->moves();
    result.step_moves.push_back(step->moves());
    result.objective_trace.push_back(objective(fleet, p.assignment(), config, table));
  }

  result.final = p.assignment();
  result.stats = arch_stats(fleet, result.initial, result.final);
  return result;
}

Assignment brute_force_optimal(const Fleet& fleet, const SolverConfig& config,
                               const SensitivityTable* table) {
  validate(config, table);
  const std::size_t n = fleet.tasks().size();
  const std::size_t m = fleet.hosts().size();
  if (n > kBruteForceMaxTasks || m > kBruteForceMaxHosts) {
    throw Error(ErrorCode::kTooLarge, "brute force is limited to 8 tasks and 4 hosts");
  }
  if (m == 0 && n > 0) throw Error(ErrorCode::kUnsatisfiable, "no hosts");

  const auto limits = limits_of(fleet, config.mode);
  std::vector<std::size_t> idx(n, 0);
  std::optional<Assignment> best;
  double best_obj = 0;
  while (true) {
    std::vector<double> cpu(m, 0.0), mem(m, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      cpu[idx[t]] += limits[t].cpu_cores;
      mem[idx[t]] += limits[t].memory_gb;
    }
    bool ok = true;
    for (std::size_t h = 0; h < m && ok; ++h) {
      const ArchSpec& a = fleet.arch(fleet.hosts()[h].arch);
      ok = fits(cpu[h], a.capacity.cpu_cores) && fits(mem[h], a.capacity.memory_gb);
    }
    if (ok) {
      Assignment candidate;
      for (std::size_t t = 0; t < n; ++t) candidate.emplace(fleet.tasks()[t].id, fleet.hosts()[idx[t]].id);
      const double obj = objective(fleet, candidate, config, table);
      if (!best || obj < best_obj - 1e-12) {
        best = std::move(candidate);
        best_obj = obj;
      }
    }
    // Next vector in lexicographic order, first task most significant.
    std::size_t pos = n;
    while (pos > 0) {
      --pos;
      if (++idx[pos] < m) break;
      idx[pos] = 0;
      if (pos == 0) {
        pos = n;
        break;
      }
    }
    if (pos == n || n == 0) break;
  }
  if (!best) throw Error(ErrorCode::kUnsatisfiable, "no feasible assignment exists");
  return *best;
}

Assignment first_fit_decreasing(const Fleet& fleet, LimitMode mode) {
  const auto limits = limits_of(fleet, mode);
  std::vector<std::size_t> tasks(limits.size());
  std::iota(tasks.begin(), tasks.end(), std::size_t{0});
  std::stable_sort(tasks.begin(), tasks.end(), [&](std::size_t a, std::size_t b) {
    if (limits[a].cpu_cores != limits[b].cpu_cores) return limits[a].cpu_cores > limits[b].cpu_cores;
    return limits[a].memory_gb > limits[b].memory_gb;
  });
  std::vector<std::size_t> hosts(fleet.hosts().size());
  std::iota(hosts.begin(), hosts.end(), std::size_t{0});
  std::stable_sort(hosts.begin(), hosts.end(), [&](std::size_t a, std::size_t b) {
    return fleet.arch(fleet.hosts()[a].arch).cost_weight > fleet.arch(fleet.hosts()[b].arch).cost_weight;
  });

  std::vector<double> cpu(hosts.size(), 0.0), mem(hosts.size(), 0.0);
  Assignment out;
  for (std::size_t t : tasks) {
    bool placed = false;
    for (std::size_t h : hosts) {
      const ArchSpec& a = fleet.arch(fleet.hosts()[h].arch);
      if (fits(cpu[h] + limits[t].cpu_cores, a.capacity.cpu_cores) &&
          fits(mem[h] + limits[t].memory_gb, a.capacity.memory_gb)) {
        cpu[h] += limits[t].cpu_cores;
        mem[h] += limits[t].memory_gb;
        out.emplace(fleet.tasks()[t].id, fleet.hosts()[h].id);
        placed = true;
        break;
      }
    }
    if (!placed) {
      throw Error(ErrorCode::kUnsatisfiable, "task '" + fleet.tasks()[t].id + "' does not fit");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Documents

json config_to_json(const SolverConfig& c) {
  return json{{"mode", mode_name(c.mode)},
              {"weights",
               {{"w_hosts", c.weights.hosts},
                {"w_cost", c.weights.cost},
                {"w_frag", c.weights.frag},
                {"w_sens", c.weights.sens}}},
              {"max_moves", c.max_moves},
              {"seed", c.seed}};
}

SolverConfig config_from_json(const json& j) {
  try {
    SolverConfig c = preset(parse_mode(j.value("mode", std::string("p99"))));
    if (j.contains("weights")) {
      const json& w = j["weights"];
      c.weights.hosts = w.value("w_hosts", c.weights.hosts);
      c.weights.cost = w.value("w_cost", c.weights.cost);
      c.weights.frag = w.value("w_frag", c.weights.frag);
      c.weights.sens = w.value("w_sens", c.weights.sens);
    }
    c.max_moves = j.value("max_moves", c.max_moves);
    c.seed = j.value("seed", c.seed);
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("run configuration: ") + e.what());
  }
}

json move_to_json(const Move& move) {
  if (const auto* r = std::get_if<Relocate>(&move)) {
    return json{{"kind", "relocate"}, {"task", r->task}, {"from", r->from}, {"to", r->to}};
  }
  const Swap& s = std::get<Swap>(move);
  return json{{"kind", "swap"}, {"task_a", s.task_a}, {"task_b", s.task_b}};
}

Move move_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "relocate") {
    return Relocate{j.at("task").get<std::string>(), j.at("from").get<std::string>(),
                    j.at("to").get<std::string>()};
  }
  if (kind == "swap") return Swap{j.at("task_a").get<std::string>(), j.at("task_b").get<std::string>()};
  throw Error(ErrorCode::kParse, "unknown move kind '" + kind + "'");
}

json result_to_json(const SolveResult& r) {
  json repairs = json::array();
  for (const Move& m : r.repairs) repairs.push_back(move_to_json(m));
  json moves = json::array();
  for (const Move& m : r.moves_applied) moves.push_back(move_to_json(m));
  json stats = json::object();
  for (const auto& [arch, s] : r.stats) {
    stats[arch] = {{"occupied_before", s.occupied_before},
                   {"occupied_after", s.occupied_after},
                   {"freed", s.freed},
                   {"newly_occupied", s.newly_occupied}};
  }
  return json{{"initial", r.initial},
              {"final", r.final},
              {"repairs", std::move(repairs)},
              {"moves_applied", std::move(moves)},
              {"step_moves", r.step_moves},
              {"initial_objective", r.initial_objective},
              {"objective_trace", r.objective_trace},
              {"stats", std::move(stats)}};
}

SolveResult result_from_json(const json& j) {
  try {
    SolveResult r;
    r.initial = j.at("initial").get<Assignment>();
    r.final = j.at("final").get<Assignment>();
    for (const json& m : j.at("repairs")) r.repairs.push_back(move_from_json(m));
    for (const json& m : j.at("moves_applied")) r.moves_applied.push_back(move_from_json(m));
    r.step_moves = j.at("step_moves").get<std::vector<int>>();
    r.initial_objective = j.at("initial_objective").get<double>();
    r.objective_trace = j.at("objective_trace").get<std::vector<double>>();
    for (const auto& [arch, s] : j.at("stats").items()) {
      r.stats[arch] = ArchStats{s.at("occupied_before").get<int>(), s.at("occupied_after").get<int>(),
                                s.at("freed").get<int>(), s.at("newly_occupied").get<int>()};
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("solve result: ") + e.what());
  }
}

std::string move_log_csv(const SolveResult& r) {
  std::ostringstream out;
  out << "step,kind,task_a,task_b,from,to\n";
  auto row = [&](std::size_t step, const Move& m) {
    if (const auto* rel = std::get_if<Relocate>(&m)) {
      out << step << ",relocate," << rel->task << ",," << rel->from << ',' << rel->to << '\n';
    } else {
      const Swap& s = std::get<Swap>(m);
      out << step << ",swap," << s.task_a << ',' << s.task_b << ",,\n";
    }
  };
  for (const Move& m : r.repairs) row(0, m);
  std::size_t next = 0;
  for (std::size_t s = 0; s < r.step_moves.size(); ++s) {
    for (int i = 0; i < r.step_moves[s]; ++i) row(s + 1, r.moves_applied[next++]);
  }
  return out.str();
}

}  // namespace colopack::solver
