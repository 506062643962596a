#include "smg/gridworld.h"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace smg {

namespace {

std::vector<Cell> sample_distinct_cells(const GridConfig& grid, int count,
                                        Rng& rng) {
  const int n_cells = grid.width * grid.height;
  if (count > n_cells) {
    throw std::invalid_argument("grid too small for the requested placements");
  }
  std::vector<int> idx(n_cells);
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates; only the first `count` slots are needed.
  for (int k = 0; k < count; ++k) {
    std::uniform_int_distribution<int> pick(k, n_cells - 1);
    std::swap(idx[k], idx[pick(rng)]);
  }
  std::vector<Cell> out(count);
  for (int k = 0; k < count; ++k) {
    out[k] = Cell{idx[k] % grid.width, idx[k] / grid.width};
  }
  return out;
}

Cell move(const GridConfig& grid, Cell c, int action) {
  switch (action) {
    case kUp:
      c.y = std::max(0, c.y - 1);
      break;
    case kDown:
      c.y = std::min(grid.height - 1, c.y + 1);
      break;
    case kLeft:
      c.x = std::max(0, c.x - 1);
      break;
    case kRight:
      c.x = std::min(grid.width - 1, c.x + 1);
      break;
    default:
      break;
  }
  return c;
}

// First ceil(n/2) labels are `first`, the rest `second`, in random order.
template <typename T>
std::vector<T> half_split(int n, T first, T second, Rng& rng) {
  std::vector<T> out(n, second);
  std::fill(out.begin(), out.begin() + (n + 1) / 2, first);
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

double norm_coord(int v, int extent) {
  return extent > 1 ? static_cast<double>(v) / (extent - 1) : 0.0;
}

void push_cell(std::vector<double>& obs, const GridConfig& grid, Cell c) {
  obs.push_back(norm_coord(c.x, grid.width));
  obs.push_back(norm_coord(c.y, grid.height));
}

// Offset of `to` relative to `from`, mapped to [0,1] with 0.5 meaning the
// same row or column.
double norm_offset(int from, int to, int extent) {
  return extent > 1 ? 0.5 + 0.5 * static_cast<double>(to - from) / (extent - 1)
                    : 0.5;
}

void push_offset(std::vector<double>& obs, const GridConfig& grid, Cell from,
                 Cell to) {
  obs.push_back(norm_offset(from.x, to.x, grid.width));
  obs.push_back(norm_offset(from.y, to.y, grid.height));
}

char agent_char(int i) {
  return i < 10 ? static_cast<char>('0' + i) : static_cast<char>('a' + i - 10);
}

}  // namespace

void GridConfig::validate() const {
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("grid dimensions must be positive");
  }
  if (n_agents < 1) throw std::invalid_argument("need at least one agent");
  if (max_steps < 1) throw std::invalid_argument("max_steps must be positive");
}

// ---------------------------------------------------------------------------
// Smartfactory

Smartfactory::Smartfactory(GridConfig grid, SmartfactoryParams params)
    : grid_(grid), params_(params) {
  grid_.validate();
  if (params_.machine_types < 1 || params_.machines_per_type < 1 ||
      params_.task_length < 1 || params_.t_inactive < 0) {
    throw std::invalid_argument("invalid smartfactory parameters");
  }
  const int placements =
      grid_.n_agents + params_.machine_types * params_.machines_per_type;
  if (placements > grid_.width * grid_.height) {
    throw std::invalid_argument("grid too small for the requested placements");
  }
}

void Smartfactory::reset(Rng& rng) {
  const int n_machines = params_.machine_types * params_.machines_per_type;
  auto cells = sample_distinct_cells(grid_, grid_.n_agents + n_machines, rng);
  positions_.assign(cells.begin(), cells.begin() + grid_.n_agents);
  machines_.clear();
  for (int m = 0; m < n_machines; ++m) {
    machines_.push_back(
        Machine{m / params_.machines_per_type, cells[grid_.n_agents + m], 0});
  }
  std::uniform_int_distribution<int> type_dist(0, params_.machine_types - 1);
  tasks_.assign(grid_.n_agents, Task{});
  for (auto& t : tasks_) {
    t.required.resize(params_.task_length);
    for (int& r : t.required) r = type_dist(rng);
  }
  auto prio = half_split(grid_.n_agents, Priority::kHigh, Priority::kLow, rng);
  for (int i = 0; i < grid_.n_agents; ++i) tasks_[i].priority = prio[i];
  step_ = 0;
  done_ = false;
}

void Smartfactory::set_layout(std::vector<Cell> agents,
                              std::vector<Machine> machines,
                              std::vector<Task> tasks) {
  if (static_cast<int>(agents.size()) != grid_.n_agents ||
      tasks.size() != agents.size()) {
    throw std::invalid_argument("set_layout: agent count mismatch");
  }
  positions_ = std::move(agents);
  machines_ = std::move(machines);
  tasks_ = std::move(tasks);
  step_ = 0;
  done_ = false;
}

StepOutcome Smartfactory::step(std::span<const int> env_actions, Rng&) {
  if (done_) throw std::logic_error("step on a finished episode");
  check_actions(env_actions, grid_.n_agents, num_env_actions());
  const int n = grid_.n_agents;
  StepOutcome out{RewardVector(n, 0.0), false};
  for (int i = 0; i < n; ++i) {
    if (!tasks_[i].finished()) {
      positions_[i] = move(grid_, positions_[i], env_actions[i]);
    }
  }
  for (int i = 0; i < n; ++i) {
    Task& task = tasks_[i];
    if (task.finished()) continue;
    for (int m = 0; m < static_cast<int>(machines_.size()); ++m) {
      Machine& machine = machines_[m];
      if (!(machine.position == positions_[i]) || !machine_active(m) ||
          machine.type != task.required[task.completed]) {
        continue;
      }
      machine.inactive_until = step_ + params_.t_inactive;
      if (++task.completed == static_cast<int>(task.required.size())) {
        out.rewards[i] =
            task.priority == Priority::kHigh ? params_.r_high : params_.r_low;
      }
      break;
    }
  }
  ++step_;
  const bool all_done = std::all_of(tasks_.begin(), tasks_.end(),
                                    [](const Task& t) { return t.finished(); });
  done_ = all_done || step_ >= grid_.max_steps;
  out.done = done_;
  return out;
}

int Smartfactory::observation_size() const {
  const int n_machines = params_.machine_types * params_.machines_per_type;
  return 2 + 5 * n_machines + params_.task_length * params_.machine_types + 3 +
         2 + 2 * (grid_.n_agents - 1);
}

std::vector<double> Smartfactory::observe(AgentId agent,
                                          const BalanceSheet& balance) const {
  std::vector<double> obs;
  obs.reserve(observation_size());
  const Cell self = positions_[agent];
  push_cell(obs, grid_, self);
  const Task& task = tasks_[agent];
  const int wanted = task.finished() ? -1 : task.required[task.completed];
  const double type_scale =
      params_.machine_types > 1 ? 1.0 / (params_.machine_types - 1) : 0.0;
  for (int m = 0; m < static_cast<int>(machines_.size()); ++m) {
    push_offset(obs, grid_, self, machines_[m].position);
    obs.push_back(machines_[m].type * type_scale);
    obs.push_back(machine_active(m) ? 1.0 : 0.0);
    obs.push_back(machines_[m].type == wanted ? 1.0 : 0.0);
  }
  for (int k = 0; k < params_.task_length; ++k) {
    for (int t = 0; t < params_.machine_types; ++t) {
      obs.push_back(k >= task.completed && task.required[k] == t ? 1.0 : 0.0);
    }
  }
  obs.push_back(static_cast<double>(task.completed) / params_.task_length);
  obs.push_back(task.priority == Priority::kHigh ? 1.0 : 0.0);
  obs.push_back(task.finished() ? 1.0 : 0.0);
  obs.push_back(balance.size() ? balance.owed_by(agent) : 0.0);
  obs.push_back(balance.size() ? balance.owed_to(agent) : 0.0);
  for (int j = 0; j < grid_.n_agents; ++j) {
    if (j != agent) push_offset(obs, grid_, self, positions_[j]);
  }
  return obs;
}

std::uint64_t Smartfactory::state_key(AgentId agent) const {
  const Cell c = positions_[agent];
  return (static_cast<std::uint64_t>(tasks_[agent].completed) * grid_.height +
          c.y) * grid_.width + c.x;
}

double Smartfactory::max_overall() const {
  const int high = (grid_.n_agents + 1) / 2;
  return high * params_.r_high + (grid_.n_agents - high) * params_.r_low;
}

std::string Smartfactory::agent_group(AgentId agent) const {
  return tasks_[agent].priority == Priority::kHigh ? "high" : "low";
}

std::string Smartfactory::render() const {
  std::vector<std::string> rows(grid_.height, std::string(grid_.width, '.'));
  for (int m = 0; m < static_cast<int>(machines_.size()); ++m) {
    const char base = machine_active(m) ? 'A' : 'a';
    rows[machines_[m].position.y][machines_[m].position.x] =
        static_cast<char>(base + machines_[m].type);
  }
  for (int i = 0; i < grid_.n_agents; ++i) {
    rows[positions_[i].y][positions_[i].x] = agent_char(i);
  }
  std::string out;
  for (const auto& r : rows) out += r + '\n';
  return out;
}

// ---------------------------------------------------------------------------
// Refinery

Refinery::Refinery(GridConfig grid, RefineryParams params)
    : grid_(grid), params_(params) {
  grid_.validate();
  if (params_.initial_raw < 0 || params_.initial_refined < 0) {
    throw std::invalid_argument("invalid refinery parameters");
  }
  if (grid_.n_agents + params_.initial_raw + params_.initial_refined >
      grid_.width * grid_.height) {
    throw std::invalid_argument("grid too small for the requested placements");
  }
}

void Refinery::reset(Rng& rng) {
  const int n_res = params_.initial_raw + params_.initial_refined;
  auto cells = sample_distinct_cells(grid_, grid_.n_agents + n_res, rng);
  positions_.assign(cells.begin(), cells.begin() + grid_.n_agents);
  resources_.clear();
  for (int k = 0; k < n_res; ++k) {
    resources_.push_back(Resource{cells[grid_.n_agents + k],
                                  k < params_.initial_raw ? ResourceState::kRaw
                                                          : ResourceState::kRefined,
                                  false});
  }
  kinds_ = half_split(grid_.n_agents, AgentKind::kRefiner, AgentKind::kConsumer,
                      rng);
  step_ = 0;
  done_ = false;
}

void Refinery::set_layout(std::vector<Cell> agents, std::vector<AgentKind> kinds,
                          std::vector<Resource> resources) {
  if (static_cast<int>(agents.size()) != grid_.n_agents ||
      kinds.size() != agents.size()) {
    throw std::invalid_argument("set_layout: agent count mismatch");
  }
  positions_ = std::move(agents);
  kinds_ = std::move(kinds);
  resources_ = std::move(resources);
  step_ = 0;
  done_ = false;
}

StepOutcome Refinery::step(std::span<const int> env_actions, Rng&) {
  if (done_) throw std::logic_error("step on a finished episode");
  check_actions(env_actions, grid_.n_agents, num_env_actions());
  const int n = grid_.n_agents;
  StepOutcome out{RewardVector(n, 0.0), false};
  for (int i = 0; i < n; ++i) {
    positions_[i] = move(grid_, positions_[i], env_actions[i]);
  }
  for (int i = 0; i < n; ++i) {
    const int a = env_actions[i];
    if (a != kInteract && a != kRefine) continue;
    for (auto& res : resources_) {
      if (res.consumed || !(res.position == positions_[i])) continue;
      if (kinds_[i] == AgentKind::kRefiner && res.state == ResourceState::kRaw) {
        if (a == kInteract) {
          res.consumed = true;
          out.rewards[i] = params_.r_low;
        } else {
          res.state = ResourceState::kRefined;
        }
      } else if (kinds_[i] == AgentKind::kConsumer && a == kInteract &&
                 res.state == ResourceState::kRefined) {
        res.consumed = true;
        out.rewards[i] = params_.r_high;
      }
      break;
    }
  }
  ++step_;
  done_ = consumed_count() == static_cast<int>(resources_.size()) ||
          step_ >= grid_.max_steps;
  out.done = done_;
  return out;
}

int Refinery::raw_count() const {
  return static_cast<int>(std::count_if(resources_.begin(), resources_.end(), [](const Resource& r) {
    return !r.consumed && r.state == ResourceState::kRaw;
  }));
}

int Refinery::refined_count() const {
  return static_cast<int>(std::count_if(resources_.begin(), resources_.end(), [](const Resource& r) {
    return !r.consumed && r.state == ResourceState::kRefined;
  }));
}

int Refinery::consumed_count() const {
  return static_cast<int>(std::count_if(resources_.begin(), resources_.end(),
                       [](const Resource& r) { return r.consumed; }));
}

int Refinery::observation_size() const {
  const int n_res = params_.initial_raw + params_.initial_refined;
  return 2 + 4 * n_res + 1 + 2 + 2 * (grid_.n_agents - 1);
}

std::vector<double> Refinery::observe(AgentId agent,
                                      const BalanceSheet& balance) const {
  std::vector<double> obs;
  obs.reserve(observation_size());
  const Cell self = positions_[agent];
  push_cell(obs, grid_, self);
  for (const auto& res : resources_) {
    push_offset(obs, grid_, self, res.position);
    obs.push_back(res.state == ResourceState::kRefined ? 1.0 : 0.0);
    obs.push_back(res.consumed ? 0.0 : 1.0);
  }
  obs.push_back(kinds_[agent] == AgentKind::kRefiner ? 1.0 : 0.0);
  obs.push_back(balance.size() ? balance.owed_by(agent) : 0.0);
  obs.push_back(balance.size() ? balance.owed_to(agent) : 0.0);
  for (int j = 0; j < grid_.n_agents; ++j) {
    if (j != agent) push_offset(obs, grid_, self, positions_[j]);
  }
  return obs;
}

std::uint64_t Refinery::state_key(AgentId agent) const {
  const Cell c = positions_[agent];
  return static_cast<std::uint64_t>(c.y) * grid_.width + c.x;
}

double Refinery::max_overall() const {
  const int consumers = grid_.n_agents / 2;
  if (consumers == 0) return params_.r_low * params_.initial_raw;
  return params_.r_high * (params_.initial_raw + params_.initial_refined);
}

std::string Refinery::agent_group(AgentId agent) const {
  return kinds_[agent] == AgentKind::kRefiner ? "refiner" : "consumer";
}

std::string Refinery::render() const {
  std::vector<std::string> rows(grid_.height, std::string(grid_.width, '.'));
  for (const auto& res : resources_) {
    if (res.consumed) continue;
    rows[res.position.y][res.position.x] =
        res.state == ResourceState::kRaw ? 'r' : 'R';
  }
  for (int i = 0; i < grid_.n_agents; ++i) {
    rows[positions_[i].y][positions_[i].x] = agent_char(i);
  }
  std::string out;
  for (const auto& r : rows) out += r + '\n';
  return out;
}

}  // namespace smg
