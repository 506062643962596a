// N-player gridworld resource environments: Smartfactory (machine scheduling
// with task priorities) and Refinery (refine or consume dilemma).
#pragma once

#include <string>
#include <vector>

#include "smg/core.h"
#include "smg/market.h"

namespace smg {

enum GridAction : int {
  kUp = 0,
  kDown = 1,
  kLeft = 2,
  kRight = 3,
  kStay = 4,
  kInteract = 5,
  kRefine = 6,
};

struct Cell {
  int x = 0;
  int y = 0;
  bool operator==(const Cell&) const = default;
};

struct GridConfig {
  int width = 12;
  int height = 8;
  int n_agents = 4;
  int max_steps = 200;

  void validate() const;
};

enum class Priority { kHigh, kLow };

struct Machine {
  int type = 0;
  Cell position;
  long inactive_until = 0;  // usable again once step >= inactive_until
};

struct Task {
  std::vector<int> required;  // machine types, visited in order
  int completed = 0;
  Priority priority = Priority::kLow;

  bool finished() const {
    return completed == static_cast<int>(required.size());
  }
};

struct SmartfactoryParams {
  int machine_types = 2;
  int machines_per_type = 2;
  int task_length = 3;
  int t_inactive = 8;
  double r_high = 5.0;
  double r_low = 1.0;
};

class Smartfactory final : public Environment {
 public:
  Smartfactory(GridConfig grid, SmartfactoryParams params = {});

  std::string name() const override { return "smartfactory"; }
  int num_agents() const override { return grid_.n_agents; }
  int num_env_actions() const override { return 5; }
  void reset(Rng& rng) override;
  StepOutcome step(std::span<const int> env_actions, Rng& rng) override;
  bool done() const override { return done_; }
  int observation_size() const override;
  std::vector<double> observe(AgentId agent,
                              const BalanceSheet& balance) const override;
  std::uint64_t state_key(AgentId agent) const override;
  double min_overall() const override { return 0.0; }
  double max_overall() const override;
  std::string agent_group(AgentId agent) const override;

  std::string render() const;

  const std::vector<Cell>& agent_positions() const { return positions_; }
  const std::vector<Machine>& machines() const { return machines_; }
  const std::vector<Task>& tasks() const { return tasks_; }
  long step_count() const { return step_; }
  bool machine_active(int m) const { return step_ >= machines_[m].inactive_until; }

  // Test hook: replaces the sampled layout.
  void set_layout(std::vector<Cell> agents, std::vector<Machine> machines,
                  std::vector<Task> tasks);

 private:
  GridConfig grid_;
  SmartfactoryParams params_;
  std::vector<Cell> positions_;
  std::vector<Machine> machines_;
  std::vector<Task> tasks_;
  long step_ = 0;
  bool done_ = false;
};

enum class AgentKind { kRefiner, kConsumer };
enum class ResourceState { kRaw, kRefined };

struct Resource {
  Cell position;
  ResourceState state = ResourceState::kRaw;
  bool consumed = false;
};

struct RefineryParams {
  int initial_raw = 5;
  int initial_refined = 3;
  double r_high = 5.0;
  double r_low = 0.02;
};

class Refinery final : public Environment {
 public:
  Refinery(GridConfig grid, RefineryParams params = {});

  std::string name() const override { return "refinery"; }
  int num_agents() const override { return grid_.n_agents; }
  int num_env_actions() const override { return 7; }
  void reset(Rng& rng) override;
  StepOutcome step(std::span<const int> env_actions, Rng& rng) override;
  bool done() const override { return done_; }
  int observation_size() const override;
  std::vector<double> observe(AgentId agent,
                              const BalanceSheet& balance) const override;
  std::uint64_t state_key(AgentId agent) const override;
  double min_overall() const override { return 0.0; }
  double max_overall() const override;
  std::string agent_group(AgentId agent) const override;

  std::string render() const;

  const std::vector<Cell>& agent_positions() const { return positions_; }
  const std::vector<AgentKind>& kinds() const { return kinds_; }
  const std::vector<Resource>& resources() const { return resources_; }
  int raw_count() const;
  int refined_count() const;
  int consumed_count() const;

  void set_layout(std::vector<Cell> agents, std::vector<AgentKind> kinds,
                  std::vector<Resource> resources);

 private:
  GridConfig grid_;
  RefineryParams params_;
  std::vector<Cell> positions_;
  std::vector<AgentKind> kinds_;
  std::vector<Resource> resources_;
  long step_ = 0;
  bool done_ = false;
};

}  // namespace smg
