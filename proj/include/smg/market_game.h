// A stochastic game extended by market actions and a market function.
#pragma once

#include <memory>
#include <span>
#include <vector>

#include "smg/core.h"
#include "smg/market.h"

namespace smg {

struct MarketGameStep {
  RewardVector raw_rewards;     // environment rewards before the market
  RewardVector rewards;         // after redistribution
  std::vector<int> env_actions;
  std::vector<int> trades;      // trades per agent this step
  bool done = false;
};

class MarketGame {
 public:
  MarketGame(std::unique_ptr<Environment> env, MarketConfig config);

  int num_agents() const { return env_->num_agents(); }
  int action_space_size() const;
  const MarketConfig& config() const { return config_; }
  const MarketState& market_state() const { return state_; }
  const Environment& env() const { return *env_; }
  Environment& env() { return *env_; }

  // Resets the environment, balance sheet and share registry.
  void reset(Rng& rng);
  MarketGameStep step(std::span<const int> joint_indices, Rng& rng);
  bool done() const { return env_->done(); }

  std::vector<double> observe(AgentId agent) const {
    return env_->observe(agent, state_.balance);
  }

 private:
  std::unique_ptr<Environment> env_;
  MarketConfig config_;
  MarketState state_;
};

}  // namespace smg
