#include "smg/market_game.h"

#include <stdexcept>

namespace smg {

MarketGame::MarketGame(std::unique_ptr<Environment> env, MarketConfig config)
    : env_(std::move(env)), config_(config), state_(env_->num_agents()) {
  if (!env_) throw std::invalid_argument("MarketGame: null environment");
  config_.validate();
}

int MarketGame::action_space_size() const {
  return market_space_size(config_.kind, env_->num_agents(),
                           env_->num_env_actions());
}

void MarketGame::reset(Rng& rng) {
  env_->reset(rng);
  state_ = MarketState(env_->num_agents());
}

MarketGameStep MarketGame::step(std::span<const int> joint_indices, Rng& rng) {
  const int n = env_->num_agents();
  if (static_cast<int>(joint_indices.size()) != n) {
    throw std::out_of_range("MarketGame: expected one action per agent");
  }
  const auto joint =
      decode_joint(config_.kind, joint_indices, env_->num_env_actions());

  MarketGameStep out;
  out.env_actions.resize(n);
  for (int i = 0; i < n; ++i) out.env_actions[i] = joint[i].env_action;

  StepOutcome env_out = env_->step(out.env_actions, rng);
  out.raw_rewards = env_out.rewards;
  out.done = env_out.done;

  MarketOutcome m = market_step(state_, joint, env_out.rewards, config_);
  state_ = std::move(m.state);
  out.rewards = std::move(m.rewards);
  out.trades.resize(n);
  for (int i = 0; i < n; ++i) out.trades[i] = count_trades(m.trades, i);
  return out;
}

}  // namespace smg
