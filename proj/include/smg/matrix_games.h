// Two-player matrix games: the Conflict game with tunable conflict level and
// the Prisoner's Dilemma.
#pragma once

#include <array>
#include <memory>
#include <utility>
#include <vector>

#include "smg/core.h"
#include "smg/market_game.h"

namespace smg {

inline constexpr int kCooperate = 0;
inline constexpr int kDefect = 1;

/// cells[a1][a2] = (reward player 1, reward player 2).
struct Payoff2x2 {
  std::array<std::array<std::pair<double, double>, 2>, 2> cells{};

  std::pair<double, double> operator()(int a1, int a2) const;
  double total(int a1, int a2) const;
  double min_total() const;
  double max_total() const;
};

struct ConflictParams {
  double r1 = 0.375;
  double r2 = 2.625;
  double alpha = 0.0;

  void validate() const;
};

struct PdParams {
  double temptation = 5.0;
  double reward = 3.0;
  double punishment = 1.0;
  double sucker = 0.0;
};

std::pair<double, double> conflict_payoff(int a1, int a2,
                                          const ConflictParams& params);
std::pair<double, double> pd_payoff(int a1, int a2,
                                    const PdParams& params = PdParams{});

// max(R1 + R2 - alpha, alpha): the best joint-action total.
double pareto_frontier(const ConflictParams& params);

Payoff2x2 conflict_matrix(const ConflictParams& params);
Payoff2x2 pd_matrix(const PdParams& params = PdParams{});

// Pure-strategy Nash equilibria by best-response enumeration.
std::vector<std::pair<int, int>> pure_nash_equilibria(const Payoff2x2& game);

/// Repeated one-shot matrix game run as a continuing task. The tabular
/// state is either a single stateless key or the previous joint action.
class MatrixGame final : public Environment {
 public:
  MatrixGame(Payoff2x2 payoff, std::string name, bool memory_one = false);

  std::string name() const override { return name_; }
  int num_agents() const override { return 2; }
  int num_env_actions() const override { return 2; }
  void reset(Rng& rng) override;
  StepOutcome step(std::span<const int> env_actions, Rng& rng) override;
  bool done() const override { return false; }
  int observation_size() const override { return 5; }
  std::vector<double> observe(AgentId agent,
                              const BalanceSheet& balance) const override;
  std::uint64_t state_key(AgentId agent) const override;
  double min_overall() const override { return payoff_.min_total(); }
  double max_overall() const override { return payoff_.max_total(); }
  std::string agent_group(AgentId) const override { return "-"; }

  const Payoff2x2& payoff() const { return payoff_; }

 private:
  Payoff2x2 payoff_;
  std::string name_;
  bool memory_one_;
  int last_joint_ = -1;
};

// Matrix game whose action space is extended by action-market offers.
// Only kNone and kActionMarket are supported; the shareholder market throws.
MarketGame market_extended_matrix_env(const Payoff2x2& base,
                                      const MarketConfig& config,
                                      bool memory_one = false);

}  // namespace smg
