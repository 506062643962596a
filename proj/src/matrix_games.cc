#include "smg/matrix_games.h"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace smg {

namespace {

void check_binary(int a) {
  if (a != kCooperate && a != kDefect) {
    throw std::out_of_range("matrix game action must be C or D");
  }
}

}  // namespace

std::pair<double, double> Payoff2x2::operator()(int a1, int a2) const {
  check_binary(a1);
  check_binary(a2);
  return cells[a1][a2];
}

double Payoff2x2::total(int a1, int a2) const {
  auto [x, y] = (*this)(a1, a2);
  return x + y;
}

double Payoff2x2::min_total() const {
  double m = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) m = std::min(m, total(a, b));
  return m;
}

double Payoff2x2::max_total() const {
  double m = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) m = std::max(m, total(a, b));
  return m;
}

void ConflictParams::validate() const {
  if (!(r1 > 0.0 && r2 > 0.0)) {
    throw std::invalid_argument("conflict game requires R1, R2 > 0");
  }
  if (!(alpha >= 0.0)) {
    throw std::invalid_argument("conflict level must be non-negative");
  }
}

std::pair<double, double> conflict_payoff(int a1, int a2,
                                          const ConflictParams& params) {
  check_binary(a1);
  check_binary(a2);
  if (a1 == a2) return {params.r1, params.r2 - params.alpha};
  return {0.0, params.alpha};
}

std::pair<double, double> pd_payoff(int a1, int a2, const PdParams& params) {
  check_binary(a1);
  check_binary(a2);
  if (a1 == kCooperate && a2 == kCooperate) return {params.reward, params.reward};
  if (a1 == kDefect && a2 == kDefect) {
    return {params.punishment, params.punishment};
  }
  if (a1 == kCooperate) return {params.sucker, params.temptation};
  return {params.temptation, params.sucker};
}

double pareto_frontier(const ConflictParams& params) {
  // Summed the same way as the coordinated payoff cells.
  return std::max(params.r1 + (params.r2 - params.alpha), params.alpha);
}

Payoff2x2 conflict_matrix(const ConflictParams& params) {
  params.validate();
  Payoff2x2 g;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) g.cells[a][b] = conflict_payoff(a, b, params);
  return g;
}

Payoff2x2 pd_matrix(const PdParams& params) {
  Payoff2x2 g;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) g.cells[a][b] = pd_payoff(a, b, params);
  return g;
}

std::vector<std::pair<int, int>> pure_nash_equilibria(const Payoff2x2& game) {
  std::vector<std::pair<int, int>> out;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const bool row_best = game(a, b).first >= game(1 - a, b).first;
      const bool col_best = game(a, b).second >= game(a, 1 - b).second;
      if (row_best && col_best) out.emplace_back(a, b);
    }
  }
  return out;
}

MatrixGame::MatrixGame(Payoff2x2 payoff, std::string name, bool memory_one)
    : payoff_(payoff), name_(std::move(name)), memory_one_(memory_one) {}

void MatrixGame::reset(Rng&) { last_joint_ = -1; }

StepOutcome MatrixGame::step(std::span<const int> env_actions, Rng&) {
  check_actions(env_actions, 2, 2);
  auto [x, y] = payoff_(env_actions[0], env_actions[1]);
  last_joint_ = env_actions[0] * 2 + env_actions[1];
  return {{x, y}, false};
}

std::vector<double> MatrixGame::observe(AgentId agent,
                                        const BalanceSheet&) const {
  std::vector<double> obs(5, 0.0);
  obs[state_key(agent)] = 1.0;
  return obs;
}

std::uint64_t MatrixGame::state_key(AgentId) const {
  if (!memory_one_ || last_joint_ < 0) return 0;
  return 1 + static_cast<std::uint64_t>(last_joint_);
}

MarketGame market_extended_matrix_env(const Payoff2x2& base,
                                      const MarketConfig& config,
                                      bool memory_one) {
  if (config.kind == MarketKind::kShareholderMarket) {
    throw std::invalid_argument(
        "matrix games support only the action market");
  }
  return MarketGame(std::make_unique<MatrixGame>(base, "matrix", memory_one),
                    config);
}

}  // namespace smg
