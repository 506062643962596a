// Market layer: offer registration, trade
// matching, reward redistribution and liability settlement.
//
// Conventions used throughout:
//   * TradeMatrix(i, j) == 1 means agent i is the seller and j the buyer.
//   * BalanceSheet(i, j) is the amount agent i owes agent j.
//   * ShareRegistry(i, j) == 1 means agent i holds a share of agent j.
//   * A positive price is paid by the buyer to the seller; a negative price
//     is paid by the seller to the buyer.
#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "smg/core.h"

namespace smg {

template <typename T>
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(int n, T fill = T{})
      : n_(n), data_(static_cast<std::size_t>(n) * n, fill) {}

  int size() const { return n_; }
  T& operator()(int i, int j) { return data_[index(i, j)]; }
  const T& operator()(int i, int j) const { return data_[index(i, j)]; }
  std::span<const T> row_major() const { return data_; }
  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  bool operator==(const SquareMatrix&) const = default;

 private:
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * n_ + j;
  }
  int n_ = 0;
  std::vector<T> data_;
};

enum class MarketKind { kNone, kActionMarket, kShareholderMarket };

std::string to_string(MarketKind kind);
// Accepts "none", "action", "shareholder". Throws std::invalid_argument.
MarketKind parse_market_kind(const std::string& text);

struct MarketConfig {
  MarketKind kind = MarketKind::kNone;
  double price = 0.0;     // signed, reward units
  double dividend = 0.0;  // >= 0, per step
  bool allow_debt = false;

  void validate() const;
  bool operator==(const MarketConfig&) const = default;
};

/// N x N ledger of outstanding liabilities. Entries are never negative and
/// the diagonal is always zero.
class BalanceSheet {
 public:
  BalanceSheet() = default;
  explicit BalanceSheet(int n) : owed_(n, 0.0) {}

  int size() const { return owed_.size(); }
  double owed(int debtor, int creditor) const { return owed_(debtor, creditor); }
  void add(int debtor, int creditor, double amount);
  void clear_entry(int debtor, int creditor) { owed_(debtor, creditor) = 0.0; }

  double owed_by(int agent) const;  // row sum
  double owed_to(int agent) const;  // column sum
  double total() const;
  bool empty() const { return total() == 0.0; }
  std::span<const double> row_major() const { return owed_.row_major(); }

  bool operator==(const BalanceSheet&) const = default;

 private:
  SquareMatrix<double> owed_;
};

using TradeMatrix = SquareMatrix<std::uint8_t>;
using ShareRegistry = SquareMatrix<std::uint8_t>;

inline constexpr int kNoOffer = -1;

struct OfferMatrices {
  // Action market: env-action indices or kNoOffer. Shareholder: 0/1.
  SquareMatrix<int> sell;
  SquareMatrix<int> buy;
};

enum class ShareOp { kBuy, kSell };

struct ActionOffer {
  int target = 0;
  int action = 0;
  bool operator==(const ActionOffer&) const = default;
};

/// One agent's decoded joint action: environmental part plus market part.
struct MarketAction {
  int env_action = 0;
  std::optional<ActionOffer> offer;    // action market
  std::optional<ShareOp> share_op;     // shareholder market
  int share_target = -1;               // shareholder market

  bool operator==(const MarketAction&) const = default;
};

int action_market_space_size(int n_agents, int n_env_actions);
int shareholder_space_size(int n_agents, int n_env_actions);
int market_space_size(MarketKind kind, int n_agents, int n_env_actions);

// Indices [0, |A^e|) are plain actions; the rest enumerate
// (env_action, target != self, offered_action) lexicographically.
MarketAction decode_action_market(int index, int self, int n_agents,
                                  int n_env_actions);
int encode_action_market(const MarketAction& action, int self, int n_agents,
                         int n_env_actions);

// Lexicographic over (env_action, op, target). Buy with target == self is a
// no-op; Sell is a broadcast regardless of target.
MarketAction decode_shareholder(int index, int self, int n_agents,
                                int n_env_actions);
int encode_shareholder(const MarketAction& action, int self, int n_agents,
                       int n_env_actions);

MarketAction decode_market_action(MarketKind kind, int index, int self,
                                  int n_agents, int n_env_actions);
std::vector<MarketAction> decode_joint(MarketKind kind,
                                       std::span<const int> indices,
                                       int n_env_actions);

OfferMatrices register_offers(MarketKind kind,
                              std::span<const MarketAction> actions);

TradeMatrix compute_trades(const OfferMatrices& offers,
                           std::span<const int> env_actions, MarketKind kind);

struct MarketState {
  BalanceSheet balance;
  ShareRegistry shares;

  MarketState() = default;
  explicit MarketState(int n) : balance(n), shares(n, 0) {}
  bool operator==(const MarketState&) const = default;
};

struct Settlement {
  RewardVector rewards;
  BalanceSheet balance;
};

// Single ascending (debtor, creditor) pass. Without debt a liability is
// settled only when the debtor's current reward covers it.
Settlement settle_balances(RewardVector rewards, BalanceSheet balance,
                           bool allow_debt);

struct MarketOutcome {
  RewardVector rewards;
  MarketState state;
  TradeMatrix trades;
};

// Records liabilities and shares for `trades`, pays dividends, then settles.
// Throws std::invalid_argument on dimension mismatch.
MarketOutcome apply_trades(const TradeMatrix& trades, RewardVector rewards,
                           MarketState state, const MarketConfig& config);

MarketOutcome market_step(const MarketState& state,
                          std::span<const MarketAction> joint,
                          const RewardVector& rewards,
                          const MarketConfig& config);

int count_trades(const TradeMatrix& trades, int agent);

}  // namespace smg
