#include "smg/market.h"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace smg {

std::string to_string(MarketKind kind) {
  switch (kind) {
    case MarketKind::kNone:
      return "none";
    case MarketKind::kActionMarket:
      return "action";
    case MarketKind::kShareholderMarket:
      return "shareholder";
  }
  return "none";
}

MarketKind parse_market_kind(const std::string& text) {
  if (text == "none") return MarketKind::kNone;
  if (text == "action") return MarketKind::kActionMarket;
  if (text == "shareholder") return MarketKind::kShareholderMarket;
  throw std::invalid_argument("unknown market kind: " + text);
}

void MarketConfig::validate() const {
  if (!(dividend >= 0.0)) {
    throw std::invalid_argument("market dividend must be non-negative");
  }
}

void BalanceSheet::add(int debtor, int creditor, double amount) {
  if (debtor == creditor) {
    throw std::invalid_argument("balance sheet: self liability");
  }
  if (amount < 0.0) {
    throw std::invalid_argument("balance sheet: negative liability");
  }
  owed_(debtor, creditor) += amount;
}

double BalanceSheet::owed_by(int agent) const {
  double s = 0.0;
  for (int j = 0; j < size(); ++j) s += owed_(agent, j);
  return s;
}

double BalanceSheet::owed_to(int agent) const {
  double s = 0.0;
  for (int i = 0; i < size(); ++i) s += owed_(i, agent);
  return s;
}

double BalanceSheet::total() const {
  auto v = owed_.row_major();
  return std::accumulate(v.begin(), v.end(), 0.0);
}

int action_market_space_size(int n_agents, int n_env_actions) {
  return n_env_actions + (n_agents - 1) * n_env_actions * n_env_actions;
}

int shareholder_space_size(int n_agents, int n_env_actions) {
  return n_env_actions * 2 * n_agents;
}

int market_space_size(MarketKind kind, int n_agents, int n_env_actions) {
  switch (kind) {
    case MarketKind::kNone:
      return n_env_actions;
    case MarketKind::kActionMarket:
      return action_market_space_size(n_agents, n_env_actions);
    case MarketKind::kShareholderMarket:
      return shareholder_space_size(n_agents, n_env_actions);
  }
  return n_env_actions;
}

MarketAction decode_action_market(int index, int self, int n_agents,
                                  int n_env_actions) {
  if (index < 0 || index >= action_market_space_size(n_agents, n_env_actions)) {
    throw std::out_of_range("action-market index out of range");
  }
  MarketAction out;
  if (index < n_env_actions) {
    out.env_action = index;
    return out;
  }
  const int k = index - n_env_actions;
  const int per_env = (n_agents - 1) * n_env_actions;
  out.env_action = k / per_env;
  const int rest = k % per_env;
  const int slot = rest / n_env_actions;
  out.offer = ActionOffer{slot < self ? slot : slot + 1, rest % n_env_actions};
  return out;
}

int encode_action_market(const MarketAction& action, int self, int n_agents,
                         int n_env_actions) {
  if (!action.offer) return action.env_action;
  const int slot =
      action.offer->target < self ? action.offer->target : action.offer->target - 1;
  return n_env_actions + action.env_action * (n_agents - 1) * n_env_actions +
         slot * n_env_actions + action.offer->action;
}

MarketAction decode_shareholder(int index, int self, int n_agents,
                                int n_env_actions) {
  (void)self;
  if (index < 0 || index >= shareholder_space_size(n_agents, n_env_actions)) {
    throw std::out_of_range("shareholder index out of range");
  }
  MarketAction out;
  out.env_action = index / (2 * n_agents);
  const int rest = index % (2 * n_agents);
  out.share_op = rest / n_agents == 0 ? ShareOp::kBuy : ShareOp::kSell;
  out.share_target = rest % n_agents;
  return out;
}

int encode_shareholder(const MarketAction& action, int self, int n_agents,
                       int n_env_actions) {
  (void)self;
  (void)n_env_actions;
  const int op = action.share_op == ShareOp::kSell ? 1 : 0;
  return action.env_action * 2 * n_agents + op * n_agents + action.share_target;
}

MarketAction decode_market_action(MarketKind kind, int index, int self,
                                  int n_agents, int n_env_actions) {
  switch (kind) {
    case MarketKind::kActionMarket:
      return decode_action_market(index, self, n_agents, n_env_actions);
    case MarketKind::kShareholderMarket:
      return decode_shareholder(index, self, n_agents, n_env_actions);
    case MarketKind::kNone:
      break;
  }
  if (index < 0 || index >= n_env_actions) {
    throw std::out_of_range("environment action index out of range");
  }
  MarketAction out;
  out.env_action = index;
  return out;
}

std::vector<MarketAction> decode_joint(MarketKind kind,
                                       std::span<const int> indices,
                                       int n_env_actions) {
  const int n = static_cast<int>(indices.size());
  std::vector<MarketAction> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    out.push_back(decode_market_action(kind, indices[i], i, n, n_env_actions));
  }
  return out;
}

OfferMatrices register_offers(MarketKind kind,
                              std::span<const MarketAction> actions) {
  const int n = static_cast<int>(actions.size());
  const int empty = kind == MarketKind::kActionMarket ? kNoOffer : 0;
  OfferMatrices offers{SquareMatrix<int>(n, empty), SquareMatrix<int>(n, empty)};
  for (int i = 0; i < n; ++i) {
    const MarketAction& a = actions[i];
    if (kind == MarketKind::kActionMarket) {
      for (int j = 0; j < n; ++j) {
        if (j != i) offers.sell(i, j) = a.env_action;
      }
      if (a.offer && a.offer->target != i) {
        offers.buy(i, a.offer->target) = a.offer->action;
      }
    } else if (kind == MarketKind::kShareholderMarket && a.share_op) {
      if (*a.share_op == ShareOp::kSell) {
        for (int j = 0; j < n; ++j) {
          if (j != i) offers.sell(i, j) = 1;
        }
      } else if (a.share_target != i && a.share_target >= 0) {
        offers.buy(i, a.share_target) = 1;
      }
    }
  }
  return offers;
}

TradeMatrix compute_trades(const OfferMatrices& offers,
                           std::span<const int> env_actions, MarketKind kind) {
  const int n = offers.sell.size();
  TradeMatrix trades(n, 0);
  if (kind == MarketKind::kNone) return trades;
  if (offers.buy.size() != n ||
      (kind == MarketKind::kActionMarket &&
       static_cast<int>(env_actions.size()) != n)) {
    throw std::invalid_argument("compute_trades: dimension mismatch");
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if (kind == MarketKind::kShareholderMarket) {
        trades(i, j) = offers.sell(i, j) == 1 && offers.buy(j, i) == 1;
      } else {
        trades(i, j) =
            offers.buy(j, i) != kNoOffer && offers.buy(j, i) == env_actions[i];
      }
    }
  }
  return trades;
}

namespace {

void record_price(BalanceSheet& balance, int seller, int buyer, double price) {
  if (price > 0.0) {
    balance.add(buyer, seller, price);
  } else if (price < 0.0) {
    balance.add(seller, buyer, -price);
  }
}

}  // namespace

Settlement settle_balances(RewardVector rewards, BalanceSheet balance,
                           bool allow_debt) {
  const int n = balance.size();
  if (static_cast<int>(rewards.size()) != n) {
    throw std::invalid_argument("settle_balances: dimension mismatch");
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double owed = balance.owed(i, j);
      if (owed <= 0.0) continue;
      if (allow_debt || rewards[i] >= owed) {
        rewards[i] -= owed;
        rewards[j] += owed;
        balance.clear_entry(i, j);
      }
    }
  }
  return {std::move(rewards), std::move(balance)};
}

MarketOutcome apply_trades(const TradeMatrix& trades, RewardVector rewards,
                           MarketState state, const MarketConfig& config) {
  const int n = trades.size();
  if (static_cast<int>(rewards.size()) != n || state.balance.size() != n ||
      state.shares.size() != n) {
    throw std::invalid_argument("apply_trades: dimension mismatch");
  }
  for (int seller = 0; seller < n; ++seller) {
    for (int buyer = 0; buyer < n; ++buyer) {
      if (!trades(seller, buyer)) continue;
      if (config.kind == MarketKind::kActionMarket) {
        record_price(state.balance, seller, buyer, config.price);
      } else if (config.kind == MarketKind::kShareholderMarket) {
        // The price is charged once, when the share changes hands.
        if (!state.shares(buyer, seller)) {
          state.shares(buyer, seller) = 1;
          record_price(state.balance, seller, buyer, config.price);
        }
      }
    }
  }

  if (config.kind == MarketKind::kShareholderMarket && config.dividend > 0.0) {
    for (int issuer = 0; issuer < n; ++issuer) {
      for (int holder = 0; holder < n; ++holder) {
        if (!state.shares(holder, issuer) || rewards[issuer] <= 0.0) continue;
        const double paid = std::min(config.dividend, rewards[issuer]);
        rewards[issuer] -= paid;
        rewards[holder] += paid;
      }
    }
  }

  auto settled =
      settle_balances(std::move(rewards), std::move(state.balance), config.allow_debt);
  state.balance = std::move(settled.balance);
  return {std::move(settled.rewards), std::move(state), trades};
}

MarketOutcome market_step(const MarketState& state,
                          std::span<const MarketAction> joint,
                          const RewardVector& rewards,
                          const MarketConfig& config) {
  const int n = static_cast<int>(joint.size());
  if (static_cast<int>(rewards.size()) != n) {
    throw std::invalid_argument("market_step: dimension mismatch");
  }
  if (config.kind == MarketKind::kNone) {
    return {rewards, state, TradeMatrix(n, 0)};
  }
  std::vector<int> env_actions(n);
  for (int i = 0; i < n; ++i) env_actions[i] = joint[i].env_action;
  const OfferMatrices offers = register_offers(config.kind, joint);
  const TradeMatrix trades = compute_trades(offers, env_actions, config.kind);
  return apply_trades(trades, rewards, state, config);
}

int count_trades(const TradeMatrix& trades, int agent) {
  int c = 0;
  for (int j = 0; j < trades.size(); ++j) {
    c += trades(agent, j) + trades(j, agent);
  }
  return c;
}

}  // namespace smg
