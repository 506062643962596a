// Brute-force reference for one market step. Works on raw action indices and
// per-pair loops only; shares nothing with the library beyond the config.
#pragma once

#include <algorithm>
#include <array>
#include <vector>

#include "smg/market.h"

namespace oracle {

struct Decoded {
  int env = 0;
  // action market
  bool has_offer = false;
  int target = -1;
  int wanted = -1;
  // shareholder market
  bool sells = false;
  int buys_from = -1;
};

inline Decoded decode(smg::MarketKind kind, int index, int self, int n, int n_env) {
  Decoded d;
  if (kind == smg::MarketKind::kActionMarket) {
    if (index < n_env) {
      d.env = index;
      return d;
    }
    int k = index - n_env;
    const int per_env = (n - 1) * n_env;
    d.env = k / per_env;
    k %= per_env;
    int other = k / n_env;
    d.target = other < self ? other : other + 1;
    d.wanted = k % n_env;
    d.has_offer = true;
  } else if (kind == smg::MarketKind::kShareholderMarket) {
    d.env = index / (2 * n);
    const int op = (index / n) % 2;
    const int target = index % n;
    if (op == 1) d.sells = true;
    else if (target != self) d.buys_from = target;
  } else {
    d.env = index;
  }
  return d;
}

constexpr int kMaxAgents = 5;

template <typename T>
using Grid = std::array<std::array<T, kMaxAgents>, kMaxAgents>;

struct Result {
  std::array<double, kMaxAgents> rewards{};
  Grid<double> owed{};  // owed[i][j]: i owes j
  Grid<int> holds{};    // holds[i][j]: i holds a share of j
  Grid<int> trade{};    // trade[seller][buyer]
};

inline Result step(smg::MarketKind kind, const std::vector<Decoded>& d,
                   const std::vector<double>& start_rewards, Grid<double> owed,
                   Grid<int> holds, double price, double dividend, bool allow_debt) {
  const int n = static_cast<int>(d.size());
  Result out;
  std::array<double, kMaxAgents> rewards{};
  for (int i = 0; i < n; ++i) rewards[i] = start_rewards[i];

  if (kind != smg::MarketKind::kNone) {
    for (int seller = 0; seller < n; ++seller) {
      for (int buyer = 0; buyer < n; ++buyer) {
        if (seller == buyer) continue;
        bool matched = false;
        if (kind == smg::MarketKind::kActionMarket) {
          matched = d[buyer].has_offer && d[buyer].target == seller &&
                    d[buyer].wanted == d[seller].env;
        } else {
          matched = d[seller].sells && d[buyer].buys_from == seller;
        }
        if (!matched) continue;
        out.trade[seller][buyer] = 1;
        bool charge = true;
        if (kind == smg::MarketKind::kShareholderMarket) {
          charge = holds[buyer][seller] == 0;
          holds[buyer][seller] = 1;
        }
        if (!charge) continue;
        if (price > 0) owed[buyer][seller] += price;
        if (price < 0) owed[seller][buyer] += -price;
      }
    }

    if (kind == smg::MarketKind::kShareholderMarket) {
      for (int issuer = 0; issuer < n; ++issuer) {
        for (int holder = 0; holder < n; ++holder) {
          if (holds[holder][issuer] && rewards[issuer] > 0) {
            const double amount = std::min(dividend, rewards[issuer]);
            rewards[issuer] -= amount;
            rewards[holder] += amount;
          }
        }
      }
    }

    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double l = owed[i][j];
        if (l > 0 && (allow_debt || rewards[i] >= l)) {
          rewards[i] -= l;
          rewards[j] += l;
          owed[i][j] = 0;
        }
      }
    }
  }
  out.rewards = rewards;
  out.owed = owed;
  out.holds = holds;
  return out;
}

inline std::vector<Decoded> decode_all(smg::MarketKind kind,
                                       const std::vector<int>& indices, int n_env) {
  const int n = static_cast<int>(indices.size());
  std::vector<Decoded> d;
  for (int i = 0; i < n; ++i) d.push_back(decode(kind, indices[i], i, n, n_env));
  return d;
}

// Compares the library's market_step with the oracle for one case.
inline bool agrees(smg::MarketKind kind, const std::vector<Decoded>& decoded,
                   const std::vector<smg::MarketAction>& joint,
                   const std::vector<double>& rewards, const smg::MarketState& state,
                   const smg::MarketConfig& config) {
  const int n = static_cast<int>(decoded.size());
  Grid<double> owed{};
  Grid<int> holds{};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      owed[i][j] = state.balance.owed(i, j);
      holds[i][j] = state.shares(i, j);
    }
  }
  const auto expect = step(kind, decoded, rewards, owed, holds, config.price,
                           config.dividend, config.allow_debt);
  const auto got = smg::market_step(state, joint, rewards, config);
  for (int i = 0; i < n; ++i) {
    if (got.rewards[i] != expect.rewards[i]) return false;
    for (int j = 0; j < n; ++j) {
      if (got.state.balance.owed(i, j) != expect.owed[i][j]) return false;
      if (got.state.shares(i, j) != expect.holds[i][j]) return false;
      if (got.trades(i, j) != expect.trade[i][j]) return false;
    }
  }
  return true;
}

inline bool agrees(smg::MarketKind kind, const std::vector<int>& indices, int n_env,
                   const std::vector<double>& rewards, const smg::MarketState& state,
                   const smg::MarketConfig& config) {
  return agrees(kind, decode_all(kind, indices, n_env),
                smg::decode_joint(kind, indices, n_env), rewards, state, config);
}

struct SweepCount {
  long cases = 0;
  long mismatches = 0;
};

// Every joint action and reward vector over {-1, 0, 1, 5} for N <= 3 and
// |A^e| <= 3, for both market kinds. Each price setting starts either from an
// empty state or from one with shares held and liabilities outstanding.
struct Setting {
  smg::MarketKind kind;
  double price;
  double dividend;
  bool debt;
  bool rich_start;
};

inline const std::vector<Setting>& all_settings() {
  static const std::vector<Setting> s = {
      {smg::MarketKind::kActionMarket, -1.9, 0.0, false, false},
      {smg::MarketKind::kShareholderMarket, 0.5, 1.0, false, true},
      {smg::MarketKind::kActionMarket, 1.5, 0.0, true, true},
      {smg::MarketKind::kShareholderMarket, -0.75, 2.0, false, false},
  };
  return s;
}

inline SweepCount exhaustive_sweep(const std::vector<Setting>& settings) {
  SweepCount count;
  const double reward_values[] = {-1.0, 0.0, 1.0, 5.0};
  for (int n = 2; n <= 3; ++n) {
    for (int n_env = 1; n_env <= 3; ++n_env) {
      for (const auto& s : settings) {
        smg::MarketConfig config{s.kind, s.price, s.dividend, s.debt};
        const int space = smg::market_space_size(s.kind, n, n_env);
        smg::MarketState start(n);
        for (int i = 0; i < n && s.rich_start; ++i) {
          for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            start.shares(i, j) = (i + j) % 2;
            start.balance.add(i, j, 0.5 + i + 0.25 * j);
          }
        }
        int joint_count = 1;
        for (int i = 0; i < n; ++i) joint_count *= space;
        int reward_count = 1;
        for (int i = 0; i < n; ++i) reward_count *= 4;
        std::vector<int> idx(n);
        std::vector<double> rewards(n);
        for (int code = 0; code < joint_count; ++code) {
          int c = code;
          for (int i = 0; i < n; ++i) {
            idx[i] = c % space;
            c /= space;
          }
          const auto decoded = decode_all(s.kind, idx, n_env);
          const auto joint = smg::decode_joint(s.kind, idx, n_env);
          for (int rcode = 0; rcode < reward_count; ++rcode) {
            int r = rcode;
            for (int i = 0; i < n; ++i) {
              rewards[i] = reward_values[r % 4];
              r /= 4;
            }
            ++count.cases;
            if (!agrees(s.kind, decoded, joint, rewards, start, config)) ++count.mismatches;
          }
        }
      }
    }
  }
  return count;
}

}  // namespace oracle
