#include "smg/core.h"

#include <algorithm>
#include <cmath>

namespace smg {

DiscountFactor::DiscountFactor(double gamma) : gamma_(gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("discount factor must lie in [0, 1)");
  }
}

double discounted_return(std::span<const double> rewards, DiscountFactor gamma) {
  double total = 0.0;
  double weight = 1.0;
  for (double r : rewards) {
    total += weight * r;
    weight *= gamma.value();
  }
  return total;
}

double normalize_return(double value, double min_possible, double max_possible) {
  if (!(max_possible > min_possible)) {
    throw std::invalid_argument("normalize_return: degenerate range");
  }
  if (value <= min_possible) return 0.0;
  if (value >= max_possible) return 1.0;
  return std::clamp((value - min_possible) / (max_possible - min_possible), 0.0,
                    1.0);
}

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t run_seed, std::uint64_t stream) {
  return mix_seed(run_seed + stream);
}

void check_actions(std::span<const int> env_actions, int n_agents,
                   int n_env_actions) {
  if (static_cast<int>(env_actions.size()) != n_agents) {
    throw std::out_of_range("expected one environment action per agent");
  }
  for (int a : env_actions) {
    if (a < 0 || a >= n_env_actions) {
      throw std::out_of_range("environment action index out of range");
    }
  }
}

}  // namespace smg
