// Stochastic-game primitives shared by every environment and learner.
#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace smg {

using Rng = std::mt19937_64;
using RewardVector = std::vector<double>;

/// Index of an agent in [0, N).
struct AgentId {
  int index = 0;
  constexpr explicit AgentId(int i) : index(i) {}
  constexpr operator int() const { return index; }
};

/// Discount factor gamma with 0 <= gamma < 1.
class DiscountFactor {
 public:
  explicit DiscountFactor(double gamma);
  double value() const { return gamma_; }

 private:
  double gamma_;
};

// Sum_t gamma^(t-1) r_t with t starting at 1. Empty input yields 0.
double discounted_return(std::span<const double> rewards, DiscountFactor gamma);

/// Rescales `value` into [0,1] using the bounds of the environment.
/// Throws std::invalid_argument when max_possible <= min_possible.
double normalize_return(double value, double min_possible, double max_possible);

// splitmix64 finalizer; used to derive independent seeds from a master seed.
std::uint64_t mix_seed(std::uint64_t x);

// Seed for stream `stream` of a run. Agent i uses stream i + 1, the
// environment uses stream 0, so changing N leaves existing streams intact.
std::uint64_t derive_seed(std::uint64_t run_seed, std::uint64_t stream);

struct StepOutcome {
  RewardVector rewards;
  bool done = false;
};

class BalanceSheet;

/// Environment side of a stochastic game: transition function plus one
/// reward function per agent. Instances are confined to one run.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual int num_agents() const = 0;
  virtual int num_env_actions() const = 0;

  virtual void reset(Rng& rng) = 0;
  // Throws std::out_of_range for invalid actions and std::logic_error when
  // called on a finished episode.
  virtual StepOutcome step(std::span<const int> env_actions, Rng& rng) = 0;
  virtual bool done() const = 0;

  virtual int observation_size() const = 0;
  virtual std::vector<double> observe(AgentId agent,
                                      const BalanceSheet& balance) const = 0;

  // Discrete state key for tabular learners.
  virtual std::uint64_t state_key(AgentId agent) const = 0;

  // Bounds of the summed (all-agent) reward used for normalisation. Matrix
  // games report per-step bounds, gridworlds per-episode bounds.
  virtual double min_overall() const = 0;
  virtual double max_overall() const = 0;

  // Group label of an agent ("high"/"low", "refiner"/"consumer", "-").
  virtual std::string agent_group(AgentId agent) const = 0;
};

void check_actions(std::span<const int> env_actions, int n_agents,
                   int n_env_actions);

}  // namespace smg
