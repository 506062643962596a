// Independent learners: tabular Q-learning, DQN and PPO.
#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "smg/core.h"
#include "smg/nn.h"

namespace smg {

/// Linear per-step decay from `start` to `end` over `horizon` steps.
class EpsilonSchedule {
 public:
  EpsilonSchedule(double start = 1.0, double end = 0.1, long horizon = 2000);
  double value(long step) const;

 private:
  double start_, end_;
  long horizon_;
};

// With probability eps a uniform action, otherwise the argmax with
// lowest-index tie-breaking. Always consumes exactly one uniform draw first.
int epsilon_greedy(std::span<const double> q_values, double eps, Rng& rng);
int argmax(std::span<const double> values);

class QTable {
 public:
  explicit QTable(int n_actions) : n_actions_(n_actions) {}

  int num_actions() const { return n_actions_; }
  // Zero-initialised row for unseen states.
  std::span<const double> values(std::uint64_t state) const;
  double get(std::uint64_t state, int action) const;
  void set(std::uint64_t state, int action, double value);
  double max_value(std::uint64_t state) const;
  std::size_t num_states() const { return table_.size(); }
  const std::unordered_map<std::uint64_t, std::vector<double>>& raw() const {
    return table_;
  }

 private:
  int n_actions_;
  std::unordered_map<std::uint64_t, std::vector<double>> table_;
  std::vector<double> zeros_ = std::vector<double>(n_actions_, 0.0);
};

// Q(s,a) <- Q(s,a) + alpha [r + gamma max_a' Q(s',a') - Q(s,a)];
// the bootstrap term is dropped for terminal transitions.
void q_update(QTable& table, std::uint64_t state, int action, double reward,
              std::uint64_t next_state, bool terminal, double alpha,
              DiscountFactor gamma);

/// What an agent sees at a decision point.
struct AgentView {
  std::uint64_t key = 0;
  std::vector<double> features;
};

/// Learner interface used by the training loop. `act` is followed by exactly
/// one `observe` carrying the reward that agent received for that action.
class Learner {
 public:
  virtual ~Learner() = default;
  virtual int act(const AgentView& view, Rng& rng) = 0;
  virtual void observe(const AgentView& view, int action, double reward,
                       const AgentView& next, bool terminal, Rng& rng) = 0;
  virtual int num_actions() const = 0;
  // Action the current policy prefers, without exploration.
  virtual int greedy_action(const AgentView& view) const = 0;
};

struct TabularConfig {
  double alpha = 0.1;
  double gamma = 0.9;
  double eps_start = 1.0;
  double eps_end = 0.1;
  long eps_horizon = 2000;
};

class TabularQAgent final : public Learner {
 public:
  TabularQAgent(int n_actions, TabularConfig config);
  int act(const AgentView& view, Rng& rng) override;
  void observe(const AgentView& view, int action, double reward,
               const AgentView& next, bool terminal, Rng& rng) override;
  int num_actions() const override { return table_.num_actions(); }
  int greedy_action(const AgentView& view) const override;
  const QTable& table() const { return table_; }
  long steps() const { return steps_; }

 private:
  TabularConfig config_;
  EpsilonSchedule schedule_;
  QTable table_;
  long steps_ = 0;
};

// ---------------------------------------------------------------------------
// Loss functions shared by the deep learners. Each returns the loss value
// and, when `grad` is non-null, its exact parameter gradient.

double huber(double e);
double huber_grad(double e);

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);
double entropy(const Eigen::VectorXd& probs);

// Mean Huber loss of Q(s, a) against fixed targets. Columns of `obs` are
// samples.
double dqn_loss(const Mlp& online, const Eigen::MatrixXd& obs,
                std::span<const int> actions, std::span<const double> targets,
                MlpGradients* grad);

struct PpoLossTerms {
  double total = 0.0;      // -surrogate - entropy_coef * entropy
  double surrogate = 0.0;  // mean clipped surrogate (to be maximised)
  double entropy = 0.0;    // mean policy entropy
};

// Per-sample clipped surrogate min(r A, clip(r, 1-eps, 1+eps) A).
double clipped_surrogate(double ratio, double advantage, double clip);

PpoLossTerms ppo_actor_loss(const Mlp& actor, const Eigen::MatrixXd& obs,
                            std::span<const int> actions,
                            std::span<const double> old_probs,
                            std::span<const double> advantages, double clip,
                            double entropy_coef, MlpGradients* grad);

// Mean squared error of the critic against `returns`.
double critic_loss(const Mlp& critic, const Eigen::MatrixXd& obs,
                   std::span<const double> returns, MlpGradients* grad);

// pi_theta(a|s) / pi_old(a|s) with categorical policies over the outputs.
double ppo_ratio(const Mlp& actor, const Mlp& old_actor,
                 const Eigen::VectorXd& obs, int action);

// ---------------------------------------------------------------------------

/// Uniform-sampling ring buffer of (s, a, r, s', done) transitions.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, int obs_size);

  void push(std::span<const double> obs, int action, double reward,
            std::span<const double> next_obs, bool done);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }

  struct Batch {
    Eigen::MatrixXd obs;       // obs_size x B
    Eigen::MatrixXd next_obs;  // obs_size x B
    std::vector<int> actions;
    std::vector<double> rewards;
    std::vector<std::uint8_t> done;
  };
  Batch sample(std::size_t batch_size, Rng& rng) const;

 private:
  std::size_t capacity_;
  int obs_size_;
  std::size_t size_ = 0, next_ = 0;
  Eigen::MatrixXd obs_, next_obs_;
  std::vector<int> actions_;
  std::vector<double> rewards_;
  std::vector<std::uint8_t> done_;
};

struct DqnConfig {
  std::vector<int> hidden = {32, 16};
  double lr = 0.0005;
  double gamma = 0.99;
  std::size_t buffer_capacity = 10000;
  std::size_t batch_size = 32;
  long target_sync_period = 500;
  double eps_start = 1.0;
  double eps_end = 0.1;
  long eps_horizon = 10000;
  long train_every = 1;
};

class DqnAgent final : public Learner {
 public:
  DqnAgent(int obs_size, int n_actions, DqnConfig config, Rng& init_rng);

  int act(const AgentView& view, Rng& rng) override;
  void observe(const AgentView& view, int action, double reward,
               const AgentView& next, bool terminal, Rng& rng) override;
  int num_actions() const override { return online_.output_size(); }
  int greedy_action(const AgentView& view) const override;

  // One optimiser step on a uniformly sampled minibatch. Throws
  // std::logic_error when the buffer holds fewer than batch_size entries.
  double train_step(Rng& rng);
  void sync_target() { target_ = online_; }

  const Mlp& online() const { return online_; }
  const Mlp& target() const { return target_; }
  ReplayBuffer& replay() { return replay_; }
  long env_steps() const { return env_steps_; }

 private:
  DqnConfig config_;
  Mlp online_, target_;
  Adam optimizer_;
  ReplayBuffer replay_;
  EpsilonSchedule schedule_;
  long env_steps_ = 0;
  long acts_ = 0;
};

struct PpoConfig {
  std::vector<int> hidden = {32, 32};
  double lr = 0.002;
  double gamma = 0.99;
  double clip = 0.2;
  double entropy_coef = 0.01;
  double value_coef = 1.0;
  int epochs = 4;
  std::size_t update_period = 5000;
};

struct PpoLosses {
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
};

class PpoAgent final : public Learner {
 public:
  PpoAgent(int obs_size, int n_actions, PpoConfig config, Rng& init_rng);

  int act(const AgentView& view, Rng& rng) override;
  void observe(const AgentView& view, int action, double reward,
               const AgentView& next, bool terminal, Rng& rng) override;
  int num_actions() const override { return actor_.output_size(); }
  int greedy_action(const AgentView& view) const override;

  // Monte-Carlo returns minus critic baseline, normalised advantages,
  // `epochs` full-batch steps, then the old actor is refreshed. Throws
  // std::logic_error on an empty rollout.
  PpoLosses update();

  const Mlp& actor() const { return actor_; }
  const Mlp& old_actor() const { return old_actor_; }
  const Mlp& critic() const { return critic_; }
  std::size_t rollout_size() const { return actions_.size(); }
  int updates() const { return updates_; }

 private:
  PpoConfig config_;
  Mlp actor_, old_actor_, critic_;
  Adam actor_opt_, critic_opt_;
  std::vector<std::vector<double>> obs_;
  std::vector<int> actions_;
  std::vector<double> rewards_;
  std::vector<std::uint8_t> done_;
  std::vector<double> last_next_;
  int updates_ = 0;
};

}  // namespace smg
