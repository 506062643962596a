#include "smg/learners.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace smg {

EpsilonSchedule::EpsilonSchedule(double start, double end, long horizon)
    : start_(start), end_(end), horizon_(horizon) {
  if (start < 0.0 || start > 1.0 || end < 0.0 || end > 1.0) {
    throw std::invalid_argument("epsilon must lie in [0, 1]");
  }
}

double EpsilonSchedule::value(long step) const {
  if (horizon_ <= 0 || step >= horizon_) return end_;
  const double frac = static_cast<double>(std::max(step, 0L)) /
                      static_cast<double>(horizon_);
  return start_ + (end_ - start_) * frac;
}

int argmax(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("argmax of empty range");
  int best = 0;
  for (int k = 1; k < static_cast<int>(values.size()); ++k) {
    if (values[k] > values[best]) best = k;
  }
  return best;
}

int epsilon_greedy(std::span<const double> q_values, double eps, Rng& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (u < eps) {
    return std::uniform_int_distribution<int>(
        0, static_cast<int>(q_values.size()) - 1)(rng);
  }
  return argmax(q_values);
}

std::span<const double> QTable::values(std::uint64_t state) const {
  auto it = table_.find(state);
  if (it == table_.end()) return zeros_;
  return it->second;
}

double QTable::get(std::uint64_t state, int action) const {
  return values(state)[action];
}

void QTable::set(std::uint64_t state, int action, double value) {
  auto [it, inserted] = table_.try_emplace(state, zeros_);
  it->second.at(action) = value;
}

double QTable::max_value(std::uint64_t state) const {
  const auto row = values(state);
  return *std::max_element(row.begin(), row.end());
}

void q_update(QTable& table, std::uint64_t state, int action, double reward,
              std::uint64_t next_state, bool terminal, double alpha,
              DiscountFactor gamma) {
  const double bootstrap = terminal ? 0.0 : gamma.value() * table.max_value(next_state);
  const double old = table.get(state, action);
  table.set(state, action, old + alpha * (reward + bootstrap - old));
}

TabularQAgent::TabularQAgent(int n_actions, TabularConfig config)
    : config_(config),
      schedule_(config.eps_start, config.eps_end, config.eps_horizon),
      table_(n_actions) {
  if (n_actions < 1) throw std::invalid_argument("need at least one action");
  if (config.alpha <= 0.0 || config.alpha > 1.0) {
    throw std::invalid_argument("alpha must lie in (0, 1]");
  }
}

int TabularQAgent::act(const AgentView& view, Rng& rng) {
  const double eps = schedule_.value(steps_);
  return epsilon_greedy(table_.values(view.key), eps, rng);
}

void TabularQAgent::observe(const AgentView& view, int action, double reward,
                            const AgentView& next, bool terminal, Rng&) {
  q_update(table_, view.key, action, reward, next.key, terminal, config_.alpha,
           DiscountFactor(config_.gamma));
  ++steps_;
}

int TabularQAgent::greedy_action(const AgentView& view) const {
  return argmax(table_.values(view.key));
}

// ---------------------------------------------------------------------------

double huber(double e) {
  const double a = std::abs(e);
  return a <= 1.0 ? 0.5 * e * e : a - 0.5;
}

double huber_grad(double e) { return std::clamp(e, -1.0, 1.0); }

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  Eigen::VectorXd p = (logits.array() - m).exp().matrix();
  return p / p.sum();
}

double entropy(const Eigen::VectorXd& probs) {
  double h = 0.0;
  for (int k = 0; k < probs.size(); ++k) {
    if (probs(k) > 0.0) h -= probs(k) * std::log(probs(k));
  }
  return h;
}

namespace {

void check_batch(const Eigen::MatrixXd& obs, std::size_t n) {
  if (obs.cols() == 0 || static_cast<std::size_t>(obs.cols()) != n) {
    throw std::invalid_argument("batch size mismatch");
  }
}

Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (int c = 0; c < logits.cols(); ++c) p.col(c) = softmax(logits.col(c));
  return p;
}

}  // namespace

double dqn_loss(const Mlp& online, const Eigen::MatrixXd& obs,
                std::span<const int> actions, std::span<const double> targets,
                MlpGradients* grad) {
  check_batch(obs, actions.size());
  check_batch(obs, targets.size());
  ForwardCache cache;
  const Eigen::MatrixXd q = online.forward(obs, grad ? &cache : nullptr);
  const double n = static_cast<double>(obs.cols());
  Eigen::MatrixXd upstream = Eigen::MatrixXd::Zero(q.rows(), q.cols());
  double loss = 0.0;
  for (int i = 0; i < q.cols(); ++i) {
    const double e = q(actions[i], i) - targets[i];
    loss += huber(e);
    upstream(actions[i], i) = huber_grad(e) / n;
  }
  if (grad) *grad = online.backward(cache, upstream);
  return loss / n;
}

double clipped_surrogate(double ratio, double advantage, double clip) {
  const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
  return std::min(ratio * advantage, clipped * advantage);
}

PpoLossTerms ppo_actor_loss(const Mlp& actor, const Eigen::MatrixXd& obs,
                            std::span<const int> actions,
                            std::span<const double> old_probs,
                            std::span<const double> advantages, double clip,
                            double entropy_coef, MlpGradients* grad) {
  check_batch(obs, actions.size());
  check_batch(obs, old_probs.size());
  check_batch(obs, advantages.size());
  ForwardCache cache;
  const Eigen::MatrixXd logits = actor.forward(obs, grad ? &cache : nullptr);
  const Eigen::MatrixXd probs = softmax_columns(logits);
  const double n = static_cast<double>(obs.cols());
  Eigen::MatrixXd upstream = Eigen::MatrixXd::Zero(logits.rows(), logits.cols());
  PpoLossTerms terms;
  for (int i = 0; i < logits.cols(); ++i) {
    const int a = actions[i];
    const double adv = advantages[i];
    const double ratio = probs(a, i) / old_probs[i];
    const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
    terms.surrogate += std::min(ratio * adv, clipped * adv);
    const Eigen::VectorXd p = probs.col(i);
    const double h = entropy(p);
    terms.entropy += h;
    if (!grad) continue;
    // The unclipped branch carries the gradient unless the clipped term is
    // strictly smaller, in which case it is constant in the parameters.
    const bool unclipped = ratio * adv <= clipped * adv;
    for (int k = 0; k < p.size(); ++k) {
      double d_surr = 0.0;
      if (unclipped) d_surr = adv * ratio * ((k == a ? 1.0 : 0.0) - p(k));
      const double d_ent = p(k) > 0.0 ? -p(k) * (std::log(p(k)) + h) : 0.0;
      upstream(k, i) = (-d_surr - entropy_coef * d_ent) / n;
    }
  }
  terms.surrogate /= n;
  terms.entropy /= n;
  terms.total = -terms.surrogate - entropy_coef * terms.entropy;
  if (grad) *grad = actor.backward(cache, upstream);
  return terms;
}

double critic_loss(const Mlp& critic, const Eigen::MatrixXd& obs,
                   std::span<const double> returns, MlpGradients* grad) {
  check_batch(obs, returns.size());
  ForwardCache cache;
  const Eigen::MatrixXd v = critic.forward(obs, grad ? &cache : nullptr);
  const double n = static_cast<double>(obs.cols());
  Eigen::MatrixXd upstream(1, v.cols());
  double loss = 0.0;
  for (int i = 0; i < v.cols(); ++i) {
    const double e = v(0, i) - returns[i];
    loss += e * e;
    upstream(0, i) = 2.0 * e / n;
  }
  if (grad) *grad = critic.backward(cache, upstream);
  return loss / n;
}

double ppo_ratio(const Mlp& actor, const Mlp& old_actor,
                 const Eigen::VectorXd& obs, int action) {
  const Eigen::VectorXd p = softmax(actor.forward(obs));
  const Eigen::VectorXd q = softmax(old_actor.forward(obs));
  return p(action) / q(action);
}

// ---------------------------------------------------------------------------

ReplayBuffer::ReplayBuffer(std::size_t capacity, int obs_size)
    : capacity_(capacity),
      obs_size_(obs_size),
      obs_(obs_size, static_cast<Eigen::Index>(capacity)),
      next_obs_(obs_size, static_cast<Eigen::Index>(capacity)),
      actions_(capacity),
      rewards_(capacity),
      done_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay capacity must be > 0");
}

void ReplayBuffer::push(std::span<const double> obs, int action, double reward,
                        std::span<const double> next_obs, bool done) {
  if (static_cast<int>(obs.size()) != obs_size_ ||
      static_cast<int>(next_obs.size()) != obs_size_) {
    throw std::invalid_argument("replay: observation size mismatch");
  }
  const auto col = static_cast<Eigen::Index>(next_);
  for (int r = 0; r < obs_size_; ++r) {
    obs_(r, col) = obs[r];
    next_obs_(r, col) = next_obs[r];
  }
  actions_[next_] = action;
  rewards_[next_] = reward;
  done_[next_] = done ? 1 : 0;
  next_ = (next_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

ReplayBuffer::Batch ReplayBuffer::sample(std::size_t batch_size, Rng& rng) const {
  if (size_ == 0) throw std::logic_error("replay: sampling from empty buffer");
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  Batch b;
  const auto n = static_cast<Eigen::Index>(batch_size);
  b.obs.resize(obs_size_, n);
  b.next_obs.resize(obs_size_, n);
  for (std::size_t i = 0; i < batch_size; ++i) {
    const std::size_t k = pick(rng);
    b.obs.col(static_cast<Eigen::Index>(i)) = obs_.col(static_cast<Eigen::Index>(k));
    b.next_obs.col(static_cast<Eigen::Index>(i)) =
        next_obs_.col(static_cast<Eigen::Index>(k));
    b.actions.push_back(actions_[k]);
    b.rewards.push_back(rewards_[k]);
    b.done.push_back(done_[k]);
  }
  return b;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<int> layer_sizes(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

DqnAgent::DqnAgent(int obs_size, int n_actions, DqnConfig config, Rng& init_rng)
    : config_(std::move(config)),
      online_(layer_sizes(obs_size, config_.hidden, n_actions), Activation::kElu,
              init_rng),
      target_(online_),
      optimizer_(online_, config_.lr),
      replay_(config_.buffer_capacity, obs_size),
      schedule_(config_.eps_start, config_.eps_end, config_.eps_horizon) {
  if (config_.batch_size == 0 || config_.target_sync_period < 1 ||
      config_.train_every < 1) {
    throw std::invalid_argument("DqnConfig: invalid periods");
  }
}

int DqnAgent::act(const AgentView& view, Rng& rng) {
  const double eps = schedule_.value(acts_++);
  const Eigen::VectorXd q = online_.forward(to_vector(view.features));
  return epsilon_greedy(std::span<const double>(q.data(), q.size()), eps, rng);
}

int DqnAgent::greedy_action(const AgentView& view) const {
  const Eigen::VectorXd q = online_.forward(to_vector(view.features));
  return argmax(std::span<const double>(q.data(), q.size()));
}

void DqnAgent::observe(const AgentView& view, int action, double reward,
                       const AgentView& next, bool terminal, Rng& rng) {
  replay_.push(view.features, action, reward, next.features, terminal);
  ++env_steps_;
  if (replay_.size() >= config_.batch_size && env_steps_ % config_.train_every == 0) {
    train_step(rng);
  }
  if (env_steps_ % config_.target_sync_period == 0) sync_target();
}

double DqnAgent::train_step(Rng& rng) {
  if (replay_.size() < config_.batch_size) {
    throw std::logic_error("DQN: not enough transitions for a batch");
  }
  const auto batch = replay_.sample(config_.batch_size, rng);
  const Eigen::MatrixXd next_q = target_.forward(batch.next_obs, nullptr);
  std::vector<double> targets(batch.actions.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double boot =
        batch.done[i] ? 0.0 : next_q.col(static_cast<Eigen::Index>(i)).maxCoeff();
    targets[i] = batch.rewards[i] + config_.gamma * boot;
  }
  MlpGradients g;
  const double loss = dqn_loss(online_, batch.obs, batch.actions, targets, &g);
  optimizer_.step(online_, g);
  return loss;
}

// ---------------------------------------------------------------------------

PpoAgent::PpoAgent(int obs_size, int n_actions, PpoConfig config, Rng& init_rng)
    : config_(std::move(config)),
      actor_(layer_sizes(obs_size, config_.hidden, n_actions), Activation::kTanh,
             init_rng),
      old_actor_(actor_),
      critic_(layer_sizes(obs_size, config_.hidden, 1), Activation::kTanh, init_rng),
      actor_opt_(actor_, config_.lr),
      critic_opt_(critic_, config_.lr) {
  if (config_.update_period == 0 || config_.epochs < 1) {
    throw std::invalid_argument("PpoConfig: invalid update schedule");
  }
}

int PpoAgent::act(const AgentView& view, Rng& rng) {
  const Eigen::VectorXd p = softmax(actor_.forward(to_vector(view.features)));
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (int k = 0; k < p.size(); ++k) {
    acc += p(k);
    if (u < acc) return k;
  }
  return static_cast<int>(p.size()) - 1;
}

int PpoAgent::greedy_action(const AgentView& view) const {
  const Eigen::VectorXd logits = actor_.forward(to_vector(view.features));
  return argmax(std::span<const double>(logits.data(), logits.size()));
}

void PpoAgent::observe(const AgentView& view, int action, double reward,
                       const AgentView& next, bool terminal, Rng&) {
  obs_.push_back(view.features);
  actions_.push_back(action);
  rewards_.push_back(reward);
  done_.push_back(terminal ? 1 : 0);
  last_next_ = next.features;
  if (actions_.size() >= config_.update_period) update();
}

PpoLosses PpoAgent::update() {
  const std::size_t n = actions_.size();
  if (n == 0) throw std::logic_error("PPO: empty rollout");
  const int d = actor_.input_size();
  Eigen::MatrixXd obs(d, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    obs.col(static_cast<Eigen::Index>(i)) = to_vector(obs_[i]);
  }

  // Discounted returns; a rollout cut mid-episode bootstraps from the critic.
  std::vector<double> returns(n);
  double g = 0.0;
  if (!done_.back() && !last_next_.empty()) {
    g = critic_.forward(to_vector(last_next_))(0);
  }
  for (std::size_t i = n; i-- > 0;) {
    if (done_[i]) g = 0.0;
    g = rewards_[i] + config_.gamma * g;
    returns[i] = g;
  }

  const Eigen::MatrixXd values = critic_.forward(obs, nullptr);
  std::vector<double> adv(n);
  for (std::size_t i = 0; i < n; ++i) {
    adv[i] = returns[i] - values(0, static_cast<Eigen::Index>(i));
  }
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / n);
  for (double& a : adv) a = (a - mean) / (sd + 1e-8);

  const Eigen::MatrixXd old_probs_all = softmax_columns(old_actor_.forward(obs, nullptr));
  std::vector<double> old_probs(n);
  for (std::size_t i = 0; i < n; ++i) {
    old_probs[i] = old_probs_all(actions_[i], static_cast<Eigen::Index>(i));
  }

  PpoLosses losses;
  for (int epoch = 0; epoch < config_.epochs; ++epoch) {
    MlpGradients ga;
    const auto terms = ppo_actor_loss(actor_, obs, actions_, old_probs, adv,
                                      config_.clip, config_.entropy_coef, &ga);
    actor_opt_.step(actor_, ga);
    MlpGradients gc;
    const double vloss = critic_loss(critic_, obs, returns, &gc);
    for (auto& w : gc.weights) w *= config_.value_coef;
    for (auto& b : gc.bias) b *= config_.value_coef;
    critic_opt_.step(critic_, gc);
    losses = {terms.total, vloss, terms.entropy};
  }

  old_actor_ = actor_;
  obs_.clear();
  actions_.clear();
  rewards_.clear();
  done_.clear();
  last_next_.clear();
  ++updates_;
  return losses;
}

}  // namespace smg
