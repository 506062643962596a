#include "smg/harness.h"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace smg {

namespace {

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

long steps_per_episode(const ExperimentConfig& c) {
  return c.is_matrix() ? c.steps : std::min(c.steps, c.grid.max_steps);
}

std::size_t window_count(std::size_t total, double fraction) {
  const auto n = static_cast<std::size_t>(std::floor(fraction * total + 1e-9));
  return std::clamp<std::size_t>(n, 1, std::max<std::size_t>(total, 1));
}

}  // namespace

std::unique_ptr<Environment> make_environment(const ExperimentConfig& c) {
  switch (c.env) {
    case EnvKind::kPrisonersDilemma:
      return std::make_unique<MatrixGame>(pd_matrix(), "pd", c.memory_one);
    case EnvKind::kConflict:
      return std::make_unique<MatrixGame>(
          conflict_matrix(ConflictParams{.alpha = c.conflict_alpha}), "conflict",
          c.memory_one);
    case EnvKind::kSmartfactory:
      return std::make_unique<Smartfactory>(c.grid);
    case EnvKind::kRefinery:
      return std::make_unique<Refinery>(c.grid);
  }
  throw std::invalid_argument("unknown environment");
}

std::unique_ptr<Learner> make_learner(const ExperimentConfig& c, int obs_size,
                                      int n_actions, Rng& init_rng) {
  switch (c.learner) {
    case LearnerKind::kTabular:
      return std::make_unique<TabularQAgent>(n_actions, c.tabular);
    case LearnerKind::kDqn: {
      DqnConfig d = c.dqn;
      const double total = static_cast<double>(c.episodes) * steps_per_episode(c);
      d.eps_horizon = static_cast<long>(std::llround(c.dqn_eps_fraction * total));
      return std::make_unique<DqnAgent>(obs_size, n_actions, d, init_rng);
    }
    case LearnerKind::kPpo:
      return std::make_unique<PpoAgent>(obs_size, n_actions, c.ppo, init_rng);
  }
  throw std::invalid_argument("unknown learner");
}

std::uint64_t run_seed_for(std::uint64_t master_seed, int run_id) {
  return derive_seed(master_seed, static_cast<std::uint64_t>(run_id));
}

RunResult run_training(const ExperimentConfig& config, int run_id,
                       std::uint64_t run_seed, const StepHook& hook) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();

  MarketGame game(make_environment(config), config.market);
  const int n = game.num_agents();
  const int n_env = game.env().num_env_actions();
  const int n_actions = game.action_space_size();
  const int obs_size = game.env().observation_size();

  RunResult result;
  result.run_id = run_id;
  result.run_seed = run_seed;
  for (int s = 0; s <= n; ++s) result.stream_seeds.push_back(derive_seed(run_seed, s));
  result.overall_min = game.env().min_overall();
  result.overall_max = game.env().max_overall();
  result.learner_reward_sum.assign(n, 0.0);

  Rng env_rng(result.stream_seeds[0]);
  std::vector<Rng> agent_rngs;
  std::vector<std::unique_ptr<Learner>> learners;
  for (int i = 0; i < n; ++i) {
    agent_rngs.emplace_back(result.stream_seeds[i + 1]);
    learners.push_back(make_learner(config, obs_size, n_actions, agent_rngs[i]));
  }

  const bool features = config.learner != LearnerKind::kTabular;
  auto view_of = [&](int i) {
    AgentView v;
    v.key = game.env().state_key(AgentId(i));
    if (features) v.features = game.observe(AgentId(i));
    return v;
  };

  const long horizon = steps_per_episode(config);
  std::vector<int> actions(n);
  std::vector<AgentView> current(n), next(n);

  for (int episode = 0; episode < config.episodes; ++episode) {
    game.reset(env_rng);
    std::vector<AgentEpisode> record(n);
    for (int i = 0; i < n; ++i) current[i] = view_of(i);

    for (long t = 0; t < horizon && !game.done(); ++t) {
      for (int i = 0; i < n; ++i) actions[i] = learners[i]->act(current[i], agent_rngs[i]);
      const MarketGameStep step = game.step(actions, env_rng);
      if (hook) hook(step);

      double raw_sum = 0.0, post_sum = 0.0;
      int step_trades = 0;
      for (int i = 0; i < n; ++i) {
        raw_sum += step.raw_rewards[i];
        post_sum += step.rewards[i];
        record[i].raw_return += step.raw_rewards[i];
        record[i].post_market_return += step.rewards[i];
        record[i].trades += step.trades[i];
        step_trades += step.trades[i];
      }
      result.max_step_conservation_error =
          std::max(result.max_step_conservation_error, std::abs(raw_sum - post_sum));
      result.total_trades += step_trades / 2;
      ++result.steps;

      for (int i = 0; i < n; ++i) next[i] = view_of(i);
      for (int i = 0; i < n; ++i) {
        learners[i]->observe(current[i], actions[i], step.rewards[i], next[i],
                             step.done, agent_rngs[i]);
        result.learner_reward_sum[i] += step.rewards[i];
      }
      if (config.is_matrix()) {
        result.step_overall.push_back(raw_sum);
        result.step_joint.push_back(
            static_cast<std::uint8_t>(step.env_actions[0] * 2 + step.env_actions[1]));
      }
      std::swap(current, next);
    }

    for (int i = 0; i < n; ++i) {
      record[i].liabilities = game.market_state().balance.owed_by(i);
    }
    result.episodes.push_back(std::move(record));
  }

  result.groups.resize(n);
  for (int i = 0; i < n; ++i) result.groups[i] = game.env().agent_group(AgentId(i));
  if (config.is_matrix()) {
    for (int i = 0; i < n; ++i) {
      const int idx = learners[i]->greedy_action(current[i]);
      result.final_greedy_env.push_back(
          decode_market_action(config.market.kind, idx, i, n, n_env).env_action);
    }
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

std::vector<RunResult> run_experiment(const ExperimentConfig& config) {
  config.validate();
  std::vector<RunResult> results(config.runs);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int k = next++; k < config.runs; k = next++) {
      const auto seed = run_seed_for(config.seed, k);
      try {
        results[k] = run_training(config, k, seed);
      } catch (const std::exception& e) {
        results[k] = RunResult{};
        results[k].run_id = k;
        results[k].run_seed = seed;
        results[k].error = e.what();
      }
    }
  };
  const int jobs = std::min(config.jobs, config.runs);
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return results;
}

// ---------------------------------------------------------------------------

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd m;
  m.n = values.size();
  if (values.empty()) return m;
  // Sorted summation keeps the result independent of run order.
  std::vector<double> v = values;
  std::sort(v.begin(), v.end());
  m.mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.stddev = std::sqrt(ss / (v.size() - 1));
  }
  return m;
}

double tail_mean(const std::vector<double>& series, std::size_t count) {
  if (series.empty() || count == 0) return 0.0;
  count = std::min(count, series.size());
  return std::accumulate(series.end() - count, series.end(), 0.0) / count;
}

double joint_rate(const std::vector<std::uint8_t>& joint, std::size_t count,
                  std::uint8_t code) {
  if (joint.empty() || count == 0) return 0.0;
  count = std::min(count, joint.size());
  return static_cast<double>(std::count(joint.end() - count, joint.end(), code)) /
         count;
}

double final_window_reward(const ExperimentConfig& config, const RunResult& run) {
  return tail_mean(run.step_overall,
                   window_count(run.step_overall.size(), config.final_window));
}

double normalized_score(const ExperimentConfig& config, const RunResult& run) {
  if (config.is_matrix()) {
    return normalize_return(final_window_reward(config, run), run.overall_min,
                            run.overall_max);
  }
  const std::size_t count = window_count(run.episodes.size(), config.final_window);
  double sum = 0.0;
  for (std::size_t e = run.episodes.size() - count; e < run.episodes.size(); ++e) {
    double total = 0.0;
    for (const auto& a : run.episodes[e]) total += a.raw_return;
    sum += normalize_return(total, run.overall_min, run.overall_max);
  }
  return sum / count;
}

AggregateStats aggregate(const ExperimentConfig& config,
                         const std::vector<RunResult>& runs) {
  AggregateStats s;
  std::vector<double> norm, reward, coop, trades;
  std::vector<RunResult> good;
  for (const auto& r : runs) {
    if (!r.ok()) {
      ++s.failed_runs;
      continue;
    }
    norm.push_back(normalized_score(config, r));
    trades.push_back(static_cast<double>(r.total_trades));
    if (config.is_matrix()) {
      reward.push_back(final_window_reward(config, r));
      coop.push_back(joint_rate(r.step_joint,
                                window_count(r.step_joint.size(), config.final_window),
                                0));
    }
    good.push_back(r);
  }
  s.normalized = mean_std(norm);
  s.final_reward = mean_std(reward);
  s.cooperation = mean_std(coop);
  s.trades = mean_std(trades);
  if (config.env == EnvKind::kSmartfactory || config.env == EnvKind::kRefinery) {
    const bool sf = config.env == EnvKind::kSmartfactory;
    const auto dist = distribution_analysis(good, sf ? "high" : "refiner",
                                            sf ? "low" : "consumer");
    std::vector<double> shares;
    for (const auto& p : dist.points) shares.push_back(p.first_share);
    s.high_share = mean_std(shares);
  }
  return s;
}

std::vector<SweepRow> conflict_sweep(const std::vector<double>& alphas,
                                     const ExperimentConfig& base) {
  std::vector<SweepRow> rows;
  for (double alpha : alphas) {
    ExperimentConfig c = base;
    c.env = EnvKind::kConflict;
    c.conflict_alpha = alpha;
    const auto runs = run_experiment(c);
    std::vector<double> values;
    for (const auto& r : runs) {
      if (r.ok()) values.push_back(final_window_reward(c, r));
    }
    rows.push_back({alpha, mean_std(values),
                    pareto_frontier(ConflictParams{.alpha = alpha})});
  }
  return rows;
}

DistributionResult distribution_analysis(const std::vector<RunResult>& runs,
                                         const std::string& first_group,
                                         const std::string& second_group) {
  DistributionResult out;
  for (const auto& r : runs) {
    double first = 0.0, second = 0.0, total = 0.0;
    for (const auto& ep : r.episodes) {
      for (std::size_t i = 0; i < ep.size(); ++i) {
        const double v = ep[i].post_market_return;
        total += v;
        if (r.groups[i] == first_group) first += v;
        else if (r.groups[i] == second_group) second += v;
      }
    }
    if (!(total > 0.0)) {
      ++out.excluded;
      continue;
    }
    out.points.push_back({r.run_id, first / total, second / total});
  }
  return out;
}

RankTest mann_whitney(const std::vector<double>& x, const std::vector<double>& y) {
  RankTest t;
  const std::size_t n1 = x.size(), n2 = y.size(), n = n1 + n2;
  if (n1 == 0 || n2 == 0) return t;
  std::vector<std::pair<double, int>> all;
  for (double v : x) all.push_back({v, 0});
  for (double v : y) all.push_back({v, 1});
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double r1 = 0.0, tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && all[j].first == all[i].first) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    const double ties = static_cast<double>(j - i);
    tie_term += ties * ties * ties - ties;
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].second == 0) r1 += rank;
    }
    i = j;
  }
  const double dn1 = n1, dn2 = n2, dn = n;
  t.u = r1 - dn1 * (dn1 + 1.0) / 2.0;
  const double mu = dn1 * dn2 / 2.0;
  const double var = dn1 * dn2 / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
  if (var <= 0.0) return t;
  const double diff = t.u - mu;
  const double corrected = std::max(std::abs(diff) - 0.5, 0.0);
  t.z = std::copysign(corrected / std::sqrt(var), diff);
  t.p_value = std::erfc(std::abs(t.z) / std::sqrt(2.0));
  return t;
}

std::vector<double> parse_range(const std::string& text) {
  auto num = [&](const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      throw std::invalid_argument("bad number '" + s + "' in '" + text + "'");
    }
    return v;
  };
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string p;
    while (std::getline(ss, p, ':')) parts.push_back(p);
    if (parts.size() != 3) throw std::invalid_argument("range must be start:stop:step");
    const double start = num(parts[0]), stop = num(parts[1]), step = num(parts[2]);
    if (!(step > 0.0) || stop < start) throw std::invalid_argument("empty range '" + text + "'");
    const auto count = static_cast<long>(std::floor((stop - start) / step + 1e-9)) + 1;
    for (long k = 0; k < count; ++k) out.push_back(start + k * step);
  } else {
    std::stringstream ss(text);
    std::string p;
    while (std::getline(ss, p, ',')) out.push_back(num(p));
  }
  if (out.empty()) throw std::invalid_argument("empty list '" + text + "'");
  return out;
}

// ---------------------------------------------------------------------------

void ensure_writable(const std::filesystem::path& path, bool force) {
  if (std::filesystem::exists(path) && !force) {
    throw std::runtime_error(path.string() + " exists; pass --force to overwrite");
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
}

void write_episode_csv(std::ostream& out, const std::vector<RunResult>& runs) {
  out << "run_id,episode,agent,group,raw_return,post_market_return,trades_made,"
         "liabilities_outstanding\n";
  for (const auto& r : runs) {
    for (std::size_t e = 0; e < r.episodes.size(); ++e) {
      for (std::size_t i = 0; i < r.episodes[e].size(); ++i) {
        const auto& a = r.episodes[e][i];
        out << r.run_id << ',' << e << ',' << i << ',' << r.groups[i] << ','
            << fmt(a.raw_return) << ',' << fmt(a.post_market_return) << ','
            << a.trades << ',' << fmt(a.liabilities) << '\n';
      }
    }
  }
}

std::vector<EpisodeRow> read_episode_csv(std::istream& in) {
  std::vector<EpisodeRow> rows;
  std::string line;
  if (!std::getline(in, line) || line.rfind("run_id,", 0) != 0) {
    throw std::runtime_error("not an episode CSV (missing header)");
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 8) {
      throw std::runtime_error("episode CSV line " + std::to_string(line_no) +
                               ": expected 8 fields");
    }
    try {
      EpisodeRow r;
      r.run_id = std::stoi(f[0]);
      r.episode = std::stoi(f[1]);
      r.agent = std::stoi(f[2]);
      r.group = f[3];
      r.values.raw_return = std::stod(f[4]);
      r.values.post_market_return = std::stod(f[5]);
      r.values.trades = std::stoi(f[6]);
      r.values.liabilities = std::stod(f[7]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw std::runtime_error("episode CSV line " + std::to_string(line_no) +
                               ": malformed number");
    }
  }
  return rows;
}

nlohmann::json summary_json(const ExperimentConfig& config,
                            const std::vector<RunResult>& runs,
                            const AggregateStats& stats) {
  auto ms = [](const MeanStd& m) {
    return nlohmann::json{{"mean", m.mean}, {"stddev", m.stddev}, {"n", m.n}};
  };
  nlohmann::json j;
  j["config"] = config_to_json(config);
  j["metrics"] = {{"normalized_return", ms(stats.normalized)},
                  {"trades", ms(stats.trades)}};
  if (config.is_matrix()) {
    j["metrics"]["final_window_reward"] = ms(stats.final_reward);
    j["metrics"]["cooperation_rate"] = ms(stats.cooperation);
  } else {
    j["metrics"]["first_group_share"] = ms(stats.high_share);
  }
  nlohmann::json seeds = nlohmann::json::array();
  nlohmann::json failed = nlohmann::json::array();
  for (const auto& r : runs) {
    seeds.push_back({{"run_id", r.run_id}, {"run_seed", r.run_seed},
                     {"streams", r.stream_seeds}});
    if (!r.ok()) failed.push_back({{"run_id", r.run_id}, {"error", r.error}});
  }
  j["seeds"] = {{"master", config.seed}, {"runs", seeds}};
  j["failed_runs"] = failed;
  return j;
}

void write_sweep_csv(std::ostream& out, const std::string& parameter_name,
                     const std::vector<SweepRow>& rows) {
  out << parameter_name << ",mean,stddev,frontier\n";
  for (const auto& r : rows) {
    out << fmt(r.parameter) << ',' << fmt(r.value.mean) << ','
        << fmt(r.value.stddev) << ',' << fmt(r.frontier) << '\n';
  }
}

}  // namespace smg
