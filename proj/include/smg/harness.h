// Training loop, multi-run experiments, aggregation and result files.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "smg/gridworld.h"
#include "smg/learners.h"
#include "smg/market.h"
#include "smg/market_game.h"
#include "smg/matrix_games.h"

namespace smg {

enum class EnvKind { kPrisonersDilemma, kConflict, kSmartfactory, kRefinery };
enum class LearnerKind { kTabular, kDqn, kPpo };

std::string to_string(EnvKind kind);
std::string to_string(LearnerKind kind);
EnvKind parse_env_kind(const std::string& text);
LearnerKind parse_learner_kind(const std::string& text);

struct ExperimentConfig {
  EnvKind env = EnvKind::kPrisonersDilemma;
  double conflict_alpha = 0.0;
  bool memory_one = false;
  GridConfig grid;

  LearnerKind learner = LearnerKind::kTabular;
  TabularConfig tabular;
  DqnConfig dqn;
  double dqn_eps_fraction = 0.1;  // share of all training steps spent decaying
  PpoConfig ppo;

  MarketConfig market;

  int episodes = 1;
  int steps = 4000;  // per episode; gridworlds also stop at grid.max_steps
  int runs = 1;
  std::uint64_t seed = 0;
  int jobs = 1;
  double final_window = 0.25;  // tail fraction of steps used by matrix metrics
  std::string output;

  bool is_matrix() const {
    return env == EnvKind::kPrisonersDilemma || env == EnvKind::kConflict;
  }
  // Throws std::invalid_argument on inconsistent settings.
  void validate() const;
  bool operator==(const ExperimentConfig&) const;
};

// Flat "key = value" text, '#' starts a comment. Unknown keys and malformed
// values throw std::invalid_argument.
void apply_config_text(ExperimentConfig& config, const std::string& text);
void apply_config_value(ExperimentConfig& config, const std::string& key,
                        const std::string& value);
std::string config_to_text(const ExperimentConfig& config);
std::vector<std::string> config_keys();

nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& j);

std::unique_ptr<Environment> make_environment(const ExperimentConfig& config);
std::unique_ptr<Learner> make_learner(const ExperimentConfig& config,
                                      int obs_size, int n_actions,
                                      Rng& init_rng);

struct AgentEpisode {
  double raw_return = 0.0;
  double post_market_return = 0.0;
  int trades = 0;
  double liabilities = 0.0;  // owed by the agent when the episode ended
};

struct RunResult {
  int run_id = 0;
  std::uint64_t run_seed = 0;
  std::vector<std::uint64_t> stream_seeds;  // env, then one per agent
  std::vector<std::string> groups;          // per agent, from the last episode
  std::vector<std::vector<AgentEpisode>> episodes;  // [episode][agent]
  double overall_min = 0.0;  // bounds of the summed reward (per step or episode)
  double overall_max = 1.0;
  // Matrix games only: per-step overall reward and joint env action a1*2+a2.
  std::vector<double> step_overall;
  std::vector<std::uint8_t> step_joint;
  std::vector<int> final_greedy_env;  // matrix games: greedy env action per agent
  std::vector<double> learner_reward_sum;  // rewards handed to each learner
  double max_step_conservation_error = 0.0;
  long total_trades = 0;
  long steps = 0;
  double wall_seconds = 0.0;
  std::string error;  // non-empty if the run failed

  bool ok() const { return error.empty(); }
};

using StepHook = std::function<void(const MarketGameStep&)>;

// One independent run: each step every agent acts, the environment and then
// the market produce rewards, and each learner trains on its post-market
// reward. Episode boundaries reset environment, balance sheet and shares.
RunResult run_training(const ExperimentConfig& config, int run_id,
                       std::uint64_t run_seed, const StepHook& hook = {});

std::uint64_t run_seed_for(std::uint64_t master_seed, int run_id);

// n_runs runs on up to config.jobs threads; results are ordered by run id.
// Failed runs carry their error message.
std::vector<RunResult> run_experiment(const ExperimentConfig& config);

// ---------------------------------------------------------------------------
// Metrics

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for one value
  std::size_t n = 0;
};
MeanStd mean_std(const std::vector<double>& values);

double tail_mean(const std::vector<double>& series, std::size_t count);
double joint_rate(const std::vector<std::uint8_t>& joint, std::size_t count,
                  std::uint8_t code);

// Per-run headline metric in [0,1]. Matrix games: mean overall reward over the
// final window, normalised by the per-step bounds. Gridworlds: mean over
// episodes of the normalised overall episode return.
double normalized_score(const ExperimentConfig& config, const RunResult& run);
// Mean per-step overall reward over the final window (matrix games).
double final_window_reward(const ExperimentConfig& config, const RunResult& run);

struct AggregateStats {
  MeanStd normalized;
  MeanStd final_reward;      // matrix games
  MeanStd cooperation;       // fraction of (C,C) in the final window
  MeanStd high_share;        // gridworlds with priority labels
  MeanStd trades;
  std::size_t failed_runs = 0;
};
AggregateStats aggregate(const ExperimentConfig& config,
                         const std::vector<RunResult>& runs);

struct SweepRow {
  double parameter = 0.0;
  MeanStd value;
  double frontier = 0.0;
};

// Conflict game, one experiment per alpha; value is the mean per-step overall
// reward over the final window.
std::vector<SweepRow> conflict_sweep(const std::vector<double>& alphas,
                                     const ExperimentConfig& base);

struct SharePoint {
  int run_id = 0;
  double first_share = 0.0;   // high priority (or refiner) share
  double second_share = 0.0;  // low priority (or consumer) share
};

struct DistributionResult {
  std::vector<SharePoint> points;
  int excluded = 0;  // runs whose summed return was not positive
};

// Post-market reward shares of the two agent groups, summed over all
// episodes of each run.
DistributionResult distribution_analysis(const std::vector<RunResult>& runs,
                                         const std::string& first_group,
                                         const std::string& second_group);

struct RankTest {
  double u = 0.0;
  double z = 0.0;
  double p_value = 1.0;  // two-sided, normal approximation with tie correction
};
RankTest mann_whitney(const std::vector<double>& x, const std::vector<double>& y);

std::vector<double> parse_range(const std::string& text);

// ---------------------------------------------------------------------------
// Output

// Throws std::runtime_error when the file exists and `force` is false.
void ensure_writable(const std::filesystem::path& path, bool force);

void write_episode_csv(std::ostream& out, const std::vector<RunResult>& runs);
nlohmann::json summary_json(const ExperimentConfig& config,
                            const std::vector<RunResult>& runs,
                            const AggregateStats& stats);
void write_sweep_csv(std::ostream& out, const std::string& parameter_name,
                     const std::vector<SweepRow>& rows);

struct EpisodeRow {
  int run_id = 0;
  int episode = 0;
  int agent = 0;
  std::string group;
  AgentEpisode values;
};
std::vector<EpisodeRow> read_episode_csv(std::istream& in);

}  // namespace smg
