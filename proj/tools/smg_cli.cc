// smg: command-line front end for market-game experiments.
//
//   smg run --env smartfactory --learner dqn --market shareholder --out out/
//   smg pd --market action --price -1.9 --runs 100 --steps 4000
//   smg sweep-alpha --alphas 0:3:0.25 --runs 25 --steps 4000
//   smg sweep-price --prices -1,0,1 --dividends 0.1 --env smartfactory
//   smg inspect out/episodes.csv

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "smg/harness.h"

namespace {

using smg::ExperimentConfig;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flags shared by the experiment subcommands. Each one is applied only when
// given, on top of the config file.
struct Flags {
  std::string config_file;
  std::map<std::string, std::string> values;  // config key -> text
  std::vector<std::string> sets;
  std::string out;
  bool force = false;
};

void add_common(CLI::App* sub, Flags& f, const ExperimentConfig& defaults) {
  sub->add_option("--config", f.config_file, "Config file (key = value lines)")
      ->check(CLI::ExistingFile);
  auto bind = [&](const std::string& flag, const std::string& key,
                  const std::string& help) {
    auto* opt = sub->add_option_function<std::string>(
        flag, [&f, key](const std::string& v) { f.values[key] = v; }, help);
    for (const auto& line : smg::config_keys()) {
      if (line == key) {
        std::string text = smg::config_to_text(defaults);
        auto pos = text.find(key + " = ");
        auto eol = text.find('\n', pos);
        opt->default_str(text.substr(pos + key.size() + 3, eol - pos - key.size() - 3));
      }
    }
  };
  bind("--env", "env.id", "pd | conflict | smartfactory | refinery");
  bind("--alpha", "env.alpha", "Conflict level of the conflict game");
  bind("--learner", "learner.id", "tabular | dqn | ppo");
  bind("--market", "market.kind", "none | action | shareholder");
  bind("--price", "market.price", "Signed trade price");
  bind("--dividend", "market.dividend", "Per-step dividend of a share");
  bind("--allow-debt", "market.allow_debt", "Settle liabilities even without cover");
  bind("--agents", "grid.agents", "Number of gridworld agents");
  bind("--episodes", "run.episodes", "Episodes per run");
  bind("--steps", "run.steps", "Steps per episode");
  bind("--runs", "run.runs", "Independent runs");
  bind("--seed", "run.seed", "Master seed (fallback: SMG_SEED)");
  bind("--jobs", "run.jobs", "Concurrent runs");
  sub->add_option("--set", f.sets, "Any config key, as key=value (repeatable)");
  sub->add_option("--out", f.out, "Output directory");
  sub->add_flag("--force", f.force, "Overwrite existing output files");
}

ExperimentConfig build_config(const Flags& f, ExperimentConfig base) {
  try {
    if (const char* env_seed = std::getenv("SMG_SEED")) {
      smg::apply_config_value(base, "run.seed", env_seed);
    }
    if (!f.config_file.empty()) {
      std::ifstream in(f.config_file);
      std::stringstream ss;
      ss << in.rdbuf();
      smg::apply_config_text(base, ss.str());
    }
    for (const auto& [key, value] : f.values) smg::apply_config_value(base, key, value);
    for (const auto& kv : f.sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value");
      smg::apply_config_value(base, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!f.out.empty()) base.output = f.out;
    base.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return base;
}

std::filesystem::path output_file(const ExperimentConfig& c, const std::string& name,
                                  bool force) {
  const auto p = std::filesystem::path(c.output) / name;
  try {
    smg::ensure_writable(p, force);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  return p;
}

void report_failures(const std::vector<smg::RunResult>& runs) {
  int failed = 0;
  for (const auto& r : runs) {
    if (!r.ok()) {
      std::cerr << "run " << r.run_id << " failed: " << r.error << "\n";
      ++failed;
    }
  }
  if (failed) throw std::runtime_error(std::to_string(failed) + " run(s) failed");
}

void write_experiment(const ExperimentConfig& c, const std::vector<smg::RunResult>& runs,
                      const smg::AggregateStats& stats, bool force) {
  if (c.output.empty()) return;
  const auto csv = output_file(c, "episodes.csv", force);
  const auto json = output_file(c, "summary.json", force);
  std::ofstream(csv) << [&] {
    std::ostringstream s;
    smg::write_episode_csv(s, runs);
    return s.str();
  }();
  std::ofstream(json) << smg::summary_json(c, runs, stats).dump(2) << "\n";
  std::cout << "wrote " << csv.string() << " and " << json.string() << "\n";
}

void print_stats(const ExperimentConfig& c, const smg::AggregateStats& s) {
  std::cout << std::fixed << std::setprecision(4);
  std::cout << "env=" << smg::to_string(c.env) << " learner=" << smg::to_string(c.learner)
            << " market=" << smg::to_string(c.market.kind) << " runs=" << c.runs << "\n";
  std::cout << "normalized return: " << s.normalized.mean << " +- " << s.normalized.stddev
            << "\n";
  if (c.is_matrix()) {
    std::cout << "final-window overall reward: " << s.final_reward.mean << " +- "
              << s.final_reward.stddev << "\n";
    std::cout << "(C,C) rate in final window: " << s.cooperation.mean << "\n";
  } else {
    std::cout << "first-group reward share: " << s.high_share.mean << " +- "
              << s.high_share.stddev << "\n";
  }
  std::cout << "trades per run: " << s.trades.mean << "\n";
}

int cmd_experiment(const Flags& f, ExperimentConfig base) {
  const auto c = build_config(f, base);
  if (!c.output.empty()) {
    output_file(c, "episodes.csv", f.force);
    output_file(c, "summary.json", f.force);
  }
  const auto runs = smg::run_experiment(c);
  const auto stats = smg::aggregate(c, runs);
  print_stats(c, stats);
  write_experiment(c, runs, stats, f.force);
  report_failures(runs);
  return 0;
}

int cmd_sweep_alpha(const Flags& f, const std::string& alphas_text) {
  ExperimentConfig base;
  base.env = smg::EnvKind::kConflict;
  base.runs = 25;
  base.jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const auto c = build_config(f, base);
  std::vector<double> alphas;
  try {
    alphas = smg::parse_range(alphas_text);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  std::filesystem::path csv;
  if (!c.output.empty()) csv = output_file(c, "sweep_alpha.csv", f.force);
  const auto rows = smg::conflict_sweep(alphas, c);
  smg::write_sweep_csv(std::cout, "alpha", rows);
  if (!csv.empty()) {
    std::ofstream out(csv);
    smg::write_sweep_csv(out, "alpha", rows);
  }
  return 0;
}

int cmd_sweep_price(const Flags& f, const std::string& prices_text,
                    const std::string& dividends_text) {
  ExperimentConfig base;
  base.env = smg::EnvKind::kSmartfactory;
  base.learner = smg::LearnerKind::kDqn;
  base.market.kind = smg::MarketKind::kShareholderMarket;
  base.episodes = 200;
  base.runs = 5;
  base.jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const auto c = build_config(f, base);
  std::vector<double> prices, dividends;
  try {
    prices = smg::parse_range(prices_text);
    dividends = dividends_text.empty() ? std::vector<double>{c.market.dividend}
                                       : smg::parse_range(dividends_text);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (c.is_matrix()) throw ConfigError("sweep-price needs a gridworld environment");
  const bool sf = c.env == smg::EnvKind::kSmartfactory;
  std::filesystem::path csv;
  if (!c.output.empty()) csv = output_file(c, "sweep_price.csv", f.force);

  std::ostringstream table;
  table << "price,dividend,run_id,first_share,second_share\n";
  for (double p : prices) {
    for (double d : dividends) {
      ExperimentConfig k = c;
      k.market.price = p;
      k.market.dividend = d;
      try {
        k.validate();
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
      const auto runs = smg::run_experiment(k);
      report_failures(runs);
      const auto dist = smg::distribution_analysis(runs, sf ? "high" : "refiner",
                                                   sf ? "low" : "consumer");
      for (const auto& pt : dist.points) {
        table << p << ',' << d << ',' << pt.run_id << ',' << pt.first_share << ','
              << pt.second_share << '\n';
      }
      if (dist.excluded) {
        std::cerr << "price " << p << " dividend " << d << ": " << dist.excluded
                  << " run(s) with non-positive total excluded\n";
      }
    }
  }
  std::cout << table.str();
  if (!csv.empty()) std::ofstream(csv) << table.str();
  return 0;
}

int cmd_inspect(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  const auto rows = smg::read_episode_csv(in);
  std::map<int, int> episodes_per_run;
  std::map<std::string, std::pair<double, double>> by_group;
  std::map<std::string, int> group_rows;
  long trades = 0;
  double liabilities = 0.0;
  int agents = 0;
  for (const auto& r : rows) {
    episodes_per_run[r.run_id] = std::max(episodes_per_run[r.run_id], r.episode + 1);
    agents = std::max(agents, r.agent + 1);
    by_group[r.group].first += r.values.raw_return;
    by_group[r.group].second += r.values.post_market_return;
    ++group_rows[r.group];
    trades += r.values.trades;
    liabilities += r.values.liabilities;
  }
  std::cout << path << "\n";
  std::cout << "  runs: " << episodes_per_run.size() << ", agents: " << agents
            << ", rows: " << rows.size() << "\n";
  std::cout << std::fixed << std::setprecision(4);
  for (const auto& [g, sums] : by_group) {
    const double n = group_rows[g];
    std::cout << "  group " << std::setw(9) << std::left << g << std::right
              << " mean raw return " << sums.first / n << ", mean post-market return "
              << sums.second / n << "\n";
  }
  // Each trade is counted once for the seller and once for the buyer.
  std::cout << "  trades: " << trades / 2 << ", liabilities outstanding at episode ends: "
            << liabilities << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Independent learners with reward markets"};
  app.require_subcommand(0, 1);
  app.option_defaults()->always_capture_default();

  ExperimentConfig run_defaults;
  run_defaults.jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

  Flags run_f, pd_f, alpha_f, price_f;
  auto* run = app.add_subcommand("run", "Run one experiment");
  add_common(run, run_f, run_defaults);

  auto* pd = app.add_subcommand("pd", "Iterated Prisoner's Dilemma with or without market");
  ExperimentConfig pd_defaults = run_defaults;
  pd_defaults.runs = 100;
  add_common(pd, pd_f, pd_defaults);

  std::string alphas = "0:3:0.25";
  auto* sweep_alpha = app.add_subcommand("sweep-alpha", "Conflict-game sweep over alpha");
  sweep_alpha->add_option("--alphas", alphas, "start:stop:step or comma list");
  add_common(sweep_alpha, alpha_f, run_defaults);

  std::string prices = "-1:1:0.5", dividends;
  auto* sweep_price = app.add_subcommand("sweep-price", "Reward distribution per price level");
  sweep_price->add_option("--prices", prices, "start:stop:step or comma list");
  sweep_price->add_option("--dividends", dividends, "Dividend list (default: --dividend)");
  add_common(sweep_price, price_f, run_defaults);

  std::string csv_path;
  auto* inspect = app.add_subcommand("inspect", "Summarise an episode CSV");
  inspect->add_option("csv", csv_path, "episodes.csv written by run/pd")->required();

  if (argc <= 1) {
    std::cerr << app.help();
    return 1;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e, std::cerr, std::cerr);
    return 1;
  }

  try {
    if (*run) return cmd_experiment(run_f, run_defaults);
    if (*pd) {
      ExperimentConfig base = pd_defaults;
      base.env = smg::EnvKind::kPrisonersDilemma;
      return cmd_experiment(pd_f, base);
    }
    if (*sweep_alpha) return cmd_sweep_alpha(alpha_f, alphas);
    if (*sweep_price) return cmd_sweep_price(price_f, prices, dividends);
    if (*inspect) return cmd_inspect(csv_path);
    std::cerr << app.help();
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
