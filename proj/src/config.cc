#include <charconv>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "smg/harness.h"

namespace smg {

namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw std::invalid_argument("config: bad value '" + value + "' for " + key);
}

double parse_double(const std::string& key, const std::string& value) {
  double v = 0.0;
  const char* end = value.data() + value.size();
  auto res = std::from_chars(value.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) bad_value(key, value);
  return v;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& value) {
  Int v = 0;
  const char* end = value.data() + value.size();
  auto res = std::from_chars(value.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) bad_value(key, value);
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value);
}

std::vector<int> parse_sizes(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_int<int>(key, trim(item)));
  if (out.empty()) bad_value(key, value);
  return out;
}

std::string join_sizes(const std::vector<int>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) s += ',';
    s += std::to_string(v[k]);
  }
  return s;
}

enum class FieldType { kDouble, kInt, kBool, kString };

struct Field {
  const char* key;
  FieldType type;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

#define SMG_DOUBLE(KEY, MEMBER)                                                 \
  Field{KEY, FieldType::kDouble,                                                \
        [](const ExperimentConfig& c) { return format_double(c.MEMBER); },      \
        [](ExperimentConfig& c, const std::string& v) {                         \
          c.MEMBER = parse_double(KEY, v);                                      \
        }}
#define SMG_INT(KEY, MEMBER)                                                    \
  Field{KEY, FieldType::kInt,                                                   \
        [](const ExperimentConfig& c) { return std::to_string(c.MEMBER); },     \
        [](ExperimentConfig& c, const std::string& v) {                         \
          c.MEMBER = parse_int<decltype(c.MEMBER)>(KEY, v);                     \
        }}
#define SMG_BOOL(KEY, MEMBER)                                                   \
  Field{KEY, FieldType::kBool,                                                  \
        [](const ExperimentConfig& c) {                                         \
          return std::string(c.MEMBER ? "true" : "false");                      \
        },                                                                      \
        [](ExperimentConfig& c, const std::string& v) {                         \
          c.MEMBER = parse_bool(KEY, v);                                        \
        }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"env.id", FieldType::kString,
            [](const ExperimentConfig& c) { return to_string(c.env); },
            [](ExperimentConfig& c, const std::string& v) {
              c.env = parse_env_kind(v);
            }},
      SMG_DOUBLE("env.alpha", conflict_alpha),
      SMG_BOOL("env.memory_one", memory_one),
      SMG_INT("grid.width", grid.width),
      SMG_INT("grid.height", grid.height),
      SMG_INT("grid.agents", grid.n_agents),
      SMG_INT("grid.max_steps", grid.max_steps),
      Field{"learner.id", FieldType::kString,
            [](const ExperimentConfig& c) { return to_string(c.learner); },
            [](ExperimentConfig& c, const std::string& v) {
              c.learner = parse_learner_kind(v);
            }},
      SMG_DOUBLE("tabular.alpha", tabular.alpha),
      SMG_DOUBLE("tabular.gamma", tabular.gamma),
      SMG_DOUBLE("tabular.eps_start", tabular.eps_start),
      SMG_DOUBLE("tabular.eps_end", tabular.eps_end),
      SMG_INT("tabular.eps_horizon", tabular.eps_horizon),
      Field{"dqn.hidden", FieldType::kString,
            [](const ExperimentConfig& c) { return join_sizes(c.dqn.hidden); },
            [](ExperimentConfig& c, const std::string& v) {
              c.dqn.hidden = parse_sizes("dqn.hidden", v);
            }},
      SMG_DOUBLE("dqn.lr", dqn.lr),
      SMG_DOUBLE("dqn.gamma", dqn.gamma),
      SMG_INT("dqn.buffer", dqn.buffer_capacity),
      SMG_INT("dqn.batch", dqn.batch_size),
      SMG_INT("dqn.target_sync", dqn.target_sync_period),
      SMG_DOUBLE("dqn.eps_start", dqn.eps_start),
      SMG_DOUBLE("dqn.eps_end", dqn.eps_end),
      SMG_DOUBLE("dqn.eps_fraction", dqn_eps_fraction),
      SMG_INT("dqn.train_every", dqn.train_every),
      Field{"ppo.hidden", FieldType::kString,
            [](const ExperimentConfig& c) { return join_sizes(c.ppo.hidden); },
            [](ExperimentConfig& c, const std::string& v) {
              c.ppo.hidden = parse_sizes("ppo.hidden", v);
            }},
      SMG_DOUBLE("ppo.lr", ppo.lr),
      SMG_DOUBLE("ppo.gamma", ppo.gamma),
      SMG_DOUBLE("ppo.clip", ppo.clip),
      SMG_DOUBLE("ppo.entropy", ppo.entropy_coef),
      SMG_DOUBLE("ppo.value_coef", ppo.value_coef),
      SMG_INT("ppo.epochs", ppo.epochs),
      SMG_INT("ppo.update_period", ppo.update_period),
      Field{"market.kind", FieldType::kString,
            [](const ExperimentConfig& c) { return to_string(c.market.kind); },
            [](ExperimentConfig& c, const std::string& v) {
              c.market.kind = parse_market_kind(v);
            }},
      SMG_DOUBLE("market.price", market.price),
      SMG_DOUBLE("market.dividend", market.dividend),
      SMG_BOOL("market.allow_debt", market.allow_debt),
      SMG_INT("run.episodes", episodes),
      SMG_INT("run.steps", steps),
      SMG_INT("run.runs", runs),
      SMG_INT("run.seed", seed),
      SMG_INT("run.jobs", jobs),
      SMG_DOUBLE("run.final_window", final_window),
      Field{"output.dir", FieldType::kString,
            [](const ExperimentConfig& c) { return c.output; },
            [](ExperimentConfig& c, const std::string& v) { c.output = v; }},
  };
  return table;
}

#undef SMG_DOUBLE
#undef SMG_INT
#undef SMG_BOOL

const Field& find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (key == f.key) return f;
  }
  throw std::invalid_argument("config: unknown key '" + key + "'");
}

}  // namespace

std::string to_string(EnvKind kind) {
  switch (kind) {
    case EnvKind::kPrisonersDilemma: return "pd";
    case EnvKind::kConflict: return "conflict";
    case EnvKind::kSmartfactory: return "smartfactory";
    case EnvKind::kRefinery: return "refinery";
  }
  return "?";
}

std::string to_string(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::kTabular: return "tabular";
    case LearnerKind::kDqn: return "dqn";
    case LearnerKind::kPpo: return "ppo";
  }
  return "?";
}

EnvKind parse_env_kind(const std::string& text) {
  for (auto k : {EnvKind::kPrisonersDilemma, EnvKind::kConflict,
                 EnvKind::kSmartfactory, EnvKind::kRefinery}) {
    if (to_string(k) == text) return k;
  }
  throw std::invalid_argument("unknown environment '" + text + "'");
}

LearnerKind parse_learner_kind(const std::string& text) {
  for (auto k : {LearnerKind::kTabular, LearnerKind::kDqn, LearnerKind::kPpo}) {
    if (to_string(k) == text) return k;
  }
  throw std::invalid_argument("unknown learner '" + text + "'");
}

void ExperimentConfig::validate() const {
  if (runs < 1) throw std::invalid_argument("runs must be >= 1");
  if (episodes < 1) throw std::invalid_argument("episodes must be >= 1");
  if (steps < 1) throw std::invalid_argument("steps must be >= 1");
  if (jobs < 1) throw std::invalid_argument("jobs must be >= 1");
  if (!(final_window > 0.0 && final_window <= 1.0)) {
    throw std::invalid_argument("final_window must lie in (0, 1]");
  }
  market.validate();
  if (is_matrix()) {
    if (market.kind == MarketKind::kShareholderMarket) {
      throw std::invalid_argument("matrix games support only the action market");
    }
    if (env == EnvKind::kConflict) ConflictParams{.alpha = conflict_alpha}.validate();
  } else {
    grid.validate();
  }
  if (!(tabular.alpha > 0.0 && tabular.alpha <= 1.0)) {
    throw std::invalid_argument("tabular.alpha must lie in (0, 1]");
  }
  DiscountFactor(tabular.gamma);
  DiscountFactor(dqn.gamma);
  DiscountFactor(ppo.gamma);
  EpsilonSchedule(tabular.eps_start, tabular.eps_end, tabular.eps_horizon);
  EpsilonSchedule(dqn.eps_start, dqn.eps_end, 1);
  if (!(dqn_eps_fraction >= 0.0 && dqn_eps_fraction <= 1.0)) {
    throw std::invalid_argument("dqn.eps_fraction must lie in [0, 1]");
  }
  if (dqn.batch_size == 0 || dqn.buffer_capacity < dqn.batch_size ||
      dqn.target_sync_period < 1 || dqn.train_every < 1 || dqn.lr <= 0.0) {
    throw std::invalid_argument("invalid DQN settings");
  }
  if (ppo.update_period == 0 || ppo.epochs < 1 || ppo.lr <= 0.0 ||
      ppo.clip <= 0.0 || ppo.entropy_coef < 0.0 || ppo.value_coef < 0.0) {
    throw std::invalid_argument("invalid PPO settings");
  }
  for (int h : dqn.hidden) {
    if (h < 1) throw std::invalid_argument("dqn.hidden sizes must be positive");
  }
  for (int h : ppo.hidden) {
    if (h < 1) throw std::invalid_argument("ppo.hidden sizes must be positive");
  }
}

bool ExperimentConfig::operator==(const ExperimentConfig& other) const {
  return config_to_text(*this) == config_to_text(other);
}

void apply_config_value(ExperimentConfig& config, const std::string& key,
                        const std::string& value) {
  find_field(key).set(config, value);
}

void apply_config_text(ExperimentConfig& config, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    }
    apply_config_value(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

std::string config_to_text(const ExperimentConfig& config) {
  std::string out;
  for (const auto& f : fields()) {
    out += f.key;
    out += " = ";
    out += f.get(config);
    out += '\n';
  }
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.emplace_back(f.key);
  return keys;
}

nlohmann::json config_to_json(const ExperimentConfig& config) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& f : fields()) {
    const std::string v = f.get(config);
    switch (f.type) {
      case FieldType::kDouble: j[f.key] = parse_double(f.key, v); break;
      case FieldType::kInt:
        if (v.front() == '-') j[f.key] = parse_int<long long>(f.key, v);
        else j[f.key] = parse_int<unsigned long long>(f.key, v);
        break;
      case FieldType::kBool: j[f.key] = parse_bool(f.key, v); break;
      case FieldType::kString: j[f.key] = v; break;
    }
  }
  return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("config JSON must be an object");
  ExperimentConfig config;
  for (const auto& [key, value] : j.items()) {
    std::string text;
    if (value.is_boolean()) text = value.get<bool>() ? "true" : "false";
    else if (value.is_number_unsigned()) text = std::to_string(value.get<unsigned long long>());
    else if (value.is_number_integer()) text = std::to_string(value.get<long long>());
    else if (value.is_number_float()) text = format_double(value.get<double>());
    else if (value.is_string()) text = value.get<std::string>();
    else throw std::invalid_argument("config JSON: unsupported value for " + key);
    apply_config_value(config, key, text);
  }
  return config;
}

}  // namespace smg
