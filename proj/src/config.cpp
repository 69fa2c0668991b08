#include "apgx/config.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>

#include "apgx/errors.hpp"

#ifndef APGX_GIT_HASH
#define APGX_GIT_HASH "unknown"
#endif

namespace apgx {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

long parse_int(const std::string& v, const std::string& where) {
  char* end = nullptr;
  long x = std::strtol(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError(where + ": expected an integer, got '" + v + "'");
  return x;
}

std::uint64_t parse_u64(const std::string& v, const std::string& where) {
  char* end = nullptr;
  unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError(where + ": expected an unsigned integer, got '" + v + "'");
  return x;
}

double parse_real(const std::string& v, const std::string& where) {
  char* end = nullptr;
  double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError(where + ": expected a number, got '" + v + "'");
  return x;
}

void set_key(TrainConfig& cfg, const std::string& section,
             const std::string& key, const std::string& value,
             const std::string& where) {
  const std::string full = section + "." + key;
  try {
    if (full == "run.env") {
      cfg.env = env_name_from_string(value);
    } else if (full == "run.mode") {
      cfg.mode = mode_from_string(value);
    } else if (full == "run.iterations") {
      cfg.iterations = static_cast<int>(parse_int(value, where));
    } else if (full == "run.seed") {
      cfg.seed = parse_u64(value, where);
    } else if (full == "run.discount") {
      cfg.discount = parse_real(value, where);
    } else if (full == "run.eval_episodes") {
      cfg.eval_episodes = static_cast<int>(parse_int(value, where));
    } else if (full == "apg.update_frequency") {
      cfg.apg_frequency = static_cast<int>(parse_int(value, where));
    } else if (full == "apg.horizon") {
      cfg.apg_horizon = static_cast<int>(parse_int(value, where));
    } else if (full == "apg.epochs") {
      cfg.apg_epochs = static_cast<int>(parse_int(value, where));
    } else if (full == "apg.agents") {
      cfg.apg_lanes = static_cast<int>(parse_int(value, where));
    } else if (full == "apg.learning_rate") {
      cfg.apg_lr = parse_real(value, where);
    } else if (full == "ppo.lanes") {
      cfg.ppo_lanes = static_cast<int>(parse_int(value, where));
    } else if (full == "ppo.rollout_steps") {
      cfg.rollout_steps = static_cast<int>(parse_int(value, where));
    } else if (full == "ppo.explore_fraction") {
      cfg.explore_fraction = parse_real(value, where);
    } else if (full == "ppo.learning_rate") {
      cfg.ppo_lr = parse_real(value, where);
    } else if (full == "ppo.gae_lambda") {
      cfg.gae_lambda = parse_real(value, where);
    } else if (full == "ppo.clip_epsilon") {
      cfg.clip_eps = parse_real(value, where);
    } else if (full == "ppo.entropy_coef") {
      cfg.entropy_coef = parse_real(value, where);
    } else if (full == "ppo.policy_epochs") {
      cfg.policy_epochs = static_cast<int>(parse_int(value, where));
    } else if (full == "ppo.critic_epochs") {
      cfg.critic_epochs = static_cast<int>(parse_int(value, where));
    } else if (full == "ppo.minibatches") {
      cfg.minibatches = static_cast<int>(parse_int(value, where));
    } else {
      throw ConfigError(where + ": unknown key '" + full + "'");
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

struct Entry {
  std::string section, key, value;
  int line;
};

std::vector<Entry> read_entries(std::istream& in, const std::string& src) {
  std::vector<Entry> entries;
  std::string section;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = src + ":" + std::to_string(lineno);
    size_t hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(where + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "run" && section != "apg" && section != "ppo")
        throw ConfigError(where + ": unknown section '" + section + "'");
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(where + ": expected 'key = value'");
    if (section.empty())
      throw ConfigError(where + ": key outside of any section");
    Entry e;
    e.section = section;
    e.key = trim(line.substr(0, eq));
    e.value = trim(line.substr(eq + 1));
    e.line = lineno;
    if (e.key.empty() || e.value.empty())
      throw ConfigError(where + ": expected 'key = value'");
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace

TrainConfig parse_config(std::istream& in, const std::string& source_name) {
  std::vector<Entry> entries = read_entries(in, source_name);

  std::string env_value;
  for (const Entry& e : entries)
    if (e.section == "run" && e.key == "env") env_value = e.value;
  if (env_value.empty())
    throw ConfigError(source_name + ": missing required key 'run.env'");

  EnvName env;
  try {
    env = env_name_from_string(env_value);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(source_name + ": " + e.what());
  }

  TrainConfig cfg = default_config(env);
  for (const Entry& e : entries) {
    const std::string where = source_name + ":" + std::to_string(e.line);
    set_key(cfg, e.section, e.key, e.value, where);
  }
  return cfg;
}

TrainConfig parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError(path + ": cannot open config file");
  return parse_config(f, path);
}

std::string format_double(double x) {
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

std::string serialize_config(const TrainConfig& cfg) {
  std::ostringstream os;
  os << "[run]\n";
  os << "env = " << env_name_string(cfg.env) << "\n";
  os << "mode = " << mode_string(cfg.mode) << "\n";
  os << "iterations = " << cfg.iterations << "\n";
  os << "seed = " << cfg.seed << "\n";
  os << "discount = " << format_double(cfg.discount) << "\n";
  os << "eval_episodes = " << cfg.eval_episodes << "\n";
  os << "\n[apg]\n";
  os << "update_frequency = " << cfg.apg_frequency << "\n";
  os << "horizon = " << cfg.apg_horizon << "\n";
  os << "epochs = " << cfg.apg_epochs << "\n";
  os << "agents = " << cfg.apg_lanes << "\n";
  os << "learning_rate = " << format_double(cfg.apg_lr) << "\n";
  os << "\n[ppo]\n";
  os << "lanes = " << cfg.ppo_lanes << "\n";
  os << "rollout_steps = " << cfg.rollout_steps << "\n";
  os << "explore_fraction = " << format_double(cfg.explore_fraction) << "\n";
  os << "learning_rate = " << format_double(cfg.ppo_lr) << "\n";
  os << "gae_lambda = " << format_double(cfg.gae_lambda) << "\n";
  os << "clip_epsilon = " << format_double(cfg.clip_eps) << "\n";
  os << "entropy_coef = " << format_double(cfg.entropy_coef) << "\n";
  os << "policy_epochs = " << cfg.policy_epochs << "\n";
  os << "critic_epochs = " << cfg.critic_epochs << "\n";
  os << "minibatches = " << cfg.minibatches << "\n";
  return os.str();
}

void apply_override(TrainConfig& cfg, const std::string& key,
                    const std::string& value) {
  size_t dot = key.find('.');
  if (dot == std::string::npos)
    throw ConfigError("override '" + key + "': expected section.key");
  set_key(cfg, key.substr(0, dot), key.substr(dot + 1), value,
          "override '" + key + "'");
}

std::string version_string() {
  return std::string("apgx 0.1.0 (") + APGX_GIT_HASH + ")";
}

void write_manifest(const RunManifest& m, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write manifest '" + path + "'");
  f << "# apgx run manifest\n";
  f << "version = " << version_string() << "\n";
  f << "command = " << m.command << "\n";
  f << "created_unix = " << std::time(nullptr) << "\n";
  f << "out_dir = " << m.out_dir << "\n";
  f << "mode = " << m.mode << "\n";
  f << "seeds =";
  for (std::uint64_t s : m.seeds) f << " " << s;
  f << "\n";
  for (const std::string& c : m.csv_files) f << "csv = " << c << "\n";
  f << "\n# config snapshot\n" << m.config_snapshot;
}

}  // namespace apgx
