#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <yaml-cpp/yaml.h>

namespace maestro {

struct RewardConfig {
  double execution_weight = 1.0;
  double efficiency_weight = 1.5;   // lambda_tok
  double structure_weight = 0.1;    // lambda_graph
  double r_invalid = -1.0;
  double token_budget = 4096.0;
  double v_max = 8.0;
  double e_max = 16.0;
  double eps_adv = 1e-6;
};

// Counterfactual contrast shaping and the adaptive mutation sampler.
struct CfConfig {
  bool enabled = true;
  double ema_alpha = 0.1;
  double temperature = 1.0;
  double p_min = 0.05;
  double weight = 0.05;        // scale of the localized objective
  double beta = 0.1;           // preference sharpness
  double delta_cap = 0.5;
  double min_abs_delta = 0.01;
};

struct PolicyConfig {
  int max_steps = 4;
  int max_agents_per_step = 3;
  int duty_templates = 2;      // specialized variants per role, besides canonical
  double learning_rate = 0.05;
  double clip_range = 0.2;
  double kl_coef = 0.0;
};

struct EnvConfig {
  double base_success = 0.92;
  double shortfall_factor = 0.25;       // per missing capacity level
  double canonical_duty_factor = 0.85;  // success multiplier for un-specialized duties
  std::array<int, 3> tokens_per_call = {120, 260, 520};  // small, medium, large
};

struct TrainConfig {
  int iterations = 600;
  int group_size = 4;
  int warm_start_epochs = 300;
  std::uint64_t seed = 42;
};

struct HttpConfig {
  std::string endpoint = "http://127.0.0.1:8080/v1/chat/completions";
  std::string model_small = "small-worker";
  std::string model_medium = "medium-worker";
  std::string model_large = "large-worker";
  std::string api_key_env = "MAESTRO_API_KEY";
  double temperature = 0.6;
  double top_p = 0.9;
  int timeout_ms = 30000;
  int retries = 1;
};

struct AppConfig {
  std::uint64_t seed = 42;
  std::string role_pool = "baseline";
  RewardConfig reward;
  CfConfig cf;
  PolicyConfig policy;
  EnvConfig env;
  TrainConfig train;
  HttpConfig http;
};

namespace detail {

template <typename T>
void read_key(const YAML::Node& n, const char* key, T& out) {
  if (n && n[key]) out = n[key].template as<T>();
}

}  // namespace detail

inline AppConfig parse_config(const std::string& text) {
  AppConfig cfg;
  YAML::Node root = YAML::Load(text);
  if (!root || root.IsNull()) return cfg;
  if (!root.IsMap()) throw std::invalid_argument("config: top level must be a mapping");

  detail::read_key(root, "seed", cfg.seed);
  detail::read_key(root, "role_pool", cfg.role_pool);

  if (YAML::Node n = root["reward"]) {
    detail::read_key(n, "execution_weight", cfg.reward.execution_weight);
    detail::read_key(n, "efficiency_weight", cfg.reward.efficiency_weight);
    detail::read_key(n, "structure_weight", cfg.reward.structure_weight);
    detail::read_key(n, "r_invalid", cfg.reward.r_invalid);
    detail::read_key(n, "token_budget", cfg.reward.token_budget);
    detail::read_key(n, "v_max", cfg.reward.v_max);
    detail::read_key(n, "e_max", cfg.reward.e_max);
    detail::read_key(n, "eps_adv", cfg.reward.eps_adv);
  }
  if (YAML::Node n = root["counterfactual"]) {
    detail::read_key(n, "enabled", cfg.cf.enabled);
    detail::read_key(n, "ema_alpha", cfg.cf.ema_alpha);
    detail::read_key(n, "temperature", cfg.cf.temperature);
    detail::read_key(n, "p_min", cfg.cf.p_min);
    detail::read_key(n, "weight", cfg.cf.weight);
    detail::read_key(n, "beta", cfg.cf.beta);
    detail::read_key(n, "delta_cap", cfg.cf.delta_cap);
    detail::read_key(n, "min_abs_delta", cfg.cf.min_abs_delta);
  }
  if (YAML::Node n = root["policy"]) {
    detail::read_key(n, "max_steps", cfg.policy.max_steps);
    detail::read_key(n, "max_agents_per_step", cfg.policy.max_agents_per_step);
    detail::read_key(n, "duty_templates", cfg.policy.duty_templates);
    detail::read_key(n, "learning_rate", cfg.policy.learning_rate);
    detail::read_key(n, "clip_range", cfg.policy.clip_range);
    detail::read_key(n, "kl_coef", cfg.policy.kl_coef);
  }
  if (YAML::Node n = root["env"]) {
    detail::read_key(n, "base_success", cfg.env.base_success);
    detail::read_key(n, "shortfall_factor", cfg.env.shortfall_factor);
    detail::read_key(n, "canonical_duty_factor", cfg.env.canonical_duty_factor);
    if (n["tokens_per_call"]) {
      auto v = n["tokens_per_call"].as<std::vector<int>>();
      if (v.size() != 3) throw std::invalid_argument("config: env.tokens_per_call needs 3 entries");
      cfg.env.tokens_per_call = {v[0], v[1], v[2]};
    }
  }
  if (YAML::Node n = root["train"]) {
    detail::read_key(n, "iterations", cfg.train.iterations);
    detail::read_key(n, "group_size", cfg.train.group_size);
    detail::read_key(n, "warm_start_epochs", cfg.train.warm_start_epochs);
    cfg.train.seed = cfg.seed;
  }
  if (YAML::Node n = root["http"]) {
    detail::read_key(n, "endpoint", cfg.http.endpoint);
    detail::read_key(n, "model_small", cfg.http.model_small);
    detail::read_key(n, "model_medium", cfg.http.model_medium);
    detail::read_key(n, "model_large", cfg.http.model_large);
    detail::read_key(n, "api_key_env", cfg.http.api_key_env);
    detail::read_key(n, "temperature", cfg.http.temperature);
    detail::read_key(n, "top_p", cfg.http.top_p);
    detail::read_key(n, "timeout_ms", cfg.http.timeout_ms);
    detail::read_key(n, "retries", cfg.http.retries);
  }
  cfg.train.seed = cfg.seed;
  return cfg;
}

inline AppConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace maestro
