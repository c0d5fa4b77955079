#include "judgeflow/config.hpp"

#include <filesystem>

#include "judgeflow/errors.hpp"

namespace judgeflow {

namespace {

template <typename T>
void read_field(const json& doc, const char* key, T& out) {
  if (doc.contains(key)) out = doc[key].get<T>();
}

}  // namespace

RunConfig parse_config(const json& doc) {
  if (!doc.is_object())
    throw Error(ErrorKind::ConfigError, "config must be a JSON object");
  RunConfig cfg;
  read_field(doc, "dataset_path", cfg.dataset_path);
  read_field(doc, "dataset_kind", cfg.dataset_kind);
  read_field(doc, "dataset_name", cfg.dataset_name);
  read_field(doc, "split_ratio", cfg.split_ratio);
  read_field(doc, "rounds", cfg.rounds);
  read_field(doc, "k", cfg.pool_k);
  read_field(doc, "tau", cfg.tau);
  read_field(doc, "epsilon", cfg.epsilon);
  read_field(doc, "m_max", cfg.m_max);
  read_field(doc, "executor_model", cfg.executor_model);
  read_field(doc, "judge_model", cfg.judge_model);
  read_field(doc, "optimizer_model", cfg.optimizer_model);
  read_field(doc, "executor_temperature", cfg.executor_temperature);
  read_field(doc, "judge_temperature", cfg.judge_temperature);
  read_field(doc, "optimizer_temperature", cfg.optimizer_temperature);
  read_field(doc, "max_tokens", cfg.max_tokens);
  read_field(doc, "endpoint", cfg.endpoint);
  read_field(doc, "api_key", cfg.api_key);
  read_field(doc, "api_key_env", cfg.api_key_env);
  read_field(doc, "mock_scenario", cfg.mock_scenario);
  read_field(doc, "mock_strict", cfg.mock_strict);
  read_field(doc, "retry_attempts", cfg.retry_attempts);
  read_field(doc, "retry_base_delay_ms", cfg.retry_base_delay_ms);
  read_field(doc, "seed", cfg.seed);
  read_field(doc, "workers", cfg.workers);
  read_field(doc, "sample_k", cfg.sample_k);
  read_field(doc, "seed_workflow", cfg.seed_workflow);
  read_field(doc, "run_dir", cfg.run_dir);
  read_field(doc, "prompts_dir", cfg.prompts_dir);
  if (doc.contains("rates")) cfg.rates = doc["rates"];
  read_field(doc, "sandbox_time_s", cfg.sandbox.time_s);
  read_field(doc, "sandbox_memory_mb", cfg.sandbox.memory_mb);
  read_field(doc, "interpreter", cfg.interpreter);

  if (cfg.dataset_name.empty()) {
    if (!cfg.dataset_path.empty())
      cfg.dataset_name = std::filesystem::path(cfg.dataset_path).stem().string();
    else
      cfg.dataset_name = cfg.dataset_kind;
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  json doc = json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded())
    throw Error(ErrorKind::ConfigError, "config " + path + " is not valid JSON");
  try {
    return parse_config(doc);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("config ") + path + ": " + e.what());
  }
}

void validate_for_optimize(const RunConfig& cfg) {
  if (cfg.dataset_path.empty())
    throw Error(ErrorKind::ConfigError, "dataset_path is required");
  if (cfg.dataset_kind != "math" && cfg.dataset_kind != "code")
    throw Error(ErrorKind::ConfigError, "dataset_kind must be math or code");
  if (cfg.split_ratio < 0.0 || cfg.split_ratio > 1.0)
    throw Error(ErrorKind::ConfigError, "split_ratio is required and must be in [0,1]");
  if (cfg.rounds < 0) throw Error(ErrorKind::ConfigError, "rounds must be >= 0");
  if (cfg.pool_k < 1) throw Error(ErrorKind::ConfigError, "k must be >= 1");
  if (cfg.tau <= 0.0) throw Error(ErrorKind::ConfigError, "tau must be > 0");
  if (cfg.epsilon <= 0.0 || cfg.epsilon > 1.0)
    throw Error(ErrorKind::ConfigError, "epsilon must be in (0,1]");
  if (cfg.m_max < 1) throw Error(ErrorKind::ConfigError, "m_max must be >= 1");
  if (cfg.workers < 1) throw Error(ErrorKind::ConfigError, "workers must be >= 1");
  if (cfg.sample_k < 1) throw Error(ErrorKind::ConfigError, "sample_k must be >= 1");
  if (cfg.run_dir.empty()) throw Error(ErrorKind::ConfigError, "run_dir is required");
  if (cfg.mock_scenario.empty() && cfg.endpoint.empty())
    throw Error(ErrorKind::ConfigError, "either mock_scenario or endpoint is required");
}

}  // namespace judgeflow
