#pragma once

#include <cstdint>
#include <string>

#include "judgeflow/sandbox.hpp"
#include "judgeflow/util.hpp"

namespace judgeflow {

struct RunConfig {
  std::string dataset_path;
  std::string dataset_kind = "math";  // math | code
  std::string dataset_name;           // prompt-facing name; defaults to the path stem
  double split_ratio = -1.0;          // train fraction, required
  int rounds = 20;
  int pool_k = 3;
  double tau = 1.0;
  double epsilon = 1.0;
  int m_max = 3;

  std::string executor_model = "mock-model";
  std::string judge_model = "mock-model";
  std::string optimizer_model = "mock-model";
  double executor_temperature = 0.7;
  double judge_temperature = 0.0;
  double optimizer_temperature = 0.7;
  int max_tokens = 4096;

  std::string endpoint;        // OpenAI-compatible base URL
  std::string api_key;         // overrides the environment variable
  std::string api_key_env = "JUDGEFLOW_API_KEY";
  std::string mock_scenario;   // JSONL rules; set = offline mock backend
  bool mock_strict = true;
  int retry_attempts = 4;
  int retry_base_delay_ms = 200;

  std::uint64_t seed = 0;
  unsigned workers = 4;
  int sample_k = 3;

  std::string seed_workflow;   // path; empty = built-in single generate block
  std::string run_dir;
  std::string prompts_dir;
  json rates = json::object();

  SandboxLimits sandbox;
  std::string interpreter = "python3";
};

RunConfig parse_config(const json& doc);
RunConfig load_config(const std::string& path);

// Throws ConfigError when a field needed for an optimize run is missing/bad.
void validate_for_optimize(const RunConfig& cfg);

}  // namespace judgeflow
