#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "judgeflow/util.hpp"

namespace judgeflow {

struct TaskInstance {
  std::string id;
  std::string question;
  std::string answer;              // math gold answer
  std::vector<std::string> tests;  // code test snippets
  std::string entry_point;         // optional (code)
};

struct DatasetSplit {
  std::vector<TaskInstance> train;
  std::vector<TaskInstance> test;
  std::uint64_t seed = 0;
};

// kind: "math" or "code". JSONL, one record per line.
std::vector<TaskInstance> load_dataset(const std::string& path, const std::string& kind);

// Deterministic shuffle by seed, then first ratio*n instances become train.
DatasetSplit split_dataset(const std::vector<TaskInstance>& all, double ratio,
                           std::uint64_t seed);

// Last number in the response (commas/currency stripped, fractions allowed),
// compared to gold within 1e-6 relative tolerance. Unextractable scores 0.
double eval_math(const json& final_state, const std::string& gold);

bool extract_last_number(const std::string& text, double& out);
bool parse_gold_number(const std::string& text, double& out);

class Sandbox;
double eval_code(const json& final_state, const TaskInstance& inst, const Sandbox& sandbox);

// Strips a ```...``` fence if present; prefers state.code over state.response.
std::string extract_code(const json& state);

}  // namespace judgeflow
