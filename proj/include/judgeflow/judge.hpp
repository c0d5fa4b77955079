#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "judgeflow/gateway.hpp"
#include "judgeflow/trace.hpp"
#include "judgeflow/workflow.hpp"

namespace judgeflow {

struct FailureRecord {
  std::string query;
  std::string gold;
  std::string wrong;  // the workflow's final answer
  std::vector<std::pair<std::string, json>> block_outputs;  // covers w.order
  std::string trace_xml;

  json to_json() const;
  static FailureRecord from_json(const json& rec);
  std::string digest() const;
};

FailureRecord make_failure_record(const Workflow& w, const ExecutionTrace& trace,
                                  const std::string& gold, const json& final_state);

struct RankVector {
  std::map<std::string, int> ranks;
};

ChatRequest build_judge_prompt(const Workflow& w, const FailureRecord& rec,
                               const std::string& wrong, const std::string& model,
                               double temperature = 0.0);

// First JSON object in the text; keys must equal the block-name set and
// values a permutation of 1..M. Throws ParseError / KeyMismatch /
// NotAPermutation.
RankVector parse_rank_vector(const std::string& text,
                             const std::vector<std::string>& names);

std::string round_worst(const RankVector& rv);

// Argmin of rank sums; ties go to the earliest block in w.order.
std::string overall_worst(const std::vector<RankVector>& vectors, const Workflow& w);

using BlockLog = std::map<std::string, std::vector<FailureRecord>>;

BlockLog make_block_log(const Workflow& w);
void log_failure(BlockLog& logs, const std::string& b_rw, const FailureRecord& rec);

struct JudgeOutcome {
  std::optional<RankVector> vector;
  ChatRequest request;
  std::string response;
  std::string error;  // set when the vector was skipped
  int attempts = 0;
};

// One judge call with a single retry on malformed output; never throws for
// malformed responses (vector is just absent).
JudgeOutcome judge_failure(const Workflow& w, const FailureRecord& rec, Gateway& gateway,
                           const std::string& model, double temperature = 0.0);

}  // namespace judgeflow
