#pragma once

#include <string>
#include <vector>

#include "judgeflow/util.hpp"
#include "judgeflow/workflow.hpp"

namespace judgeflow {

struct OpInvocation {
  std::string alias;
  std::string prompt_digest;
  std::string output;
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
  double wall_seconds = 0.0;  // in-memory only, never serialized
};

struct BlockRecord {
  std::string name;
  BlockVariant variant = BlockVariant::Seq;
  json input_state;
  json output_state;
  int iterations = 0;    // for-blocks
  std::string branch;    // cond-blocks: "success" | "failure"
  bool degraded = false; // cond-blocks: condition field was missing
  std::vector<OpInvocation> invocations;
};

struct ExecutionTrace {
  std::string query;
  std::string query_id;
  std::vector<BlockRecord> blocks;
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
};

// String fields longer than max_len are cut and marked.
json snapshot_state(const json& state, std::size_t max_len);

std::string render_trace_xml(const ExecutionTrace& trace);

}  // namespace judgeflow
