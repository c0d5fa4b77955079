#pragma once

#include <string>

#include "judgeflow/operators.hpp"
#include "judgeflow/trace.hpp"
#include "judgeflow/workflow.hpp"

namespace judgeflow {

struct ExecOptions {
  std::size_t snapshot_limit = 4000;
  std::string query_id;
  const TaskInstance* task = nullptr;
};

struct ExecutionResult {
  json final_state;
  ExecutionTrace trace;
  bool aborted = false;   // operator failure mid-run; trace kept up to it
  std::string error;
};

ExecutionResult execute_workflow(const Workflow& w, const std::string& query,
                                 const OperatorRuntime& runtime,
                                 const ExecOptions& opts = {});

json run_seq_block(const Workflow& w, const LogicBlock& block, json state,
                   const std::string& query, const OperatorRuntime& runtime,
                   OperatorCallContext& ctx);
json run_loop_block(const Workflow& w, const LogicBlock& block, json state,
                    const std::string& query, const OperatorRuntime& runtime,
                    OperatorCallContext& ctx);
json run_cond_block(const Workflow& w, const LogicBlock& block, json state,
                    const std::string& query, const OperatorRuntime& runtime,
                    OperatorCallContext& ctx);

bool condition_field_truthy(const json& value);

}  // namespace judgeflow
