#include "judgeflow/executor.hpp"

#include "judgeflow/errors.hpp"

namespace judgeflow {

bool condition_field_truthy(const json& value) {
  if (value.is_boolean()) return value.get<bool>();
  if (value.is_string()) {
    std::string v = lower(trim(value.get<std::string>()));
    return v == "true" || v == "pass" || v == "yes";
  }
  return false;
}

json run_seq_block(const Workflow& w, const LogicBlock& block, json state,
                   const std::string& query, const OperatorRuntime& runtime,
                   OperatorCallContext& ctx) {
  for (const auto& alias : block.operators)
    state = runtime.invoke(w.operators.at(alias), std::move(state), query, ctx);
  return state;
}

json run_loop_block(const Workflow& w, const LogicBlock& block, json state,
                    const std::string& query, const OperatorRuntime& runtime,
                    OperatorCallContext& ctx) {
  int iterations = 0;
  for (int pass = 1; pass <= block.max_iterations; ++pass) {
    for (const auto& alias : block.operators)
      state = runtime.invoke(w.operators.at(alias), std::move(state), query, ctx);
    iterations = pass;
    if (block.condition && state.contains(block.condition->field) &&
        state[block.condition->field] == block.condition->equals)
      break;  // absent field compares unequal, so the loop continues
  }
  if (ctx.record) ctx.record->iterations = iterations;
  return state;
}

json run_cond_block(const Workflow& w, const LogicBlock& block, json state,
                    const std::string& query, const OperatorRuntime& runtime,
                    OperatorCallContext& ctx) {
  state = runtime.invoke(w.operators.at(block.condition_operator), std::move(state),
                         query, ctx);
  bool degraded = !state.contains(block.condition_field);
  bool success = !degraded && condition_field_truthy(state[block.condition_field]);
  const auto& branch_ops = success ? block.success_operators : block.failure_operators;
  for (const auto& alias : branch_ops)
    state = runtime.invoke(w.operators.at(alias), std::move(state), query, ctx);
  if (ctx.record) {
    ctx.record->branch = success ? "success" : "failure";
    ctx.record->degraded = degraded;
  }
  return state;
}

ExecutionResult execute_workflow(const Workflow& w, const std::string& query,
                                 const OperatorRuntime& runtime, const ExecOptions& opts) {
  ExecutionResult result;
  result.trace.query = query;
  result.trace.query_id = opts.query_id;

  json state = json::object();
  for (const auto& name : w.order) {
    const LogicBlock& block = w.blocks.at(name);
    BlockRecord rec;
    rec.name = name;
    rec.variant = block.variant;
    rec.input_state = snapshot_state(state, opts.snapshot_limit);
    OperatorCallContext ctx = runtime.make_context(&rec, opts.task);
    try {
      switch (block.variant) {
        case BlockVariant::Seq:
          state = run_seq_block(w, block, std::move(state), query, runtime, ctx);
          break;
        case BlockVariant::For:
          state = run_loop_block(w, block, std::move(state), query, runtime, ctx);
          break;
        case BlockVariant::Cond:
          state = run_cond_block(w, block, std::move(state), query, runtime, ctx);
          break;
      }
    } catch (const Error& e) {
      rec.output_state = snapshot_state(state, opts.snapshot_limit);
      result.trace.blocks.push_back(std::move(rec));
      result.aborted = true;
      result.error = e.what();
      break;
    }
    if (!state.contains("response")) state["response"] = "";
    rec.output_state = snapshot_state(state, opts.snapshot_limit);
    result.trace.blocks.push_back(std::move(rec));
  }

  for (const auto& b : result.trace.blocks) {
    for (const auto& inv : b.invocations) {
      result.trace.prompt_tokens += inv.prompt_tokens;
      result.trace.completion_tokens += inv.completion_tokens;
    }
  }
  result.final_state = std::move(state);
  return result;
}

}  // namespace judgeflow
