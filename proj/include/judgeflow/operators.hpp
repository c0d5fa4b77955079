#pragma once

#include <functional>
#include <map>
#include <string>

#include "judgeflow/dataset.hpp"
#include "judgeflow/gateway.hpp"
#include "judgeflow/prompts.hpp"
#include "judgeflow/sandbox.hpp"
#include "judgeflow/trace.hpp"
#include "judgeflow/workflow.hpp"

namespace judgeflow {

struct OperatorCallContext {
  Gateway* gateway = nullptr;
  const Sandbox* sandbox = nullptr;
  const TaskInstance* task = nullptr;
  const PromptTemplates* templates = nullptr;
  std::string default_model;
  double temperature = 0.7;
  int max_tokens = 4096;
  BlockRecord* record = nullptr;  // invocation sink, may be null

  // One backend call; appends the invocation to the sink. Wraps transport
  // errors as OperatorFailure.
  ChatResult call_backend(const OperatorConfig& cfg, const std::string& user_prompt);
  void note_invocation(const OperatorConfig& cfg, const std::string& input_digest_src,
                       const std::string& output);
  const std::string& tpl(const std::string& name) const;
};

using OperatorHandler = std::function<json(
    json state, const std::string& query, const OperatorConfig& cfg,
    OperatorCallContext& ctx)>;

json op_generate(json state, const std::string& query, const OperatorConfig& cfg,
                 OperatorCallContext& ctx);
json op_test(json state, const std::string& query, const OperatorConfig& cfg,
             OperatorCallContext& ctx);
json op_self_refine(json state, const std::string& query, const OperatorConfig& cfg,
                    OperatorCallContext& ctx);
json op_multi_generate_ensemble(json state, const std::string& query,
                                const OperatorConfig& cfg, OperatorCallContext& ctx);
json op_programmer(json state, const std::string& query, const OperatorConfig& cfg,
                   OperatorCallContext& ctx);

class OperatorRuntime {
 public:
  OperatorRuntime(Gateway* gateway, const Sandbox* sandbox, std::string default_model,
                  double temperature = 0.7, const PromptTemplates* templates = nullptr);

  // Test hook: replace a kind's handler (e.g. with a scripted function).
  void set_handler(OperatorKind kind, OperatorHandler handler);

  OperatorCallContext make_context(BlockRecord* record, const TaskInstance* task) const;

  // Dispatches to the kind's handler; synthesizes one invocation entry if the
  // handler recorded none, so every operator shows up in the trace.
  json invoke(const OperatorConfig& cfg, json state, const std::string& query,
              OperatorCallContext& ctx) const;

  int max_tokens = 4096;

 private:
  std::map<OperatorKind, OperatorHandler> handlers_;
  Gateway* gateway_;
  const Sandbox* sandbox_;
  std::string default_model_;
  double temperature_;
  const PromptTemplates* templates_;
  PromptTemplates default_templates_;
};

}  // namespace judgeflow
