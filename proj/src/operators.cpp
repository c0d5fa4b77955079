#include "judgeflow/operators.hpp"

#include <algorithm>

#include "judgeflow/errors.hpp"

namespace judgeflow {

namespace {

std::string state_string(const json& state, const std::string& key) {
  if (!state.contains(key)) return "";
  const json& v = state[key];
  return v.is_string() ? v.get<std::string>() : v.dump();
}

std::string render_generate_prompt(const json& state, const std::string& query,
                                   const OperatorConfig& cfg, OperatorCallContext& ctx) {
  std::string previous = state_string(state, "response");
  std::string previous_section;
  if (!previous.empty())
    previous_section =
        replace_all(ctx.tpl("generate_previous_section"), "{previous}", previous);
  std::string prompt = ctx.tpl("generate");
  prompt = replace_all(prompt, "{instruction}", cfg.instruction);
  prompt = replace_all(prompt, "{problem}", query);
  prompt = replace_all(prompt, "{previous_section}", previous_section);
  return prompt;
}

long long int_param(const OperatorConfig& cfg, const std::string& key, long long fallback) {
  if (!cfg.params.contains(key)) return fallback;
  const json& v = cfg.params[key];
  if (!v.is_number_integer())
    throw Error(ErrorKind::Validation,
                "operator '" + cfg.alias + "' param '" + key + "' must be an integer");
  return v.get<long long>();
}

// First integer in the text, or -1.
long long first_integer(const std::string& text) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (std::isdigit(static_cast<unsigned char>(text[i]))) {
      std::size_t j = i;
      while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      return std::stoll(text.substr(i, j - i));
    }
  }
  return -1;
}

}  // namespace

ChatResult OperatorCallContext::call_backend(const OperatorConfig& cfg,
                                             const std::string& user_prompt) {
  if (!gateway) throw Error(ErrorKind::OperatorFailure, "no backend configured");
  ChatRequest req;
  req.role = "executor";
  req.model = cfg.model.empty() ? default_model : cfg.model;
  req.messages.push_back({"user", user_prompt});
  req.temperature = temperature;
  req.max_tokens = max_tokens;
  try {
    ChatResult res = gateway->complete(req);
    if (record) {
      OpInvocation inv;
      inv.alias = cfg.alias;
      inv.prompt_digest = req.prompt_digest();
      inv.output = res.text;
      inv.prompt_tokens = res.usage.prompt_tokens;
      inv.completion_tokens = res.usage.completion_tokens;
      record->invocations.push_back(std::move(inv));
    }
    return res;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::BackendExhausted || e.kind() == ErrorKind::BackendError)
      throw Error(ErrorKind::OperatorFailure,
                  "operator '" + cfg.alias + "' backend call failed: " + e.what());
    throw;
  }
}

void OperatorCallContext::note_invocation(const OperatorConfig& cfg,
                                          const std::string& input_digest_src,
                                          const std::string& output) {
  if (!record) return;
  OpInvocation inv;
  inv.alias = cfg.alias;
  inv.prompt_digest = hex64(fnv1a64(input_digest_src));
  inv.output = output;
  record->invocations.push_back(std::move(inv));
}

const std::string& OperatorCallContext::tpl(const std::string& name) const {
  static const PromptTemplates fallback;
  return (templates ? *templates : fallback).get(name);
}

json op_generate(json state, const std::string& query, const OperatorConfig& cfg,
                 OperatorCallContext& ctx) {
  if (trim(query).empty())
    throw Error(ErrorKind::Validation, "generate called with an empty query");
  ChatResult res = ctx.call_backend(cfg, render_generate_prompt(state, query, cfg, ctx));
  state["response"] = trim(res.text);
  return state;
}

json op_test(json state, const std::string& query, const OperatorConfig& cfg,
             OperatorCallContext& ctx) {
  (void)query;
  if (!ctx.sandbox) throw Error(ErrorKind::SandboxFailure, "test operator needs a sandbox");
  if (!ctx.task || ctx.task->tests.empty())
    throw Error(ErrorKind::Validation,
                "test operator '" + cfg.alias + "' requires a task with test cases");
  std::string code = extract_code(state);
  CodeRunResult run = ctx.sandbox->run(code, ctx.task->tests);
  state["result"] = run.passed ? "pass" : "fail";
  if (run.passed) {
    state["feedback"] = "all tests passed";
  } else {
    std::string summary;
    for (const auto& o : run.outcomes) {
      if (o.passed) continue;
      summary += "failed test: " + o.test + "\n  " + o.error + "\n";
    }
    state["feedback"] = truncate_field(summary, 2000);
  }
  ctx.note_invocation(cfg, code + "\x1f" + std::to_string(ctx.task->tests.size()),
                      state["result"].get<std::string>());
  return state;
}

json op_self_refine(json state, const std::string& query, const OperatorConfig& cfg,
                    OperatorCallContext& ctx) {
  std::string response = state_string(state, "response");
  if (response.empty())
    throw Error(ErrorKind::Validation,
                "self_refine '" + cfg.alias + "' requires a previous response");
  std::string feedback = state_string(state, "feedback");
  std::string feedback_section;
  if (!feedback.empty())
    feedback_section = replace_all(ctx.tpl("feedback_section"), "{feedback}", feedback);
  std::string prompt = ctx.tpl("self_refine");
  prompt = replace_all(prompt, "{instruction}", cfg.instruction);
  prompt = replace_all(prompt, "{problem}", query);
  prompt = replace_all(prompt, "{response}", response);
  prompt = replace_all(prompt, "{feedback_section}", feedback_section);
  ChatResult res = ctx.call_backend(cfg, prompt);
  state["response"] = trim(res.text);
  return state;
}

json op_multi_generate_ensemble(json state, const std::string& query,
                                const OperatorConfig& cfg, OperatorCallContext& ctx) {
  if (trim(query).empty())
    throw Error(ErrorKind::Validation, "ensemble called with an empty query");
  long long n = int_param(cfg, "num_solutions", 1);
  if (n < 1)
    throw Error(ErrorKind::Validation,
                "operator '" + cfg.alias + "' num_solutions must be >= 1");

  std::vector<std::string> candidates;
  for (long long i = 1; i <= n; ++i) {
    std::string mark = ctx.tpl("generate_candidate_mark");
    mark = replace_all(mark, "{index}", std::to_string(i));
    mark = replace_all(mark, "{count}", std::to_string(n));
    ChatResult res =
        ctx.call_backend(cfg, mark + render_generate_prompt(state, query, cfg, ctx));
    candidates.push_back(trim(res.text));
  }

  if (n == 1) {
    // a single candidate needs no ensemble call
    state["response"] = candidates[0];
    return state;
  }

  std::string listing;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    listing += std::to_string(i + 1) + ". " + candidates[i] + "\n";
  std::string prompt = ctx.tpl("ensemble");
  prompt = replace_all(prompt, "{instruction}", cfg.instruction);
  prompt = replace_all(prompt, "{problem}", query);
  prompt = replace_all(prompt, "{candidates}", listing);
  ChatResult res = ctx.call_backend(cfg, prompt);

  long long pick = first_integer(res.text);
  if (pick >= 1 && pick <= n) {
    state["response"] = candidates[static_cast<std::size_t>(pick - 1)];
    return state;
  }
  // unparsable vote: exact-string majority, ties to the first occurrence
  std::size_t best = 0, best_count = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    std::size_t count = static_cast<std::size_t>(
        std::count(candidates.begin(), candidates.end(), candidates[i]));
    if (count > best_count) {
      best_count = count;
      best = i;
    }
  }
  state["response"] = candidates[best];
  return state;
}

json op_programmer(json state, const std::string& query, const OperatorConfig& cfg,
                   OperatorCallContext& ctx) {
  if (!ctx.sandbox)
    throw Error(ErrorKind::SandboxFailure, "programmer operator needs a sandbox");
  if (trim(query).empty())
    throw Error(ErrorKind::Validation, "programmer called with an empty query");
  long long attempts = int_param(cfg, "max_repair_attempts", 3);
  if (attempts < 1)
    throw Error(ErrorKind::Validation,
                "operator '" + cfg.alias + "' max_repair_attempts must be >= 1");

  std::string prev_code;
  std::string error_text;
  for (long long attempt = 1; attempt <= attempts; ++attempt) {
    std::string previous_section;
    if (!prev_code.empty())
      previous_section =
          replace_all(ctx.tpl("generate_previous_section"), "{previous}", prev_code);
    std::string feedback_section;
    if (!error_text.empty())
      feedback_section = replace_all(ctx.tpl("feedback_section"), "{feedback}", error_text);
    std::string prompt = ctx.tpl("programmer");
    prompt = replace_all(prompt, "{instruction}", cfg.instruction);
    prompt = replace_all(prompt, "{problem}", query);
    prompt = replace_all(prompt, "{previous_section}", previous_section);
    prompt = replace_all(prompt, "{feedback_section}", feedback_section);
    ChatResult res = ctx.call_backend(cfg, prompt);

    std::string code = extract_code(json{{"response", trim(res.text)}});
    CodeRunResult run = ctx.sandbox->run(code, {});
    if (run.passed) {
      state["response"] = trim(run.stdout_excerpt);
      state["code"] = code;
      state["result"] = "pass";
      return state;
    }
    prev_code = code;
    error_text = run.outcomes.empty() ? "run failed" : run.outcomes.front().error;
  }
  state["code"] = prev_code;
  state["result"] = "fail";
  state["feedback"] = truncate_field(error_text, 2000);
  return state;
}

OperatorRuntime::OperatorRuntime(Gateway* gateway, const Sandbox* sandbox,
                                 std::string default_model, double temperature,
                                 const PromptTemplates* templates)
    : gateway_(gateway),
      sandbox_(sandbox),
      default_model_(std::move(default_model)),
      temperature_(temperature),
      templates_(templates) {
  handlers_[OperatorKind::Generate] = op_generate;
  handlers_[OperatorKind::Test] = op_test;
  handlers_[OperatorKind::SelfRefine] = op_self_refine;
  handlers_[OperatorKind::MultiGenerateEnsemble] = op_multi_generate_ensemble;
  handlers_[OperatorKind::Programmer] = op_programmer;
}

void OperatorRuntime::set_handler(OperatorKind kind, OperatorHandler handler) {
  handlers_[kind] = std::move(handler);
}

OperatorCallContext OperatorRuntime::make_context(BlockRecord* record,
                                                  const TaskInstance* task) const {
  OperatorCallContext ctx;
  ctx.gateway = gateway_;
  ctx.sandbox = sandbox_;
  ctx.task = task;
  ctx.templates = templates_ ? templates_ : &default_templates_;
  ctx.default_model = default_model_;
  ctx.temperature = temperature_;
  ctx.max_tokens = max_tokens;
  ctx.record = record;
  return ctx;
}

json OperatorRuntime::invoke(const OperatorConfig& cfg, json state,
                             const std::string& query, OperatorCallContext& ctx) const {
  std::size_t before = ctx.record ? ctx.record->invocations.size() : 0;
  json out = handlers_.at(cfg.kind)(std::move(state), query, cfg, ctx);
  if (ctx.record && ctx.record->invocations.size() == before) {
    // scripted handlers may not touch the sink; keep the trace complete
    OpInvocation inv;
    inv.alias = cfg.alias;
    inv.prompt_digest = hex64(fnv1a64(canonical_dump(out) + "\x1f" + query));
    inv.output = out.contains("response") && out["response"].is_string()
                     ? out["response"].get<std::string>()
                     : canonical_dump(out);
    ctx.record->invocations.push_back(std::move(inv));
  }
  return out;
}

}  // namespace judgeflow
