#include "judgeflow/prompts.hpp"

#include <filesystem>

#include "judgeflow/errors.hpp"
#include "judgeflow/util.hpp"

namespace judgeflow {

namespace {

const char* kGenerateTemplate = R"(## INSTRUCTION
{instruction}

## PROBLEM
{problem}
{previous_section}
Provide your final answer.
)";

const char* kGeneratePreviousSection = R"(
## PREVIOUS
{previous}
)";

const char* kGenerateCandidateMark = "## CANDIDATE {index}/{count}\n";

const char* kSelfRefineTemplate = R"(## INSTRUCTION
{instruction}

## PROBLEM
{problem}

## CURRENT SOLUTION
{response}
{feedback_section}
Improve the current solution. Return only the improved solution.
)";

const char* kFeedbackSection = R"(
## FEEDBACK
{feedback}
)";

const char* kEnsembleTemplate = R"(## INSTRUCTION
{instruction}

## PROBLEM
{problem}

## CANDIDATES
{candidates}

Pick the candidate most consistent with the others (self-consistency vote).
Reply with the winning candidate number only.
)";

const char* kProgrammerTemplate = R"(## INSTRUCTION
{instruction}

## PROBLEM
{problem}
{previous_section}{feedback_section}
Write a complete Python program that solves the problem and prints only the
final answer to stdout. Return only the code.
)";

const char* kJudgeSystemPrompt = R"(You are a workflow failure analyst. Given execution evidence from a block-based AI workflow that produced an incorrect answer, determine which logic block is causally responsible for the failure.

# Knowledge Base
## Logic block types
{logic_block_descriptions_text}

## Operator types
{operator_descriptions_text}

# Responsibility Principles:
- Consider blocks that actually make mistakes over blocks that only perform redundant work.
- Our goal is to identify the weakest block in this workflow, so that in later optimization we can focus on improving this weakest block.
- You will be given: the problem, the correct answer, the incorrect answer, the workflow execution trace, and each block's inputs/outputs in a sequential pipeline. Ground your judgment in this evidence:
    - For each block, compare its output vs. input, and output vs. the correct answer to locate where the first critical deviation was introduced, how later blocks propagated/amplified it, and whether any block had enough information to correct it but failed to do so.
    - Do not overweight temporal order:
    - Earlier blocks bear more responsibility for introducing the critical error.
    - Later blocks bear responsibility for failing to correct earlier errors given the available context.
- If two blocks seem equally responsible, apply counterfactual reasoning: If this block were correct, would the final answer be correct?
- You may form a brief internal natural-language reason (e.g.,"this block generated incorrect code") to aid the decision, but the output must be JSON only.

# Output Contract
Return a JSON object mapping each block name to a unique integer rank (1 = most responsible, n = least responsible). Each rank from 1 to n must appear exactly once. Output JSON only, no explanations.
)";

const char* kOptimizerSystemPrompt = R"(You are an expert workflow optimization assistant specializing in Logic Block-based AI workflows for the {dataset} dataset.

IMPORTANT: Focus exclusively on optimizing the low-performing logic block to improve code generation quality and overall workflow performance.
IMPORTANT: You have exactly one optimization attempt. Reason carefully and aim to improve performance across the entire dataset.

# Task Overview

You will be provided with:
1. Error examples showing: problem, correct answer, workflow's wrong answer, and the low-performing block's output
2. Current workflow definition
3. Performance analysis results

Your objective: Optimize the identified low-performing logic block using the error examples as guidance while avoiding overfitting.

# Logic Block Types and Detailed Semantics
{logic_blocks_section}

# Available Operators
{operators_section}

# Critical Instructions for Operator Usage

INSTRUCTION Field is Crucial:
- The `instruction` field is extremely important for operator performance and directly impacts final output quality
- Instructions should clearly guide the operator on how to process input and produce expected output
- For code generation tasks, instructions need to include specific programming requirements, output format, and quality standards
- For mathematical reasoning tasks, instructions need to include specific problem-solving approaches, step-by-step reasoning requirements, and output format standards

# Optimization Strategies

Choose exactly one strategy:

## 1. Add Block Strategy
- Create a completely new logic block with its own name (e.g., "b2", "b3")
- Insert the new block immediately before or after the low-performing block
- Select appropriate block type (seq/for/cond) that complements the low-performing block
- Populate all required parameters (instructions, iteration limits, condition fields, etc.)
- Run internal counterfactual reasoning but do not output explorations

Example: from `"workflow": ["b1", "b2"] ("b2" performs worst) to "workflow": ["b1", "b2", "b3"]`

## 2. Remove Block Strategy
- Completely delete the low-performing block when it adds noise or harms outcomes
- Internally evaluate workflow behavior without that block
- Update workflow sequence and remove unused operators

Example: from `"workflow": ["b1", "b2"] ("b1" performs worst) to "workflow": ["b2"]`

## 3. Modify Block Strategy
- Rework the existing low-performing block without introducing new blocks
- Examine block's logic type, operator choices, and parameterization
- Update operators, ordering, and configuration for stronger reasoning
- Focus solely on refining the current block

# Critical Constraints

CRITICAL: Maximum 3 blocks per workflow - DO NOT EXCEED this limit
CRITICAL: Create NEW BLOCK with different name when adding
IMPORTANT: Focus on the low-performing block identified in the analysis
IMPORTANT: Maintain compatibility with other blocks in the workflow
IMPORTANT: Each block should have a clear, distinct purpose

# Prohibited Actions

- NEVER reproduce workflow configurations matching provided history
- MUST NOT repeat, reuse, or recycle any optimization from Previous Optimization Analysis
- All workflows in previous optimization analysis are explicitly banned
- Run internal "novelty check" to confirm at least two structural differences from banned workflows

# Output Requirements

- Apply exactly one modification strategy (Add/Remove/Modify)
- Focus only on the identified low-performing logic block
- Output clean JSON without comments or explanations
- Ensure JSON is fully parseable and syntactically correct
- Avoid overfitting to provided error examples
)";

const char* kOptimizerUserPrompt = R"(
## Dataset
<dataset>{dataset}</dataset>

## Current Workflow Performance
Current workflow score: <score>{score}</score>

Low-performing logic block identified:
<low_performing_blocks>{low_performing_blocks}</low_performing_blocks>

## Current Workflow Definition
```json
<previous_code>{previous_code}</previous_code>
```

## Error Analysis
Error examples show:
- Problem: Original code generation task/question
- Correct Answer: Expected output
- Workflow Wrong Answer: Current workflow output
- Low-performing Block Output: Problematic block's specific output

## Previous Optimization History
STRICTLY PROHIBITED: Do not repeat or reuse any optimization results below.
<reflection_result>{reflection_result}</reflection_result>

IMPORTANT: All workflows above and current definition are disallowed baselines.

# Optimization Task

Analyze the low-performing logic block and improve its output quality.

## Core Optimization Objective
Your optimization purpose is to modify the weakest block:
- Deeply analyze why this weak block led to the final incorrect answer
- Understand the block's role and impact within the entire workflow
- Identify the specific failure patterns and root causes of this block
- Your chosen action (Add/Modify/Remove) should be aimed at solving the current problems

## Key Focus Areas
- Low-performing block is your primary optimization target
- Use error cases to understand failure patterns
- Improve block's reasoning or processing capability
- Evaluate block type appropriateness (seq/for/cond)
- Assess operator suitability and configuration
- Pay special attention to the quality and detail of instruction fields

## Strategy Guidelines
Current workflow has <workflow_block_count>{workflow_block_count}</workflow_block_count> block(s).

## Error Examples
Use these to understand failures, but avoid overfitting:
<error_cases_section>{error_cases_section}</error_cases_section>
)";

const char* kSeqDescription =
    "Execute operators strictly in order. Required fields: name (string), type (must be "
    "'seq'), operators (array of operator aliases). No optional fields. Use this for "
    "linear processing flows where you need sequential execution of operators.";

const char* kForDescription =
    "Iteratively execute a sequence of operators until the optional asynchronous "
    "condition returns False or the max iteration limit is reached. Required fields: "
    "name (string), type (must be 'for'), operators (array of operator aliases). "
    "Optional fields: max_iterations (integer, default 3), condition (object with "
    "'field' and 'equals' properties, or null for no condition). Use this for retry "
    "mechanisms and iterative refinement.";

const char* kCondDescription =
    "Run a dedicated condition operator first, then choose the success or failure "
    "branch based on the field specified by 'condition_field'. The chosen branch runs "
    "sequentially with the same data-passing semantics as SequenceLogic. Required "
    "fields: name (string), type (must be 'cond'), condition_operator (string, "
    "operator alias to evaluate condition), success_operators (array of operator "
    "aliases for success path), failure_operators (array of operator aliases for "
    "failure path). Optional fields: condition_field (string, field name to check for "
    "condition result, default 'result'). The condition operator evaluates criteria "
    "and sets a result field, which determines whether to execute success_operators "
    "or failure_operators. Use this for branching logic and conditional processing.";

struct OperatorDescription {
  const char* name;
  const char* text;
};

const OperatorDescription kOperatorDescriptions[] = {
    {"generate",
     "a generation operator that produces candidate solutions based on the problem "
     "description and optional previous results."},
    {"test",
     "a testing operator that executes generated solutions against test cases and "
     "provides feedback for refinement."},
    {"self_refine",
     "a refinement operator that improves a given solution through self-refinement."},
    {"multi_generate_ensemble",
     "an ensemble operator that generates multiple solutions and combine them to the "
     "best one via self-consistency."},
    {"programmer",
     "a synthesis-and-execution operator that generates Python code for solving math "
     "problems, runs it in a restricted environment, and iteratively repairs errors."},
};

}  // namespace

PromptTemplates::PromptTemplates() {
  templates_["generate"] = kGenerateTemplate;
  templates_["generate_previous_section"] = kGeneratePreviousSection;
  templates_["generate_candidate_mark"] = kGenerateCandidateMark;
  templates_["self_refine"] = kSelfRefineTemplate;
  templates_["feedback_section"] = kFeedbackSection;
  templates_["ensemble"] = kEnsembleTemplate;
  templates_["programmer"] = kProgrammerTemplate;
}

void PromptTemplates::load_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  for (auto& [name, text] : templates_) {
    fs::path p = fs::path(dir) / (name + ".txt");
    std::error_code ec;
    if (fs::exists(p, ec)) text = read_file(p.string());
  }
}

const std::string& PromptTemplates::get(const std::string& name) const {
  auto it = templates_.find(name);
  if (it == templates_.end())
    throw Error(ErrorKind::ConfigError, "unknown prompt template '" + name + "'");
  return it->second;
}

std::string logic_block_descriptions_text() {
  std::string out;
  out += "- SequenceLogic (seq): " + std::string(kSeqDescription) + "\n";
  out += "- LoopLogic (for): " + std::string(kForDescription) + "\n";
  out += "- ConditionalLogic (cond): " + std::string(kCondDescription) + "\n";
  return out;
}

std::string operator_descriptions_text() {
  std::string out;
  for (const auto& d : kOperatorDescriptions)
    out += "- " + std::string(d.name) + ": " + d.text + "\n";
  return out;
}

std::string logic_blocks_section() {
  json section = {
      {"SequenceLogic",
       {{"type", "seq"},
        {"description", kSeqDescription},
        {"structure",
         {{"name", "block_name"}, {"type", "seq"}, {"operators", json::array({"operator"})}}},
        {"input_flow", "block_input -> op1 -> op2 -> ... -> block_output"}}},
      {"LoopLogic",
       {{"type", "for"},
        {"description", kForDescription},
        {"structure",
         {{"name", "block_name"},
          {"type", "for"},
          {"operators", json::array({"operator"})},
          {"max_iterations", "num_iterations"},
          {"condition", {{"field", "field_name"}, {"equals", "some_value"}}}}},
        {"input_flow", "block_input -> repeat [op1 -> op2 -> ...] until stop -> block_output"}}},
      {"ConditionalLogic",
       {{"type", "cond"},
        {"description", kCondDescription},
        {"structure",
         {{"name", "block_name"},
          {"type", "cond"},
          {"condition_operator", "condition_operator"},
          {"success_operators", json::array({"success_op"})},
          {"failure_operators", json::array({"failure_op"})},
          {"condition_field", "field_name"}}},
        {"input_flow",
         "block_input -> condition operator -> select branch -> branch sequence -> block_output"}}}};
  return section.dump(2);
}

std::string operators_section() {
  return operator_descriptions_text();
}

std::string judge_system_prompt() {
  std::string out = kJudgeSystemPrompt;
  out = replace_all(out, "{logic_block_descriptions_text}", logic_block_descriptions_text());
  out = replace_all(out, "{operator_descriptions_text}", operator_descriptions_text());
  return out;
}

std::string optimizer_system_prompt(const std::string& dataset) {
  std::string out = kOptimizerSystemPrompt;
  out = replace_all(out, "{dataset}", dataset);
  out = replace_all(out, "{logic_blocks_section}", logic_blocks_section());
  out = replace_all(out, "{operators_section}", operators_section());
  return out;
}

std::string optimizer_user_prompt(const OptimizerUserInputs& in) {
  std::string out = kOptimizerUserPrompt;
  out = replace_all(out, "{dataset}", in.dataset);
  out = replace_all(out, "{score}", in.score);
  out = replace_all(out, "{low_performing_blocks}", in.low_performing_block);
  out = replace_all(out, "{previous_code}", in.previous_code);
  out = replace_all(out, "{reflection_result}", in.reflection_result);
  out = replace_all(out, "{workflow_block_count}", std::to_string(in.workflow_block_count));
  out = replace_all(out, "{error_cases_section}", in.error_cases_section);
  return out;
}

}  // namespace judgeflow
