#pragma once

#include <map>
#include <string>

namespace judgeflow {

// Minimal named-section templates for the five operators. Defaults are
// compiled in; load_dir overrides any of them from <dir>/<name>.txt.
class PromptTemplates {
 public:
  PromptTemplates();
  void load_dir(const std::string& dir);
  const std::string& get(const std::string& name) const;

 private:
  std::map<std::string, std::string> templates_;
};

// Block-type and operator descriptions used to fill judge/optimizer prompts.
std::string logic_block_descriptions_text();
std::string operator_descriptions_text();
std::string logic_blocks_section();
std::string operators_section();

std::string judge_system_prompt();

std::string optimizer_system_prompt(const std::string& dataset);

struct OptimizerUserInputs {
  std::string dataset;
  std::string score;
  std::string low_performing_block;
  std::string previous_code;       // current workflow document
  std::string reflection_result;   // optimization history
  int workflow_block_count = 0;
  std::string error_cases_section;
};

std::string optimizer_user_prompt(const OptimizerUserInputs& in);

}  // namespace judgeflow
