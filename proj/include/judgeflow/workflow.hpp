#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "judgeflow/util.hpp"

namespace judgeflow {

inline constexpr int kDefaultMaxBlocks = 3;
inline constexpr int kDefaultMaxIterations = 3;
inline constexpr const char* kDefaultConditionField = "result";

enum class OperatorKind {
  Generate,
  Test,
  SelfRefine,
  MultiGenerateEnsemble,
  Programmer,
};

const char* operator_kind_name(OperatorKind k);
OperatorKind operator_kind_from_string(const std::string& s);

struct OperatorConfig {
  std::string alias;
  OperatorKind kind = OperatorKind::Generate;
  std::string model;        // empty = runtime default
  std::string instruction;
  json params = json::object();

  json to_json() const;  // map-value form, alias excluded
  bool operator==(const OperatorConfig& o) const {
    return alias == o.alias && kind == o.kind && model == o.model &&
           instruction == o.instruction && params == o.params;
  }
};

enum class BlockVariant { Seq, For, Cond };

const char* block_variant_name(BlockVariant v);

struct LoopCondition {
  std::string field;
  json equals;
  bool operator==(const LoopCondition& o) const {
    return field == o.field && equals == o.equals;
  }
};

struct LogicBlock {
  std::string name;
  BlockVariant variant = BlockVariant::Seq;
  // seq / for
  std::vector<std::string> operators;
  // for
  int max_iterations = kDefaultMaxIterations;
  std::optional<LoopCondition> condition;
  // cond
  std::string condition_operator;
  std::vector<std::string> success_operators;
  std::vector<std::string> failure_operators;
  std::string condition_field = kDefaultConditionField;

  json to_json() const;  // map-value form, name excluded
  std::vector<std::string> referenced_aliases() const;  // deduped, order of first use
  bool operator==(const LogicBlock& o) const { return to_json() == o.to_json() && name == o.name; }
};

struct Workflow {
  std::map<std::string, LogicBlock> blocks;
  std::vector<std::string> order;
  std::map<std::string, OperatorConfig> operators;
  std::string id;  // hex hash of the canonical text
};

Workflow parse_workflow(const std::string& text, int m_max = kDefaultMaxBlocks);
Workflow parse_workflow_json(const json& doc, int m_max = kDefaultMaxBlocks);

// Every invariant violation, not just the first. Empty = valid.
std::vector<std::string> validate(const Workflow& w, int m_max = kDefaultMaxBlocks);

json workflow_to_json(const Workflow& w);
std::string canonicalize(const Workflow& w);
std::string workflow_id(const Workflow& w);

// Validates and stamps the id; throws Error(Validation) on violations.
Workflow finalized(Workflow w, int m_max = kDefaultMaxBlocks);

// Copy with operator configs referenced by no block removed.
Workflow pruned(const Workflow& w);

enum class ActionKind { AddBlock, RemoveBlock, ModifyBlock };
enum class Placement { Before, After };

const char* action_kind_name(ActionKind k);
const char* placement_name(Placement p);

struct ModAction {
  ActionKind action = ActionKind::ModifyBlock;
  std::string target;
  // AddBlock / ModifyBlock payload
  std::optional<LogicBlock> block;
  std::map<std::string, OperatorConfig> ops;
  Placement placement = Placement::After;  // AddBlock only

  json to_json() const;  // summary form for round records
};

// New block names introduced by AddBlock must look like b<positive integer>.
bool is_fresh_block_name(const std::string& name);

Workflow apply_action(const Workflow& w, const ModAction& a,
                      int m_max = kDefaultMaxBlocks);

// The unique single legal action on `target` turning old_w into new_w.
// Unreferenced operator configs are ignored on both sides.
ModAction classify_diff(const Workflow& old_w, const Workflow& new_w,
                        const std::string& target);

}  // namespace judgeflow
