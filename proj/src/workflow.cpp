#include "judgeflow/workflow.hpp"

#include <algorithm>
#include <set>

#include "judgeflow/errors.hpp"

namespace judgeflow {

namespace {

const char* const kOperatorKindNames[] = {
    "generate", "test", "self_refine", "multi_generate_ensemble", "programmer"};

bool is_scalar(const json& v) {
  return v.is_string() || v.is_number() || v.is_boolean();
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

void require_field(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key))
    throw Error(ErrorKind::Schema, where + " missing required field '" + key + "'");
}

std::vector<std::string> string_array(const json& v, const std::string& where) {
  if (!v.is_array())
    throw Error(ErrorKind::Schema, where + " must be an array of operator aliases");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string())
      throw Error(ErrorKind::Schema, where + " entries must be strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key()))
      throw Error(ErrorKind::Schema,
                  where + " has field '" + it.key() + "' not valid for its type");
  }
}

OperatorConfig parse_operator(const std::string& alias, const json& rec) {
  if (!rec.is_object())
    throw Error(ErrorKind::Schema, "operator '" + alias + "' must be an object");
  require_field(rec, "kind", "operator '" + alias + "'");
  reject_unknown_keys(rec, {"kind", "model", "instruction", "params"},
                      "operator '" + alias + "'");
  OperatorConfig cfg;
  cfg.alias = alias;
  if (!rec["kind"].is_string())
    throw Error(ErrorKind::Schema, "operator '" + alias + "' kind must be a string");
  cfg.kind = operator_kind_from_string(rec["kind"].get<std::string>());
  if (rec.contains("model")) {
    if (!rec["model"].is_string())
      throw Error(ErrorKind::Schema, "operator '" + alias + "' model must be a string");
    cfg.model = rec["model"].get<std::string>();
  }
  if (rec.contains("instruction")) {
    if (!rec["instruction"].is_string())
      throw Error(ErrorKind::Schema,
                  "operator '" + alias + "' instruction must be a string");
    cfg.instruction = rec["instruction"].get<std::string>();
  }
  if (rec.contains("params")) {
    if (!rec["params"].is_object())
      throw Error(ErrorKind::Schema, "operator '" + alias + "' params must be an object");
    for (auto it = rec["params"].begin(); it != rec["params"].end(); ++it) {
      if (!is_scalar(it.value()))
        throw Error(ErrorKind::Schema, "operator '" + alias + "' param '" + it.key() +
                                           "' must be a scalar");
    }
    cfg.params = rec["params"];
  }
  return cfg;
}

LogicBlock parse_block(const std::string& name, const json& rec) {
  if (!rec.is_object())
    throw Error(ErrorKind::Schema, "block '" + name + "' must be an object");
  require_field(rec, "type", "block '" + name + "'");
  if (!rec["type"].is_string())
    throw Error(ErrorKind::Schema, "block '" + name + "' type must be a string");
  std::string type = rec["type"].get<std::string>();

  LogicBlock b;
  b.name = name;
  if (type == "seq") {
    b.variant = BlockVariant::Seq;
    reject_unknown_keys(rec, {"type", "operators"}, "seq block '" + name + "'");
    require_field(rec, "operators", "block '" + name + "'");
    b.operators = string_array(rec["operators"], "block '" + name + "' operators");
    if (b.operators.empty())
      throw Error(ErrorKind::Schema, "block '" + name + "' operators must be non-empty");
  } else if (type == "for") {
    b.variant = BlockVariant::For;
    reject_unknown_keys(rec, {"type", "operators", "max_iterations", "condition"},
                        "for block '" + name + "'");
    require_field(rec, "operators", "block '" + name + "'");
    b.operators = string_array(rec["operators"], "block '" + name + "' operators");
    if (b.operators.empty())
      throw Error(ErrorKind::Schema, "block '" + name + "' operators must be non-empty");
    if (rec.contains("max_iterations")) {
      if (!rec["max_iterations"].is_number_integer())
        throw Error(ErrorKind::Schema,
                    "block '" + name + "' max_iterations must be an integer");
      b.max_iterations = rec["max_iterations"].get<int>();
    }
    if (rec.contains("condition") && !rec["condition"].is_null()) {
      const json& c = rec["condition"];
      if (!c.is_object())
        throw Error(ErrorKind::Schema, "block '" + name + "' condition must be an object");
      require_field(c, "field", "block '" + name + "' condition");
      require_field(c, "equals", "block '" + name + "' condition");
      reject_unknown_keys(c, {"field", "equals"}, "block '" + name + "' condition");
      if (!c["field"].is_string())
        throw Error(ErrorKind::Schema,
                    "block '" + name + "' condition field must be a string");
      if (!is_scalar(c["equals"]))
        throw Error(ErrorKind::Schema,
                    "block '" + name + "' condition equals must be a scalar");
      b.condition = LoopCondition{c["field"].get<std::string>(), c["equals"]};
    }
  } else if (type == "cond") {
    b.variant = BlockVariant::Cond;
    reject_unknown_keys(rec,
                        {"type", "condition_operator", "success_operators",
                         "failure_operators", "condition_field"},
                        "cond block '" + name + "'");
    require_field(rec, "condition_operator", "block '" + name + "'");
    require_field(rec, "success_operators", "block '" + name + "'");
    require_field(rec, "failure_operators", "block '" + name + "'");
    if (!rec["condition_operator"].is_string())
      throw Error(ErrorKind::Schema,
                  "block '" + name + "' condition_operator must be a string");
    b.condition_operator = rec["condition_operator"].get<std::string>();
    b.success_operators =
        string_array(rec["success_operators"], "block '" + name + "' success_operators");
    b.failure_operators =
        string_array(rec["failure_operators"], "block '" + name + "' failure_operators");
    if (rec.contains("condition_field")) {
      if (!rec["condition_field"].is_string())
        throw Error(ErrorKind::Schema,
                    "block '" + name + "' condition_field must be a string");
      b.condition_field = rec["condition_field"].get<std::string>();
    }
  } else {
    throw Error(ErrorKind::Schema, "block '" + name + "' has unknown type '" + type + "'");
  }
  return b;
}

json expanded_block(const Workflow& w, const std::string& name) {
  const LogicBlock& b = w.blocks.at(name);
  json ops = json::object();
  for (const auto& alias : b.referenced_aliases()) {
    auto it = w.operators.find(alias);
    if (it != w.operators.end()) ops[alias] = it->second.to_json();
  }
  return json{{"block", b.to_json()}, {"ops", ops}};
}

}  // namespace

const char* operator_kind_name(OperatorKind k) {
  return kOperatorKindNames[static_cast<int>(k)];
}

OperatorKind operator_kind_from_string(const std::string& s) {
  for (int i = 0; i < 5; ++i)
    if (s == kOperatorKindNames[i]) return static_cast<OperatorKind>(i);
  throw Error(ErrorKind::Schema, "unknown operator kind '" + s + "'");
}

const char* block_variant_name(BlockVariant v) {
  switch (v) {
    case BlockVariant::Seq: return "seq";
    case BlockVariant::For: return "for";
    case BlockVariant::Cond: return "cond";
  }
  return "?";
}

const char* action_kind_name(ActionKind k) {
  switch (k) {
    case ActionKind::AddBlock: return "AddBlock";
    case ActionKind::RemoveBlock: return "RemoveBlock";
    case ActionKind::ModifyBlock: return "ModifyBlock";
  }
  return "?";
}

const char* placement_name(Placement p) {
  return p == Placement::Before ? "before" : "after";
}

json OperatorConfig::to_json() const {
  return json{{"kind", operator_kind_name(kind)},
              {"model", model},
              {"instruction", instruction},
              {"params", params}};
}

json LogicBlock::to_json() const {
  json rec;
  rec["type"] = block_variant_name(variant);
  switch (variant) {
    case BlockVariant::Seq:
      rec["operators"] = operators;
      break;
    case BlockVariant::For:
      rec["operators"] = operators;
      rec["max_iterations"] = max_iterations;
      if (condition)
        rec["condition"] = json{{"field", condition->field}, {"equals", condition->equals}};
      break;
    case BlockVariant::Cond:
      rec["condition_operator"] = condition_operator;
      rec["success_operators"] = success_operators;
      rec["failure_operators"] = failure_operators;
      rec["condition_field"] = condition_field;
      break;
  }
  return rec;
}

std::vector<std::string> LogicBlock::referenced_aliases() const {
  std::vector<std::string> out;
  auto add = [&out](const std::string& a) {
    if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(a);
  };
  if (variant == BlockVariant::Cond) {
    add(condition_operator);
    for (const auto& a : success_operators) add(a);
    for (const auto& a : failure_operators) add(a);
  } else {
    for (const auto& a : operators) add(a);
  }
  return out;
}

Workflow parse_workflow(const std::string& text, int m_max) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded())
    throw Error(ErrorKind::Syntax, "workflow document is not valid JSON");
  return parse_workflow_json(doc, m_max);
}

Workflow parse_workflow_json(const json& doc, int m_max) {
  if (!doc.is_object())
    throw Error(ErrorKind::Schema, "workflow document must be a JSON object");
  require_field(doc, "operators", "document");
  require_field(doc, "blocks", "document");
  require_field(doc, "workflow", "document");
  reject_unknown_keys(doc, {"operators", "blocks", "workflow"}, "document");
  if (!doc["operators"].is_object())
    throw Error(ErrorKind::Schema, "'operators' must be a map alias -> config");
  if (!doc["blocks"].is_object())
    throw Error(ErrorKind::Schema, "'blocks' must be a map name -> block");
  if (!doc["workflow"].is_array())
    throw Error(ErrorKind::Schema, "'workflow' must be an array of block names");

  Workflow w;
  for (auto it = doc["operators"].begin(); it != doc["operators"].end(); ++it)
    w.operators.emplace(it.key(), parse_operator(it.key(), it.value()));
  for (auto it = doc["blocks"].begin(); it != doc["blocks"].end(); ++it)
    w.blocks.emplace(it.key(), parse_block(it.key(), it.value()));
  for (const auto& e : doc["workflow"]) {
    if (!e.is_string())
      throw Error(ErrorKind::Schema, "'workflow' entries must be block names");
    w.order.push_back(e.get<std::string>());
  }
  return finalized(std::move(w), m_max);
}

std::vector<std::string> validate(const Workflow& w, int m_max) {
  std::vector<std::string> out;
  if (w.order.empty()) out.push_back("workflow order is empty");
  if (static_cast<int>(w.order.size()) > m_max)
    out.push_back("workflow has " + std::to_string(w.order.size()) +
                  " blocks, maximum is " + std::to_string(m_max));
  std::set<std::string> seen;
  for (const auto& name : w.order) {
    if (!seen.insert(name).second)
      out.push_back("block '" + name + "' listed more than once in workflow order");
    if (!w.blocks.count(name))
      out.push_back("workflow order names missing block '" + name + "'");
  }
  for (const auto& [name, b] : w.blocks) {
    if (!seen.count(name))
      out.push_back("block '" + name + "' not listed in workflow order");
    if (name.empty()) out.push_back("block with empty name");
    if (b.variant != BlockVariant::Cond && b.operators.empty())
      out.push_back("block '" + name + "' has empty operator list");
    if (b.variant == BlockVariant::For && b.max_iterations < 1)
      out.push_back("block '" + name + "' field max_iterations must be >= 1, got " +
                    std::to_string(b.max_iterations));
    if (b.variant == BlockVariant::Cond && b.success_operators.empty() &&
        b.failure_operators.empty())
      out.push_back("block '" + name + "' has both cond branches empty");
    for (const auto& alias : b.referenced_aliases()) {
      if (!w.operators.count(alias))
        out.push_back("block '" + name + "' references missing operator '" + alias + "'");
    }
  }
  for (const auto& [alias, cfg] : w.operators) {
    if (alias.empty()) out.push_back("operator with empty alias");
    if (cfg.params.contains("num_solutions")) {
      const json& n = cfg.params["num_solutions"];
      if (!n.is_number_integer() || n.get<long long>() < 1)
        out.push_back("operator '" + alias + "' field num_solutions must be >= 1");
    }
    if (cfg.params.contains("max_repair_attempts")) {
      const json& n = cfg.params["max_repair_attempts"];
      if (!n.is_number_integer() || n.get<long long>() < 1)
        out.push_back("operator '" + alias + "' field max_repair_attempts must be >= 1");
    }
  }
  return out;
}

json workflow_to_json(const Workflow& w) {
  json ops = json::object();
  for (const auto& [alias, cfg] : w.operators) ops[alias] = cfg.to_json();
  json blocks = json::object();
  for (const auto& [name, b] : w.blocks) blocks[name] = b.to_json();
  return json{{"operators", ops}, {"blocks", blocks}, {"workflow", w.order}};
}

std::string canonicalize(const Workflow& w) {
  return canonical_dump(workflow_to_json(w));
}

std::string workflow_id(const Workflow& w) {
  return hex64(fnv1a64(canonicalize(w)));
}

Workflow finalized(Workflow w, int m_max) {
  auto violations = validate(w, m_max);
  if (!violations.empty())
    throw Error(ErrorKind::Validation, join(violations, "; "));
  w.id = workflow_id(w);
  return w;
}

Workflow pruned(const Workflow& w) {
  std::set<std::string> used;
  for (const auto& [name, b] : w.blocks)
    for (const auto& a : b.referenced_aliases()) used.insert(a);
  Workflow out = w;
  for (auto it = out.operators.begin(); it != out.operators.end();) {
    if (!used.count(it->first))
      it = out.operators.erase(it);
    else
      ++it;
  }
  out.id = workflow_id(out);
  return out;
}

json ModAction::to_json() const {
  json rec{{"action", action_kind_name(action)}, {"target", target}};
  if (action == ActionKind::AddBlock) {
    rec["placement"] = placement_name(placement);
    rec["block"] = block ? block->name : "";
  }
  return rec;
}

bool is_fresh_block_name(const std::string& name) {
  if (name.size() < 2 || name[0] != 'b') return false;
  if (name[1] == '0') return false;
  for (std::size_t i = 1; i < name.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(name[i]))) return false;
  return true;
}

Workflow apply_action(const Workflow& w, const ModAction& a, int m_max) {
  if (std::find(w.order.begin(), w.order.end(), a.target) == w.order.end())
    throw Error(ErrorKind::Validation, "action target '" + a.target + "' not in workflow");
  Workflow out = w;
  switch (a.action) {
    case ActionKind::AddBlock: {
      if (!a.block) throw Error(ErrorKind::Validation, "AddBlock payload missing block");
      if (static_cast<int>(w.order.size()) + 1 > m_max)
        throw Error(ErrorKind::MaxBlocksExceeded,
                    "adding a block would exceed " + std::to_string(m_max) + " blocks");
      const std::string& name = a.block->name;
      if (w.blocks.count(name))
        throw Error(ErrorKind::Validation, "new block name '" + name + "' already used");
      if (!is_fresh_block_name(name))
        throw Error(ErrorKind::Validation,
                    "new block name '" + name + "' must match b<positive integer>");
      for (const auto& [alias, cfg] : a.ops) {
        auto it = out.operators.find(alias);
        if (it != out.operators.end() && !(it->second == cfg))
          throw Error(ErrorKind::Validation,
                      "AddBlock redefines existing operator '" + alias + "'");
        out.operators[alias] = cfg;
      }
      out.blocks.emplace(name, *a.block);
      auto pos = std::find(out.order.begin(), out.order.end(), a.target);
      if (a.placement == Placement::After) ++pos;
      out.order.insert(pos, name);
      break;
    }
    case ActionKind::RemoveBlock: {
      if (w.order.size() <= 1)
        throw Error(ErrorKind::EmptyWorkflow, "removing the last block is not allowed");
      out.blocks.erase(a.target);
      out.order.erase(std::find(out.order.begin(), out.order.end(), a.target));
      out = pruned(out);
      break;
    }
    case ActionKind::ModifyBlock: {
      if (!a.block) throw Error(ErrorKind::Validation, "ModifyBlock payload missing block");
      if (a.block->name != a.target)
        throw Error(ErrorKind::Validation, "ModifyBlock payload renames the target block");
      for (const auto& [alias, cfg] : a.ops) out.operators[alias] = cfg;
      out.blocks.at(a.target) = *a.block;
      out = pruned(out);
      break;
    }
  }
  return finalized(std::move(out), m_max);
}

ModAction classify_diff(const Workflow& old_w, const Workflow& new_w,
                        const std::string& target) {
  if (std::find(old_w.order.begin(), old_w.order.end(), target) == old_w.order.end())
    throw Error(ErrorKind::IllegalDiff, "target '" + target + "' not in the old workflow");
  Workflow a = pruned(old_w);
  Workflow b = pruned(new_w);

  if (a.order == b.order) {
    std::vector<std::string> changed;
    for (const auto& name : a.order)
      if (expanded_block(a, name) != expanded_block(b, name)) changed.push_back(name);
    if (changed.empty())
      throw Error(ErrorKind::IllegalDiff, "workflows are structurally identical");
    if (changed.size() > 1 || changed[0] != target)
      throw Error(ErrorKind::IllegalDiff,
                  "changes outside the target block: " + join(changed, ", "));
    ModAction act;
    act.action = ActionKind::ModifyBlock;
    act.target = target;
    act.block = b.blocks.at(target);
    for (const auto& alias : act.block->referenced_aliases())
      act.ops[alias] = b.operators.at(alias);
    return act;
  }

  if (b.order.size() == a.order.size() + 1) {
    std::size_t ins = b.order.size();
    for (std::size_t i = 0; i < b.order.size(); ++i) {
      std::vector<std::string> rest = b.order;
      rest.erase(rest.begin() + static_cast<long>(i));
      if (rest == a.order) {
        ins = i;
        break;
      }
    }
    if (ins == b.order.size())
      throw Error(ErrorKind::IllegalDiff, "insertion also reorders existing blocks");
    const std::string& name = b.order[ins];
    if (a.blocks.count(name))
      throw Error(ErrorKind::IllegalDiff, "inserted block reuses existing name '" + name + "'");
    if (!is_fresh_block_name(name))
      throw Error(ErrorKind::IllegalDiff,
                  "inserted block name '" + name + "' must match b<positive integer>");
    for (const auto& n : a.order)
      if (expanded_block(a, n) != expanded_block(b, n))
        throw Error(ErrorKind::IllegalDiff, "insertion also changes block '" + n + "'");
    ModAction act;
    act.action = ActionKind::AddBlock;
    act.target = target;
    act.block = b.blocks.at(name);
    for (const auto& alias : act.block->referenced_aliases())
      if (b.operators.count(alias)) act.ops[alias] = b.operators.at(alias);
    if (ins > 0 && b.order[ins - 1] == target)
      act.placement = Placement::After;
    else if (ins + 1 < b.order.size() && b.order[ins + 1] == target)
      act.placement = Placement::Before;
    else
      throw Error(ErrorKind::IllegalDiff,
                  "inserted block '" + name + "' is not adjacent to target '" + target + "'");
    return act;
  }

  if (b.order.size() + 1 == a.order.size()) {
    std::vector<std::string> rest = a.order;
    auto pos = std::find(rest.begin(), rest.end(), target);
    rest.erase(pos);
    if (rest != b.order)
      throw Error(ErrorKind::IllegalDiff, "removal is not exactly the target block");
    for (const auto& n : b.order)
      if (expanded_block(a, n) != expanded_block(b, n))
        throw Error(ErrorKind::IllegalDiff, "removal also changes block '" + n + "'");
    ModAction act;
    act.action = ActionKind::RemoveBlock;
    act.target = target;
    return act;
  }

  throw Error(ErrorKind::IllegalDiff, "block counts differ by more than one");
}

}  // namespace judgeflow
