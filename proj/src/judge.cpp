#include "judgeflow/judge.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include "judgeflow/errors.hpp"
#include "judgeflow/prompts.hpp"

namespace judgeflow {

json FailureRecord::to_json() const {
  json outputs = json::array();
  for (const auto& [name, state] : block_outputs)
    outputs.push_back(json{{"block", name}, {"output", state}});
  return json{{"query", query},
              {"gold", gold},
              {"wrong", wrong},
              {"block_outputs", outputs},
              {"trace_xml", trace_xml}};
}

FailureRecord FailureRecord::from_json(const json& rec) {
  FailureRecord out;
  out.query = rec.value("query", "");
  out.gold = rec.value("gold", "");
  out.wrong = rec.value("wrong", "");
  out.trace_xml = rec.value("trace_xml", "");
  if (rec.contains("block_outputs"))
    for (const auto& e : rec["block_outputs"])
      out.block_outputs.emplace_back(e.value("block", ""), e.value("output", json::object()));
  return out;
}

std::string FailureRecord::digest() const { return hex64(fnv1a64(to_json().dump())); }

FailureRecord make_failure_record(const Workflow& w, const ExecutionTrace& trace,
                                  const std::string& gold, const json& final_state) {
  FailureRecord rec;
  rec.query = trace.query;
  rec.gold = gold;
  if (final_state.contains("response") && final_state["response"].is_string())
    rec.wrong = final_state["response"].get<std::string>();
  else if (final_state.contains("response"))
    rec.wrong = final_state["response"].dump();
  std::map<std::string, json> by_name;
  for (const auto& b : trace.blocks) by_name[b.name] = b.output_state;
  for (const auto& name : w.order) {
    auto it = by_name.find(name);
    rec.block_outputs.emplace_back(name,
                                   it == by_name.end() ? json::object() : it->second);
  }
  rec.trace_xml = render_trace_xml(trace);
  return rec;
}

ChatRequest build_judge_prompt(const Workflow& w, const FailureRecord& rec,
                               const std::string& wrong, const std::string& model,
                               double temperature) {
  ChatRequest req;
  req.role = "judge";
  req.model = model;
  req.temperature = temperature;

  std::string user;
  user += "# Problem\n" + rec.query + "\n\n";
  user += "# Correct Answer\n" + rec.gold + "\n\n";
  user += "# Incorrect Answer\n" + wrong + "\n\n";
  user += "# Workflow Structure\n```json\n" + workflow_to_json(w).dump(2) + "\n```\n\n";
  user += "# Execution Trace\n" + rec.trace_xml + "\n";
  user += "# Blocks to Rank\n";
  user += "block_names=" + json(w.order).dump() + "\n\n";
  user += "Return a JSON object mapping each of these block names to a unique integer "
          "rank (1 = most responsible).\n";

  req.messages.push_back({"system", judge_system_prompt()});
  req.messages.push_back({"user", user});
  return req;
}

RankVector parse_rank_vector(const std::string& text,
                             const std::vector<std::string>& names) {
  json obj;
  if (!extract_first_json_object(text, obj) || !obj.is_object())
    throw Error(ErrorKind::ParseError, "no JSON object in the judge response");

  std::set<std::string> want(names.begin(), names.end());
  std::set<std::string> got;
  for (auto it = obj.begin(); it != obj.end(); ++it) got.insert(it.key());
  if (got != want) {
    throw Error(ErrorKind::KeyMismatch,
                "rank keys " + json(got).dump() + " do not match blocks " +
                    json(want).dump());
  }

  RankVector rv;
  std::set<int> seen;
  const int m = static_cast<int>(names.size());
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!it.value().is_number_integer())
      throw Error(ErrorKind::NotAPermutation,
                  "rank for '" + it.key() + "' is not an integer");
    int r = it.value().get<int>();
    if (r < 1 || r > m || !seen.insert(r).second)
      throw Error(ErrorKind::NotAPermutation,
                  "ranks are not a permutation of 1.." + std::to_string(m));
    rv.ranks[it.key()] = r;
  }
  return rv;
}

std::string round_worst(const RankVector& rv) {
  for (const auto& [name, rank] : rv.ranks)
    if (rank == 1) return name;
  throw Error(ErrorKind::NotAPermutation, "rank vector has no rank-1 block");
}

std::string overall_worst(const std::vector<RankVector>& vectors, const Workflow& w) {
  if (vectors.empty())
    throw Error(ErrorKind::NoFailures, "no rank vectors to aggregate");
  std::string best;
  long long best_sum = std::numeric_limits<long long>::max();
  for (const auto& name : w.order) {
    long long sum = 0;
    for (const auto& rv : vectors) sum += rv.ranks.at(name);
    if (sum < best_sum) {
      best_sum = sum;
      best = name;
    }
  }
  return best;
}

BlockLog make_block_log(const Workflow& w) {
  BlockLog logs;
  for (const auto& name : w.order) logs[name];
  return logs;
}

void log_failure(BlockLog& logs, const std::string& b_rw, const FailureRecord& rec) {
  auto it = logs.find(b_rw);
  if (it == logs.end())
    throw Error(ErrorKind::Validation, "log_failure: unknown block '" + b_rw + "'");
  it->second.push_back(rec);
}

JudgeOutcome judge_failure(const Workflow& w, const FailureRecord& rec, Gateway& gateway,
                           const std::string& model, double temperature) {
  JudgeOutcome out;
  out.request = build_judge_prompt(w, rec, rec.wrong, model, temperature);
  for (int attempt = 0; attempt < 2; ++attempt) {
    ++out.attempts;
    out.response = gateway.complete(out.request).text;
    try {
      out.vector = parse_rank_vector(out.response, w.order);
      out.error.clear();
      return out;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::ParseError && e.kind() != ErrorKind::KeyMismatch &&
          e.kind() != ErrorKind::NotAPermutation)
        throw;
      out.error = e.what();  // one retry, then the failure is skipped
    }
  }
  return out;
}

}  // namespace judgeflow
