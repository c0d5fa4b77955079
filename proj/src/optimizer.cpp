#include "judgeflow/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>

#include "judgeflow/errors.hpp"
#include "judgeflow/prompts.hpp"

namespace judgeflow {

namespace {

namespace fs = std::filesystem;

std::string short_number(double v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
}

struct InstanceOutcome {
  double score = 0.0;
  bool aborted = false;
  bool judged = false;
  std::optional<RankVector> vector;
  std::optional<FailureRecord> record;
  std::string judge_error;
  json judge_artifact;  // persisted per instance
};

std::string block_output_text(const FailureRecord& rec, const std::string& block) {
  for (const auto& [name, state] : rec.block_outputs)
    if (name == block) return truncate_field(canonical_dump(state), 2000);
  return "{}";
}

std::string render_error_cases(const std::vector<FailureRecord>& samples,
                               const std::string& b_sel) {
  if (samples.empty()) return "(none)";
  std::string out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const FailureRecord& rec = samples[i];
    out += "### Error Example " + std::to_string(i + 1) + "\n";
    out += "Problem: " + truncate_field(rec.query, 2000) + "\n";
    out += "Correct Answer: " + truncate_field(rec.gold, 500) + "\n";
    out += "Workflow Wrong Answer: " + truncate_field(rec.wrong, 2000) + "\n";
    out += "Low-performing Block Output: " + block_output_text(rec, b_sel) + "\n\n";
  }
  return out;
}

std::string render_reflection(const std::vector<HistoryEntry>& history) {
  if (history.empty()) return "(none)";
  std::string out;
  for (const auto& h : history) {
    out += "Round " + std::to_string(h.round) + " (action " + h.action + ", score " +
           short_number(h.score) + "):\n" + h.canonical + "\n";
  }
  return out;
}

void persist_json(const std::string& path, const json& doc) {
  write_file(path, doc.dump(2) + "\n");
}

}  // namespace

EvalJudgeResult evaluation_judge(const Workflow& w, const std::vector<TaskInstance>& data,
                                 double eps, RunContext& ctx, int round_index,
                                 bool with_judge) {
  if (data.empty()) throw Error(ErrorKind::DatasetError, "dataset split is empty");
  if (eps <= 0.0 || eps > 1.0)
    throw Error(ErrorKind::DatasetError, "epsilon must be in (0,1]");

  std::string judge_dir;
  if (!ctx.run_dir.empty() && round_index >= 0) {
    judge_dir = ctx.run_dir + "/judge/" + std::to_string(round_index);
    fs::create_directories(judge_dir);
  }

  std::vector<InstanceOutcome> outcomes(data.size());
  parallel_for(data.size(), ctx.cfg.workers, [&](std::size_t i) {
    const TaskInstance& inst = data[i];
    InstanceOutcome& out = outcomes[i];

    ExecOptions opts;
    opts.query_id = inst.id;
    opts.task = &inst;
    ExecutionResult exec = execute_workflow(w, inst.question, *ctx.runtime, opts);

    if (exec.aborted) {
      out.aborted = true;
      out.score = 0.0;
    } else if (ctx.cfg.dataset_kind == "code") {
      out.score = eval_code(exec.final_state, inst, *ctx.sandbox);
    } else {
      out.score = eval_math(exec.final_state, inst.answer);
    }

    if (out.score >= eps) return;  // successful instance, no judging

    out.record = make_failure_record(w, exec.trace, inst.answer, exec.final_state);
    if (!with_judge) return;
    out.judged = true;
    try {
      JudgeOutcome jo = judge_failure(w, *out.record, *ctx.gateway,
                                      ctx.cfg.judge_model, ctx.cfg.judge_temperature);
      out.vector = jo.vector;
      out.judge_error = jo.error;
      json vec = nullptr;
      if (jo.vector) {
        vec = json::object();
        for (const auto& [name, rank] : jo.vector->ranks) vec[name] = rank;
      }
      json messages = json::array();
      for (const auto& m : jo.request.messages)
        messages.push_back({{"speaker", m.speaker}, {"content", m.content}});
      out.judge_artifact = json{{"instance", inst.id},
                                {"request", messages},
                                {"response", jo.response},
                                {"vector", vec},
                                {"error", jo.error},
                                {"attempts", jo.attempts}};
    } catch (const Error& e) {
      out.judge_error = e.what();
      out.judge_artifact = json{{"instance", inst.id},
                                {"request", nullptr},
                                {"response", nullptr},
                                {"vector", nullptr},
                                {"error", out.judge_error},
                                {"attempts", 0}};
    }
  });

  EvalJudgeResult result;
  result.logs = make_block_log(w);
  double sum = 0.0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    InstanceOutcome& out = outcomes[i];
    result.per_instance.push_back(out.score);
    sum += out.score;
    if (out.aborted) ++result.aborted_instances;
    if (out.judged) ++result.judge_requests;
    if (out.vector) {
      result.all_vectors.push_back(*out.vector);
      log_failure(result.logs, round_worst(*out.vector), *out.record);
    } else if (out.judged) {
      ++result.skipped_failures;  // logged to no block
    }
    if (!judge_dir.empty() && !out.judge_artifact.is_null())
      persist_json(judge_dir + "/" + data[i].id + ".json", out.judge_artifact);
  }
  result.performance = sum / static_cast<double>(outcomes.size());
  if (!result.all_vectors.empty()) {
    result.selected = overall_worst(result.all_vectors, w);
    result.selected_log = result.logs.at(*result.selected);
  }
  return result;
}

std::vector<FailureRecord> sample_logs(const std::vector<FailureRecord>& log, int k,
                                       std::mt19937_64& rng) {
  if (k < 1) throw Error(ErrorKind::Validation, "sample count must be >= 1");
  std::vector<std::size_t> idx(log.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), idx.size());
  std::vector<FailureRecord> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    std::size_t j = i + rng() % (idx.size() - i);
    std::swap(idx[i], idx[j]);
    out.push_back(log[idx[i]]);
  }
  return out;
}

OptimizeOutcome optimize_step(const Workflow& w, const std::string& b_sel,
                              const std::vector<FailureRecord>& samples,
                              const std::vector<HistoryEntry>& history,
                              const std::set<std::string>& banned, RunContext& ctx,
                              double score) {
  if (std::find(w.order.begin(), w.order.end(), b_sel) == w.order.end())
    throw Error(ErrorKind::Validation, "selected block '" + b_sel + "' not in workflow");

  OptimizerUserInputs in;
  in.dataset = ctx.cfg.dataset_name;
  in.score = short_number(score);
  in.low_performing_block = b_sel;
  in.previous_code = workflow_to_json(w).dump(2);
  in.reflection_result = render_reflection(history);
  in.workflow_block_count = static_cast<int>(w.order.size());
  in.error_cases_section = render_error_cases(samples, b_sel);

  OptimizeOutcome outcome;
  const int budget = 2;  // retries after the first attempt

  std::string rejection;
  for (int attempt = 0; attempt <= budget; ++attempt) {
    ++outcome.attempts;
    ChatRequest req;
    req.role = "optimizer";
    req.model = ctx.cfg.optimizer_model;
    req.temperature = ctx.cfg.optimizer_temperature;
    req.max_tokens = ctx.cfg.max_tokens;
    req.messages.push_back({"system", optimizer_system_prompt(ctx.cfg.dataset_name)});
    std::string user = optimizer_user_prompt(in);
    if (!rejection.empty())
      user += "\nYour previous output was rejected: " + rejection +
              "\nProduce a corrected workflow JSON document.\n";
    req.messages.push_back({"user", user});

    std::string text = ctx.gateway->complete(req).text;
    try {
      json doc;
      if (!extract_first_json_object(text, doc))
        throw Error(ErrorKind::ParseError, "no JSON object in the optimizer response");
      Workflow proposed = parse_workflow_json(doc, ctx.cfg.m_max);
      std::string canon = canonicalize(proposed);
      if (canon == canonicalize(w) || banned.count(canon))
        throw Error(ErrorKind::NoveltyViolation,
                    "proposed workflow matches a banned baseline");
      ModAction action = classify_diff(w, proposed, b_sel);
      outcome.workflow = std::move(proposed);
      outcome.action = std::move(action);
      outcome.failure.clear();
      return outcome;
    } catch (const Error& e) {
      switch (e.kind()) {
        case ErrorKind::ParseError:
        case ErrorKind::Syntax:
        case ErrorKind::Schema:
        case ErrorKind::Validation:
        case ErrorKind::MaxBlocksExceeded:
        case ErrorKind::EmptyWorkflow:
        case ErrorKind::IllegalDiff:
        case ErrorKind::NoveltyViolation:
          rejection = e.what();
          outcome.failure = e.what();
          break;
        default:
          throw;
      }
    }
  }
  return outcome;  // budget exhausted; the round becomes a no-op
}

CandidatePool::CandidatePool(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ < 1) throw Error(ErrorKind::ConfigError, "pool capacity must be >= 1");
}

void CandidatePool::update(const Workflow& w, double score, EvalJudgeResult diag) {
  std::string id = workflow_id(w);
  for (auto& e : entries_) {
    if (e.workflow.id == id) {
      if (score > e.score) {
        e.score = score;
        e.diag = std::move(diag);
        e.seq = next_seq_++;
      }
      return;
    }
  }
  PoolEntry entry;
  entry.workflow = w;
  entry.workflow.id = id;
  entry.score = score;
  entry.diag = std::move(diag);
  entry.seq = next_seq_++;
  entries_.push_back(std::move(entry));

  if (entries_.size() > capacity_) {
    std::size_t evict = 0;
    for (std::size_t i = 1; i < entries_.size(); ++i) {
      if (entries_[i].score < entries_[evict].score ||
          (entries_[i].score == entries_[evict].score &&
           entries_[i].seq < entries_[evict].seq))
        evict = i;
    }
    entries_.erase(entries_.begin() + static_cast<long>(evict));
  }
}

double CandidatePool::min_score() const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : entries_) best = std::min(best, e.score);
  return best;
}

std::vector<double> CandidatePool::scores() const {
  std::vector<double> out;
  for (const auto& e : entries_) out.push_back(e.score);
  return out;
}

std::vector<double> softmax_probs(const std::vector<double>& scores, double tau) {
  if (scores.empty()) throw Error(ErrorKind::Validation, "softmax over an empty pool");
  if (tau <= 0.0) throw Error(ErrorKind::Validation, "tau must be > 0");
  double max_score = *std::max_element(scores.begin(), scores.end());
  std::vector<double> probs(scores.size());
  double z = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    probs[i] = std::exp((scores[i] - max_score) / tau);
    z += probs[i];
  }
  for (double& p : probs) p /= z;
  return probs;
}

const PoolEntry& sample_start(const CandidatePool& pool, double tau,
                              std::mt19937_64& rng) {
  const auto& entries = pool.entries();
  if (entries.empty()) throw Error(ErrorKind::Validation, "cannot sample an empty pool");
  std::vector<double> probs = softmax_probs(pool.scores(), tau);
  double u = u01(rng);
  double cum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cum += probs[i];
    if (u < cum) return entries[i];
  }
  return entries.back();
}

Workflow default_seed_workflow(int m_max) {
  json doc = {
      {"operators",
       {{"gen",
         {{"kind", "generate"},
          {"model", ""},
          {"instruction", "Solve the problem step by step. End with the final answer."},
          {"params", json::object()}}}}},
      {"blocks", {{"b1", {{"type", "seq"}, {"operators", json::array({"gen"})}}}}},
      {"workflow", json::array({"b1"})}};
  return parse_workflow_json(doc, m_max);
}

RunResult run_rounds(const RunConfig& cfg) {
  validate_for_optimize(cfg);

  auto all = load_dataset(cfg.dataset_path, cfg.dataset_kind);
  DatasetSplit split = split_dataset(all, cfg.split_ratio, cfg.seed);
  const std::vector<TaskInstance>& train = split.train.empty() ? split.test : split.train;
  if (train.empty()) throw Error(ErrorKind::DatasetError, "optimization split is empty");

  std::unique_ptr<Backend> backend;
  if (!cfg.mock_scenario.empty()) {
    backend = std::make_unique<MockBackend>(MockBackend::load_rules(cfg.mock_scenario),
                                            cfg.mock_strict);
  } else {
    std::string key = cfg.api_key;
    if (key.empty()) {
      const char* env = std::getenv(cfg.api_key_env.c_str());
      if (env) key = env;
    }
    backend = std::make_unique<HttpBackend>(cfg.endpoint, key);
  }
  Gateway gateway(std::move(backend),
                  RetryPolicy{cfg.retry_attempts, cfg.retry_base_delay_ms},
                  parse_rate_table(cfg.rates));

  Sandbox sandbox(cfg.interpreter, cfg.sandbox);
  PromptTemplates templates;
  if (!cfg.prompts_dir.empty()) templates.load_dir(cfg.prompts_dir);
  OperatorRuntime runtime(&gateway, &sandbox, cfg.executor_model,
                          cfg.executor_temperature, &templates);
  runtime.max_tokens = cfg.max_tokens;

  RunContext ctx;
  ctx.gateway = &gateway;
  ctx.runtime = &runtime;
  ctx.sandbox = &sandbox;
  ctx.cfg = cfg;
  ctx.run_dir = cfg.run_dir;

  fs::create_directories(cfg.run_dir + "/rounds");
  fs::create_directories(cfg.run_dir + "/workflows");
  fs::create_directories(cfg.run_dir + "/judge");

  Workflow seed = cfg.seed_workflow.empty()
                      ? default_seed_workflow(cfg.m_max)
                      : parse_workflow(read_file(cfg.seed_workflow), cfg.m_max);

  std::mt19937_64 rng(cfg.seed);
  CandidatePool pool(static_cast<std::size_t>(cfg.pool_k));
  std::set<std::string> banned;
  std::vector<HistoryEntry> history;
  RunResult result;
  result.run_dir = cfg.run_dir;

  auto persist_workflow = [&](const Workflow& w) {
    persist_json(cfg.run_dir + "/workflows/" + w.id + ".json", workflow_to_json(w));
  };
  auto persist_round = [&](const json& rec) {
    result.rounds.push_back(rec);
    persist_json(cfg.run_dir + "/rounds/round_" +
                     std::to_string(rec["round"].get<int>()) + ".json",
                 rec);
  };
  auto usage_snapshot = [&]() { return gateway.ledger().to_json(gateway.rates()); };

  // round 0: evaluate the seed and prime the pool
  EvalJudgeResult seed_diag = evaluation_judge(seed, train, cfg.epsilon, ctx, 0);
  double seed_score = seed_diag.performance;
  banned.insert(canonicalize(seed));
  persist_workflow(seed);
  result.best = seed;
  result.best_score = seed_score;
  persist_round(json{{"round", 0},
                     {"start", seed.id},
                     {"action", "Init"},
                     {"new", seed.id},
                     {"score", seed_diag.performance},
                     {"selected", seed_diag.selected ? json(*seed_diag.selected) : json()},
                     {"samples", json::array()},
                     {"usage", usage_snapshot()}});
  pool.update(seed, seed_score, std::move(seed_diag));

  std::ofstream experience(cfg.run_dir + "/experience.jsonl", std::ios::trunc);

  for (int round = 1; round <= cfg.rounds; ++round) {
    const PoolEntry& start = sample_start(pool, cfg.tau, rng);
    Workflow w = start.workflow;
    double start_score = start.score;

    auto noop = [&](const std::string& reason) {
      persist_round(json{{"round", round},
                         {"start", w.id},
                         {"action", "NoOp"},
                         {"reason", reason},
                         {"new", w.id},
                         {"score", start_score},
                         {"selected", start.diag.selected ? json(*start.diag.selected)
                                                          : json()},
                         {"samples", json::array()},
                         {"usage", usage_snapshot()}});
    };

    if (!start.diag.selected) {
      noop("no_failures");
      continue;
    }
    std::string b_sel = *start.diag.selected;
    std::vector<FailureRecord> samples =
        sample_logs(start.diag.selected_log, cfg.sample_k, rng);

    OptimizeOutcome step =
        optimize_step(w, b_sel, samples, history, banned, ctx, start_score);
    if (!step.workflow) {
      noop(step.failure.empty() ? "optimizer_failed" : step.failure);
      continue;
    }

    Workflow next = *step.workflow;
    EvalJudgeResult diag = evaluation_judge(next, train, cfg.epsilon, ctx, round);
    banned.insert(canonicalize(next));
    persist_workflow(next);

    json samples_digests = json::array();
    for (const auto& s : samples) samples_digests.push_back(s.digest());

    persist_round(json{{"round", round},
                       {"start", w.id},
                       {"action", action_kind_name(step.action->action)},
                       {"target", step.action->target},
                       {"new", next.id},
                       {"score", diag.performance},
                       {"selected", diag.selected ? json(*diag.selected) : json()},
                       {"samples", samples_digests},
                       {"usage", usage_snapshot()}});

    HistoryEntry h;
    h.round = round;
    h.action = action_kind_name(step.action->action);
    h.score = diag.performance;
    h.canonical = canonicalize(next);
    h.id = next.id;
    history.push_back(h);
    experience << json{{"round", round},
                       {"parent", w.id},
                       {"action", h.action},
                       {"score", h.score},
                       {"workflow", workflow_to_json(next)}}
                      .dump()
               << "\n";
    experience.flush();

    double next_score = diag.performance;
    if (next_score > result.best_score) {
      result.best_score = next_score;
      result.best = next;
    }
    pool.update(next, next_score, std::move(diag));
  }

  result.usage = cost_report(gateway.ledger(), gateway.rates());
  write_file(cfg.run_dir + "/usage.json", result.usage.dump(2) + "\n");
  return result;
}

}  // namespace judgeflow
