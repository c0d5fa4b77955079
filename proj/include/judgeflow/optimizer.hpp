#pragma once

#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "judgeflow/config.hpp"
#include "judgeflow/dataset.hpp"
#include "judgeflow/executor.hpp"
#include "judgeflow/judge.hpp"
#include "judgeflow/workflow.hpp"

namespace judgeflow {

struct EvalJudgeResult {
  double performance = 0.0;
  std::optional<std::string> selected;       // B_sel; absent = no valid vectors
  std::vector<FailureRecord> selected_log;   // failures attributed to B_sel
  BlockLog logs;                             // every block's failure log
  std::vector<RankVector> all_vectors;
  std::vector<double> per_instance;
  int judge_requests = 0;
  int skipped_failures = 0;   // judged but unusable after the retry
  int aborted_instances = 0;  // operator failures, scored 0
};

// Shared services for one run. Pointers are non-owning.
struct RunContext {
  Gateway* gateway = nullptr;
  const OperatorRuntime* runtime = nullptr;
  const Sandbox* sandbox = nullptr;
  RunConfig cfg;
  std::string run_dir;  // empty = no persistence
};

// One Evaluation-Judge pass: execute every instance, score it, judge every
// failure (score < eps), aggregate rank vectors.
EvalJudgeResult evaluation_judge(const Workflow& w, const std::vector<TaskInstance>& data,
                                 double eps, RunContext& ctx, int round_index = -1,
                                 bool with_judge = true);

std::vector<FailureRecord> sample_logs(const std::vector<FailureRecord>& log,
                                       int k, std::mt19937_64& rng);

struct HistoryEntry {
  int round = 0;
  std::string action;
  double score = 0.0;
  std::string canonical;
  std::string id;
};

struct OptimizeOutcome {
  std::optional<Workflow> workflow;
  std::optional<ModAction> action;
  int attempts = 0;
  std::string failure;  // non-empty when the retry budget ran out
};

// One optimization step with a retry budget of 2; rejected outputs get the
// rejection reason appended to the prompt for the next attempt. `score` is
// the current workflow's cached performance shown to the optimizer.
OptimizeOutcome optimize_step(const Workflow& w, const std::string& b_sel,
                              const std::vector<FailureRecord>& samples,
                              const std::vector<HistoryEntry>& history,
                              const std::set<std::string>& banned, RunContext& ctx,
                              double score = 0.0);

struct PoolEntry {
  Workflow workflow;
  double score = 0.0;
  EvalJudgeResult diag;
  std::uint64_t seq = 0;  // insertion counter, for oldest-minimum eviction
};

class CandidatePool {
 public:
  explicit CandidatePool(std::size_t capacity);

  // Insert or (for a duplicate canonical hash) replace if the score improved;
  // evict the minimum-score entry when past capacity.
  void update(const Workflow& w, double score, EvalJudgeResult diag);

  const std::vector<PoolEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  double min_score() const;
  std::vector<double> scores() const;

 private:
  std::size_t capacity_;
  std::uint64_t next_seq_ = 0;
  std::vector<PoolEntry> entries_;
};

std::vector<double> softmax_probs(const std::vector<double>& scores, double tau);

const PoolEntry& sample_start(const CandidatePool& pool, double tau,
                              std::mt19937_64& rng);

struct RunResult {
  Workflow best;
  double best_score = 0.0;
  std::vector<json> rounds;
  json usage;
  std::string run_dir;
};

RunResult run_rounds(const RunConfig& cfg);

// Default seed workflow: one seq block with a single generate operator.
Workflow default_seed_workflow(int m_max);

}  // namespace judgeflow
