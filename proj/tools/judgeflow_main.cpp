#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "judgeflow/config.hpp"
#include "judgeflow/dataset.hpp"
#include "judgeflow/errors.hpp"
#include "judgeflow/executor.hpp"
#include "judgeflow/gateway.hpp"
#include "judgeflow/optimizer.hpp"
#include "judgeflow/simulate.hpp"
#include "judgeflow/trace.hpp"
#include "judgeflow/util.hpp"
#include "judgeflow/workflow.hpp"

namespace fs = std::filesystem;
using namespace judgeflow;

namespace {

// Plain-text numbers: shortest round-trip form, but always with a decimal
// point so "recovery 1.0" reads as a rate.
std::string rate_text(double v) {
  std::ostringstream ss;
  ss << v;
  std::string s = ss.str();
  if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
      s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
    s += ".0";
  return s;
}

std::string score_text(double v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
}

struct BackendOpts {
  std::string mock_scenario;
  bool mock_lax = false;
  std::string endpoint;
  std::string model = "mock-model";
  unsigned workers = 4;

  void attach(CLI::App* cmd) {
    cmd->add_option("--mock", mock_scenario, "Mock scenario JSONL (offline backend)");
    cmd->add_flag("--lax", mock_lax, "Mock returns a default reply on no rule match");
    cmd->add_option("--endpoint", endpoint, "OpenAI-compatible chat-completions base URL");
    cmd->add_option("--model", model, "Model id for operator calls");
    cmd->add_option("--workers", workers, "Concurrent instances");
  }

  // allow_default: commands that only need *some* backend (trace) fall back
  // to a lax rule-free mock instead of failing.
  std::unique_ptr<Backend> build(bool allow_default) const {
    if (!mock_scenario.empty())
      return std::make_unique<MockBackend>(MockBackend::load_rules(mock_scenario),
                                           !mock_lax);
    if (!endpoint.empty()) {
      const char* key = std::getenv("JUDGEFLOW_API_KEY");
      return std::make_unique<HttpBackend>(endpoint, key ? key : "");
    }
    if (allow_default)
      return std::make_unique<MockBackend>(std::vector<MockRule>{}, false);
    throw Error(ErrorKind::ConfigError, "no backend: pass --mock or --endpoint");
  }
};

int cmd_optimize(const std::string& config_path, bool as_json) {
  RunConfig cfg = load_config(config_path);
  RunResult result = run_rounds(cfg);
  if (as_json) {
    json out = {{"best", workflow_to_json(result.best)},
                {"best_id", result.best.id},
                {"best_score", result.best_score},
                {"rounds", result.rounds},
                {"usage", result.usage},
                {"run_dir", result.run_dir}};
    std::cout << out.dump(2) << "\n";
    return 0;
  }
  for (const auto& rec : result.rounds) {
    std::cout << "round " << rec["round"].get<int>() << " "
              << rec["action"].get<std::string>() << " score "
              << score_text(rec["score"].get<double>()) << "\n";
  }
  std::cout << "best " << result.best.id << " score " << score_text(result.best_score)
            << "\n";
  std::cout << "run " << result.run_dir << "\n";
  return 0;
}

int cmd_evaluate(const std::string& workflow_path, const std::string& dataset_path,
                 const std::string& split_name, const std::string& kind, double ratio,
                 std::uint64_t seed, const BackendOpts& be, bool as_json) {
  Workflow w = parse_workflow(read_file(workflow_path));
  auto all = load_dataset(dataset_path, kind);
  DatasetSplit split = split_dataset(all, ratio, seed);
  const std::vector<TaskInstance>& data = split_name == "train" ? split.train : split.test;
  if (data.empty())
    throw Error(ErrorKind::DatasetError, "split '" + split_name + "' is empty");

  Gateway gateway(be.build(false), RetryPolicy{4, 0});
  Sandbox sandbox;
  OperatorRuntime runtime(&gateway, &sandbox, be.model);

  RunContext ctx;
  ctx.gateway = &gateway;
  ctx.runtime = &runtime;
  ctx.sandbox = &sandbox;
  ctx.cfg.dataset_kind = kind;
  ctx.cfg.workers = be.workers;

  EvalJudgeResult r = evaluation_judge(w, data, 1.0, ctx, -1, /*with_judge=*/false);
  if (as_json) {
    json out = {{"workflow", w.id},
                {"split", split_name},
                {"count", data.size()},
                {"mean", r.performance},
                {"per_instance", r.per_instance},
                {"aborted", r.aborted_instances}};
    std::cout << out.dump(2) << "\n";
    return 0;
  }
  std::cout << score_text(r.performance) << "\n";
  return 0;
}

int cmd_trace(const std::string& workflow_path, std::string query, const BackendOpts& be,
              bool as_json) {
  if (!query.empty() && query[0] == '@') query = read_file(query.substr(1));
  Workflow w = parse_workflow(read_file(workflow_path));

  Gateway gateway(be.build(true), RetryPolicy{4, 0});
  Sandbox sandbox;
  OperatorRuntime runtime(&gateway, &sandbox, be.model);

  ExecOptions opts;
  opts.query_id = "q-" + hex64(fnv1a64(query));
  ExecutionResult result = execute_workflow(w, query, runtime, opts);
  std::string xml = render_trace_xml(result.trace);
  if (as_json) {
    json out = {{"query_id", opts.query_id},
                {"final_state", result.final_state},
                {"aborted", result.aborted},
                {"xml", xml}};
    std::cout << out.dump(2) << "\n";
    return result.aborted ? 1 : 0;
  }
  std::cout << xml << "\n";
  if (result.aborted) {
    std::cerr << "execution aborted: " << result.error << "\n";
    return 1;
  }
  return 0;
}

int cmd_simulate(const AttributionSimConfig& cfg, bool as_json) {
  AttributionSimResult r = simulate_attribution(cfg);
  if (as_json) {
    std::cout << r.to_json().dump(2) << "\n";
    return 0;
  }
  std::cout << "recovery " << rate_text(r.recovery_rate) << "\n";
  std::cout << "recovered " << r.recovered << "/" << cfg.trials << "\n";
  return 0;
}

int cmd_report(const std::string& run_dir, bool as_json) {
  if (!fs::is_directory(run_dir))
    throw Error(ErrorKind::IoError, "run directory not found: " + run_dir);

  std::vector<json> rounds;
  for (int n = 0;; ++n) {
    fs::path p = fs::path(run_dir) / "rounds" / ("round_" + std::to_string(n) + ".json");
    if (!fs::exists(p)) break;
    rounds.push_back(json::parse(read_file(p.string())));
  }
  json usage = json::object();
  fs::path up = fs::path(run_dir) / "usage.json";
  if (fs::exists(up)) usage = json::parse(read_file(up.string()));

  if (as_json) {
    std::cout << json{{"rounds", rounds}, {"usage", usage}}.dump(2) << "\n";
    return 0;
  }
  for (const auto& rec : rounds) {
    std::cout << "round " << rec["round"].get<int>() << " "
              << rec["action"].get<std::string>() << " score "
              << score_text(rec["score"].get<double>()) << "\n";
  }
  if (usage.contains("judge_cost")) {
    std::cout << "judge cost " << score_text(usage["judge_cost"].get<double>()) << "\n";
    std::cout << "evaluation cost " << score_text(usage["evaluation_cost"].get<double>())
              << "\n";
    if (usage["ratio"].is_null())
      std::cout << "cost ratio undefined\n";
    else
      std::cout << "cost ratio " << score_text(usage["ratio"].get<double>()) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"judgeflow: block-structured agentic workflow optimization"};
  app.require_subcommand(1);
  app.fallthrough();
  bool as_json = false;
  app.add_flag("--json", as_json, "Machine-readable JSON output");

  auto* optimize = app.add_subcommand("optimize", "Run the optimization loop");
  std::string config_path;
  optimize->add_option("--config", config_path, "Run config (JSON)")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Score a workflow on a dataset split");
  std::string workflow_path, dataset_path, split_name = "test", kind = "math";
  double ratio = 0.0;
  std::uint64_t seed = 0;
  BackendOpts eval_be;
  evaluate->add_option("--workflow", workflow_path, "Workflow JSON")->required();
  evaluate->add_option("--dataset", dataset_path, "Dataset JSONL")->required();
  evaluate->add_option("--split", split_name, "train|test")
      ->check(CLI::IsMember({"train", "test"}))
      ->required();
  evaluate->add_option("--kind", kind, "math|code")
      ->check(CLI::IsMember({"math", "code"}));
  evaluate->add_option("--ratio", ratio, "Train fraction (default 0: all test)");
  evaluate->add_option("--seed", seed, "Split shuffle seed");
  eval_be.attach(evaluate);

  auto* trace = app.add_subcommand("trace", "Execute one query and print the XML trace");
  std::string trace_workflow, trace_query;
  BackendOpts trace_be;
  trace->add_option("--workflow", trace_workflow, "Workflow JSON")->required();
  trace->add_option("--query", trace_query, "Query text, or @file")->required();
  trace_be.attach(trace);

  auto* simulate = app.add_subcommand("simulate-attribution",
                                      "Fault-injection check of judge aggregation");
  AttributionSimConfig sim;
  simulate->add_option("--blocks", sim.blocks, "Workflow size M")
      ->check(CLI::Range(1, 64));
  simulate->add_option("--noise", sim.noise_p, "P(judge pins the faulty block)")
      ->check(CLI::Range(0.0, 1.0));
  simulate->add_option("--failures", sim.failures, "Rank vectors per trial");
  simulate->add_option("--trials", sim.trials, "Trials");
  simulate->add_option("--seed", sim.seed, "Seed");
  simulate->add_option("--workers", sim.workers, "Worker threads");

  auto* report = app.add_subcommand("report", "Summarize a finished run directory");
  std::string run_dir;
  report->add_option("--run", run_dir, "Run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (optimize->parsed()) return cmd_optimize(config_path, as_json);
    if (evaluate->parsed())
      return cmd_evaluate(workflow_path, dataset_path, split_name, kind, ratio, seed,
                          eval_be, as_json);
    if (trace->parsed()) return cmd_trace(trace_workflow, trace_query, trace_be, as_json);
    if (simulate->parsed()) return cmd_simulate(sim, as_json);
    if (report->parsed()) return cmd_report(run_dir, as_json);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
