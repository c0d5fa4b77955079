#include <doctest.h>

#include <memory>

#include "judgeflow/errors.hpp"
#include "judgeflow/operators.hpp"
#include "test_support.hpp"

using namespace judgeflow;

namespace {

// Owns the mock gateway and the runtime so contexts stay valid for the
// whole test case.
struct Rig {
  MockBackend* mock = nullptr;
  std::unique_ptr<Gateway> gateway;
  OperatorRuntime runtime;

  explicit Rig(std::vector<MockRule> rules, const Sandbox* sandbox = nullptr)
      : gateway(make_gateway(std::move(rules), &mock)),
        runtime(gateway.get(), sandbox, "test-model", 0.0) {}

  OperatorCallContext ctx(BlockRecord* record = nullptr,
                          const TaskInstance* task = nullptr) const {
    return runtime.make_context(record, task);
  }

 private:
  static std::unique_ptr<Gateway> make_gateway(std::vector<MockRule> rules,
                                               MockBackend** mock) {
    auto backend = std::make_unique<MockBackend>(std::move(rules), true);
    *mock = backend.get();
    return std::make_unique<Gateway>(std::move(backend), RetryPolicy{1, 0});
  }
};

OperatorConfig make_config(OperatorKind kind, const std::string& alias,
                           const std::string& instruction, json params = json::object()) {
  OperatorConfig cfg;
  cfg.alias = alias;
  cfg.kind = kind;
  cfg.instruction = instruction;
  cfg.params = std::move(params);
  return cfg;
}

}  // namespace

TEST_CASE("generate stores the trimmed backend reply") {
  Rig f({{"", "Solve it", "", "  42  ", -1, -1}});
  OperatorCallContext ctx = f.ctx();
  json out = op_generate(json::object(), "what is 6*7", make_config(OperatorKind::Generate, "g", "Solve it"), ctx);
  CHECK(out["response"] == "42");
  REQUIRE(f.mock->call_count() == 1);
  std::string prompt = f.mock->call_log()[0].user_text();
  CHECK(prompt.find("## INSTRUCTION") != std::string::npos);
  CHECK(prompt.find("Solve it") != std::string::npos);
  CHECK(prompt.find("what is 6*7") != std::string::npos);
  CHECK(prompt.find("## PREVIOUS") == std::string::npos);
}

TEST_CASE("generate includes the previous response when present") {
  Rig f({{"", "", "", "ok", -1, -1}});
  OperatorCallContext ctx = f.ctx();
  json state = {{"response", "draft one"}};
  op_generate(state, "q", make_config(OperatorKind::Generate, "g", "i"), ctx);
  std::string prompt = f.mock->call_log()[0].user_text();
  CHECK(prompt.find("## PREVIOUS") != std::string::npos);
  CHECK(prompt.find("draft one") != std::string::npos);
}

TEST_CASE("generate rejects an empty query") {
  Rig f({});
  OperatorCallContext ctx = f.ctx();
  CHECK_THROWS_WITH_AS(
      op_generate(json::object(), "  \n ", make_config(OperatorKind::Generate, "g", "i"), ctx),
      doctest::Contains("empty query"), Error);
}

TEST_CASE("generate wraps backend exhaustion as operator failure") {
  Rig f({});  // strict mock, no rules: every call misses
  OperatorCallContext ctx = f.ctx();
  try {
    op_generate(json::object(), "q", make_config(OperatorKind::Generate, "g", "i"), ctx);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::OperatorFailure);
    CHECK(std::string(e.what()).find("'g'") != std::string::npos);
  }
}

TEST_CASE("test operator passes and fails through the sandbox") {
  Sandbox sandbox("python3", {10.0, 256});
  TaskInstance task;
  task.id = "t1";
  task.tests = {"assert add(2, 3) == 5", "assert add(-1, 1) == 0"};
  Rig f({}, &sandbox);
  BlockRecord record;
  OperatorCallContext ctx = f.ctx(&record, &task);
  OperatorConfig cfg = make_config(OperatorKind::Test, "t", "run tests");

  SUBCASE("all tests pass") {
    json state = {{"response", "```python\ndef add(a, b):\n    return a + b\n```"}};
    json out = op_test(state, "q", cfg, ctx);
    CHECK(out["result"] == "pass");
    CHECK(out["feedback"] == "all tests passed");
    REQUIRE(record.invocations.size() == 1);
    CHECK(record.invocations[0].alias == "t");
    CHECK(record.invocations[0].output == "pass");
  }
  SUBCASE("a failing test is named in the feedback") {
    json state = {{"response", "def add(a, b):\n    return a - b"}};
    json out = op_test(state, "q", cfg, ctx);
    CHECK(out["result"] == "fail");
    std::string fb = out["feedback"].get<std::string>();
    CHECK(fb.find("failed test: assert add(2, 3) == 5") != std::string::npos);
    CHECK(fb.find("AssertionError") != std::string::npos);
  }
}

TEST_CASE("test operator preconditions") {
  Rig f({});
  OperatorConfig cfg = make_config(OperatorKind::Test, "t", "i");
  SUBCASE("no sandbox") {
    OperatorCallContext ctx = f.ctx();
    try {
      op_test(json::object(), "q", cfg, ctx);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::SandboxFailure);
    }
  }
  SUBCASE("no test cases") {
    Sandbox sandbox;
    Rig with_box({}, &sandbox);
    TaskInstance task;
    OperatorCallContext ctx = with_box.ctx(nullptr, &task);
    try {
      op_test(json::object(), "q", cfg, ctx);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Validation);
    }
  }
}

TEST_CASE("self_refine rewrites the response") {
  Rig f({{"", "", "", "REFINED", -1, -1}});
  OperatorCallContext ctx = f.ctx();
  json state = {{"response", "rough"}, {"feedback", "be precise"}};
  json out = op_self_refine(state, "q", make_config(OperatorKind::SelfRefine, "r", "fix it"), ctx);
  CHECK(out["response"] == "REFINED");
  std::string prompt = f.mock->call_log()[0].user_text();
  CHECK(prompt.find("## CURRENT SOLUTION") != std::string::npos);
  CHECK(prompt.find("rough") != std::string::npos);
  CHECK(prompt.find("## FEEDBACK") != std::string::npos);
  CHECK(prompt.find("be precise") != std::string::npos);
}

TEST_CASE("self_refine requires a previous response") {
  Rig f({});
  OperatorCallContext ctx = f.ctx();
  try {
    op_self_refine(json::object(), "q", make_config(OperatorKind::SelfRefine, "r", "i"), ctx);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Validation);
    CHECK(std::string(e.what()).find("previous response") != std::string::npos);
  }
}

TEST_CASE("ensemble samples n candidates then votes") {
  Rig f({{"", "CANDIDATE 1/3", "", "alpha", -1, -1},
             {"", "CANDIDATE 2/3", "", "beta", -1, -1},
             {"", "CANDIDATE 3/3", "", "gamma", -1, -1},
             {"", "self-consistency vote", "", "Candidate 2 wins.", -1, -1}});
  OperatorCallContext ctx = f.ctx();
  OperatorConfig cfg = make_config(OperatorKind::MultiGenerateEnsemble, "e", "solve",
                                   {{"num_solutions", 3}});
  json out = op_multi_generate_ensemble(json::object(), "q", cfg, ctx);
  CHECK(out["response"] == "beta");
  CHECK(f.mock->call_count() == 4);
  std::string vote_prompt = f.mock->call_log()[3].user_text();
  CHECK(vote_prompt.find("1. alpha") != std::string::npos);
  CHECK(vote_prompt.find("3. gamma") != std::string::npos);
}

TEST_CASE("ensemble falls back to the plurality candidate") {
  Rig f({{"", "CANDIDATE 1/3", "", "same", -1, -1},
             {"", "CANDIDATE 2/3", "", "lone", -1, -1},
             {"", "CANDIDATE 3/3", "", "same", -1, -1},
             {"", "self-consistency vote", "", "none of them", -1, -1}});
  OperatorCallContext ctx = f.ctx();
  OperatorConfig cfg = make_config(OperatorKind::MultiGenerateEnsemble, "e", "i",
                                   {{"num_solutions", 3}});
  json out = op_multi_generate_ensemble(json::object(), "q", cfg, ctx);
  CHECK(out["response"] == "same");
}

TEST_CASE("ensemble ties go to the earliest candidate") {
  Rig f({{"", "CANDIDATE 1/2", "", "first", -1, -1},
             {"", "CANDIDATE 2/2", "", "second", -1, -1},
             {"", "self-consistency vote", "", "0 is my pick", -1, -1}});
  OperatorCallContext ctx = f.ctx();
  OperatorConfig cfg = make_config(OperatorKind::MultiGenerateEnsemble, "e", "i",
                                   {{"num_solutions", 2}});
  // "0" is outside [1, n], so the vote is unparsable and both candidates tie
  json out = op_multi_generate_ensemble(json::object(), "q", cfg, ctx);
  CHECK(out["response"] == "first");
}

TEST_CASE("single-candidate ensemble makes exactly one call") {
  Rig f({{"", "CANDIDATE 1/1", "", "only", -1, -1}});
  OperatorCallContext ctx = f.ctx();
  OperatorConfig cfg = make_config(OperatorKind::MultiGenerateEnsemble, "e", "i",
                                   {{"num_solutions", 1}});
  json out = op_multi_generate_ensemble(json::object(), "q", cfg, ctx);
  CHECK(out["response"] == "only");
  CHECK(f.mock->call_count() == 1);
}

TEST_CASE("ensemble rejects a non-positive candidate count") {
  Rig f({});
  OperatorCallContext ctx = f.ctx();
  OperatorConfig cfg = make_config(OperatorKind::MultiGenerateEnsemble, "e", "i",
                                   {{"num_solutions", 0}});
  try {
    op_multi_generate_ensemble(json::object(), "q", cfg, ctx);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Validation);
  }
}

TEST_CASE("programmer runs generated code and returns its stdout") {
  Sandbox sandbox;
  Rig f({{"", "", "", "```python\nprint(6 * 7)\n```", -1, -1}}, &sandbox);
  OperatorCallContext ctx = f.ctx();
  OperatorConfig cfg = make_config(OperatorKind::Programmer, "p", "compute");
  json out = op_programmer(json::object(), "what is 6*7", cfg, ctx);
  CHECK(out["response"] == "42");
  CHECK(out["result"] == "pass");
  CHECK(out["code"].get<std::string>().find("print(6 * 7)") != std::string::npos);
  CHECK(f.mock->call_count() == 1);
}

TEST_CASE("programmer repairs a broken first attempt") {
  Sandbox sandbox;
  // The repair prompt carries the failing code, so match on the error section.
  Rig f({{"", "## FEEDBACK", "", "```python\nprint('fixed')\n```", -1, -1},
         {"", "", "", "```python\nraise ValueError('boom')\n```", -1, -1}},
        &sandbox);
  OperatorCallContext ctx = f.ctx();
  OperatorConfig cfg = make_config(OperatorKind::Programmer, "p", "i",
                                   {{"max_repair_attempts", 3}});
  json out = op_programmer(json::object(), "q", cfg, ctx);
  CHECK(out["result"] == "pass");
  CHECK(out["response"] == "fixed");
  CHECK(f.mock->call_count() == 2);
  std::string repair_prompt = f.mock->call_log()[1].user_text();
  CHECK(repair_prompt.find("## PREVIOUS") != std::string::npos);
  CHECK(repair_prompt.find("boom") != std::string::npos);
}

TEST_CASE("programmer gives up after the repair budget") {
  Sandbox sandbox;
  Rig f({{"", "", "", "```python\nraise RuntimeError('always')\n```", -1, -1}}, &sandbox);
  OperatorCallContext ctx = f.ctx();
  OperatorConfig cfg = make_config(OperatorKind::Programmer, "p", "i",
                                   {{"max_repair_attempts", 2}});
  json out = op_programmer(json::object(), "q", cfg, ctx);
  CHECK(out["result"] == "fail");
  CHECK(out["code"].get<std::string>().find("RuntimeError") != std::string::npos);
  CHECK(out["feedback"].get<std::string>().find("always") != std::string::npos);
  CHECK(f.mock->call_count() == 2);
}

TEST_CASE("sandbox kills runaway code at the time limit") {
  Sandbox sandbox("python3", {0.5, 256});
  CodeRunResult r = sandbox.run("while True:\n    pass", {});
  CHECK(!r.passed);
  REQUIRE(r.outcomes.size() == 1);
  CHECK(r.outcomes[0].error.find("timeout") != std::string::npos);
}

TEST_CASE("sandbox blocks socket creation") {
  Sandbox sandbox;
  CodeRunResult r = sandbox.run(
      "import socket\nsocket.socket(socket.AF_INET, socket.SOCK_STREAM)", {});
  CHECK(!r.passed);
  CHECK(r.outcomes[0].error.find("network access is disabled") != std::string::npos);
}

TEST_CASE("sandbox runs are deterministic for pure code") {
  Sandbox sandbox;
  std::string code = "print(sum(i * i for i in range(100)))";
  CodeRunResult a = sandbox.run(code, {});
  CodeRunResult b = sandbox.run(code, {});
  CHECK(a.passed);
  CHECK(a.stdout_excerpt == b.stdout_excerpt);
  CHECK(a.stdout_excerpt.find("328350") != std::string::npos);
}

TEST_CASE("sandbox reports one outcome per test") {
  Sandbox sandbox;
  CodeRunResult r = sandbox.run("x = 10", {"assert x == 10", "assert x == 11"});
  REQUIRE(r.outcomes.size() == 2);
  CHECK(r.outcomes[0].passed);
  CHECK(!r.outcomes[1].passed);
  CHECK(!r.passed);
}

TEST_CASE("runtime invoke synthesizes a trace entry for quiet handlers") {
  Rig f({});
  OperatorRuntime runtime(f.gateway.get(), nullptr, "m");
  runtime.set_handler(OperatorKind::Generate,
                      [](json state, const std::string&, const OperatorConfig&,
                         OperatorCallContext&) {
                        state["response"] = "silent";
                        return state;
                      });
  BlockRecord record;
  OperatorCallContext ctx = runtime.make_context(&record, nullptr);
  OperatorConfig cfg = make_config(OperatorKind::Generate, "g", "i");
  runtime.invoke(cfg, json::object(), "q", ctx);
  REQUIRE(record.invocations.size() == 1);
  CHECK(record.invocations[0].alias == "g");
  CHECK(record.invocations[0].output == "silent");
}
