#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>

#include "judgeflow/dataset.hpp"
#include "judgeflow/errors.hpp"
#include "judgeflow/sandbox.hpp"
#include "judgeflow/simulate.hpp"

using namespace judgeflow;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& content) {
    static int counter = 0;
    path = "/tmp/judgeflow_test_" + std::to_string(getpid()) + "_" +
           std::to_string(counter++) + ".jsonl";
    std::ofstream out(path);
    out << content;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

json response_state(const std::string& text) { return json{{"response", text}}; }

}  // namespace

TEST_CASE("a three-line math file loads three instances") {
  TempFile f(
      "{\"id\": \"m1\", \"question\": \"1+1?\", \"answer\": \"2\"}\n"
      "{\"id\": \"m2\", \"question\": \"2+2?\", \"answer\": \"4\"}\n"
      "\n"
      "{\"id\": \"m3\", \"question\": \"cost?\", \"answer\": \"18\"}\n");
  auto all = load_dataset(f.path, "math");
  REQUIRE(all.size() == 3);
  CHECK(all[0].id == "m1");
  CHECK(all[2].answer == "18");
  CHECK(all[1].question == "2+2?");
}

TEST_CASE("code records need a non-empty tests array") {
  TempFile f(
      "{\"id\": \"c1\", \"question\": \"q\", \"tests\": [\"assert f(1) == 1\"]}\n"
      "{\"id\": \"c2\", \"question\": \"q\"}\n");
  try {
    load_dataset(f.path, "code");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::FormatError);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("numeric answers pass through as text") {
  TempFile f("{\"id\": \"m1\", \"question\": \"q\", \"answer\": 18}\n");
  auto all = load_dataset(f.path, "math");
  CHECK(all[0].answer == "18");
}

TEST_CASE("duplicate ids are rejected") {
  TempFile f(
      "{\"id\": \"x\", \"question\": \"a\", \"answer\": \"1\"}\n"
      "{\"id\": \"x\", \"question\": \"b\", \"answer\": \"2\"}\n");
  try {
    load_dataset(f.path, "math");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DuplicateId);
    CHECK(std::string(e.what()).find("'x'") != std::string::npos);
  }
}

TEST_CASE("malformed lines and bad kinds fail loudly") {
  TempFile f("not json at all\n");
  CHECK_THROWS_AS(load_dataset(f.path, "math"), Error);
  TempFile ok("{\"id\": \"m\", \"question\": \"q\", \"answer\": \"1\"}\n");
  CHECK_THROWS_AS(load_dataset(ok.path, "prose"), Error);
  CHECK_THROWS_AS(load_dataset("/nonexistent/nowhere.jsonl", "math"), Error);
}

TEST_CASE("splits are deterministic, disjoint, and sized by ratio") {
  std::vector<TaskInstance> all;
  for (int i = 0; i < 10; ++i) {
    TaskInstance t;
    t.id = "t" + std::to_string(i);
    all.push_back(t);
  }

  DatasetSplit a = split_dataset(all, 0.3, 42);
  DatasetSplit b = split_dataset(all, 0.3, 42);
  CHECK(a.train.size() == 3);
  CHECK(a.test.size() == 7);
  for (std::size_t i = 0; i < a.train.size(); ++i)
    CHECK(a.train[i].id == b.train[i].id);
  for (std::size_t i = 0; i < a.test.size(); ++i) CHECK(a.test[i].id == b.test[i].id);

  std::set<std::string> seen;
  for (const auto& t : a.train) seen.insert(t.id);
  for (const auto& t : a.test) CHECK(seen.insert(t.id).second);
  CHECK(seen.size() == all.size());

  DatasetSplit c = split_dataset(all, 0.3, 43);
  bool differs = false;
  for (std::size_t i = 0; i < a.train.size(); ++i)
    if (a.train[i].id != c.train[i].id) differs = true;
  CHECK(differs);

  CHECK(split_dataset(all, 0.0, 1).train.empty());
  CHECK(split_dataset(all, 1.0, 1).test.empty());
  CHECK_THROWS_AS(split_dataset(all, 1.5, 1), Error);
}

TEST_CASE("math scoring extracts the last number") {
  CHECK(eval_math(response_state("…so the answer is 42."), "42") == 1.0);
  CHECK(eval_math(response_state("3/2"), "1.5") == 1.0);
  CHECK(eval_math(response_state("there is no number here"), "7") == 0.0);
  CHECK(eval_math(response_state("first 10 then 20 final 30"), "30") == 1.0);
  CHECK(eval_math(response_state("first 10 then 20 final 30"), "10") == 0.0);
  CHECK(eval_math(response_state("the total is $1,234.50"), "1234.5") == 1.0);
  CHECK(eval_math(response_state("it drops to -4 degrees"), "-4") == 1.0);
  CHECK(eval_math(response_state("roughly 0.3333333 of the pie"), "1/3") == 1.0);
  CHECK(eval_math(response_state("42.0000001 approximately"), "42") == 1.0);
  CHECK(eval_math(response_state("43"), "42") == 0.0);
  CHECK(eval_math(json::object(), "42") == 0.0);
}

TEST_CASE("number extraction handles edge shapes") {
  double v = 0;
  CHECK(extract_last_number("x = 12, y = 3.5", v));
  CHECK(v == 3.5);
  CHECK(extract_last_number("7/2 is the ratio", v));
  CHECK(v == 3.5);
  CHECK(!extract_last_number("no digits", v));
  CHECK(parse_gold_number(" 18 ", v));
  CHECK(v == 18.0);
  CHECK(parse_gold_number("$2,500", v));
  CHECK(v == 2500.0);
  CHECK(!parse_gold_number("none", v));
}

TEST_CASE("code extraction prefers the code field and strips fences") {
  CHECK(extract_code({{"code", "print(1)"}, {"response", "ignored"}}) == "print(1)");
  CHECK(extract_code({{"code", ""}, {"response", "print(2)"}}) == "print(2)");
  CHECK(extract_code(response_state("```python\nprint(3)\n```")) == "print(3)\n");
  CHECK(extract_code(response_state("```\nprint(4)\n```")) == "print(4)\n");
  CHECK(extract_code(response_state("text\n```python\nprint(5)\n``` trailing")) ==
        "print(5)\n");
  CHECK(extract_code(response_state("```python\nno closing fence")) == "no closing fence");
  CHECK(extract_code(response_state("plain code")) == "plain code");
  CHECK(extract_code(json::object()).empty());
}

TEST_CASE("code scoring is all-or-nothing") {
  Sandbox sandbox;
  TaskInstance inst;
  inst.tests = {"assert double_it(2) == 4", "assert double_it(0) == 0",
                "assert double_it(-3) == -6"};

  CHECK(eval_code(response_state("```python\ndef double_it(x):\n    return 2 * x\n```"),
                  inst, sandbox) == 1.0);
  // passes two of three tests
  CHECK(eval_code(response_state("def double_it(x):\n    return x + x if x >= 0 else 0"),
                  inst, sandbox) == 0.0);
  CHECK(eval_code(response_state("def double_it(x) return"), inst, sandbox) == 0.0);
}

TEST_CASE("noise-free attribution always recovers the planted block") {
  AttributionSimConfig cfg;
  cfg.blocks = 3;
  cfg.noise_p = 1.0;
  cfg.failures = 5;
  cfg.trials = 200;
  cfg.seed = 1;
  cfg.workers = 2;
  AttributionSimResult r = simulate_attribution(cfg);
  CHECK(r.recovery_rate == 1.0);
  CHECK(r.recovered == 200);
}

TEST_CASE("a single block is always recovered") {
  AttributionSimConfig cfg;
  cfg.blocks = 1;
  cfg.noise_p = 0.0;
  cfg.failures = 3;
  cfg.trials = 50;
  cfg.seed = 2;
  AttributionSimResult r = simulate_attribution(cfg);
  CHECK(r.recovery_rate == 1.0);
}

TEST_CASE("aggregation recovers a moderately noisy judge") {
  AttributionSimConfig cfg;
  cfg.blocks = 3;
  cfg.noise_p = 0.6;
  cfg.failures = 30;
  cfg.trials = 2000;
  cfg.seed = 0;
  AttributionSimResult r = simulate_attribution(cfg);
  CHECK(r.recovery_rate >= 0.99);
  CHECK(r.recovered == static_cast<long long>(r.recovery_rate * cfg.trials + 0.5));
  // planted sums concentrate below the best competitor
  CHECK(!r.planted_sum_hist.empty());
  CHECK(!r.best_other_sum_hist.empty());
}

TEST_CASE("the simulator is deterministic per seed and worker-count independent") {
  AttributionSimConfig cfg;
  cfg.blocks = 3;
  cfg.noise_p = 0.4;
  cfg.failures = 10;
  cfg.trials = 500;
  cfg.seed = 77;
  cfg.workers = 1;
  AttributionSimResult a = simulate_attribution(cfg);
  cfg.workers = 4;
  AttributionSimResult b = simulate_attribution(cfg);
  CHECK(a.recovered == b.recovered);
  CHECK(a.planted_sum_hist == b.planted_sum_hist);
}

TEST_CASE("recovery improves with sharper judges and more failures") {
  auto recovery = [](double p, int t, std::uint64_t seed) {
    AttributionSimConfig cfg;
    cfg.blocks = 3;
    cfg.noise_p = p;
    cfg.failures = t;
    cfg.trials = 800;
    cfg.seed = seed;
    return simulate_attribution(cfg).recovery_rate;
  };
  // averaged over a few seeds, monotone trends should be clear
  double low_p = 0, high_p = 0, few_t = 0, many_t = 0;
  for (std::uint64_t s = 0; s < 3; ++s) {
    low_p += recovery(0.2, 20, s);
    high_p += recovery(0.7, 20, s);
    few_t += recovery(0.5, 4, s + 10);
    many_t += recovery(0.5, 40, s + 10);
  }
  CHECK(high_p > low_p);
  CHECK(many_t > few_t);
}
