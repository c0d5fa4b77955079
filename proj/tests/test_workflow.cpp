#include <doctest.h>

#include <random>

#include "judgeflow/errors.hpp"
#include "judgeflow/workflow.hpp"
#include "test_support.hpp"

using namespace judgeflow;

namespace {

const char* kMinimalDoc = R"({
  "operators": {
    "gen": {"kind": "generate", "instruction": "Solve the problem."}
  },
  "blocks": {
    "b1": {"type": "seq", "operators": ["gen"]}
  },
  "workflow": ["b1"]
})";

const char* kCaseStudyDoc = R"({
  "operators": {
    "multi": {"kind": "multi_generate_ensemble", "instruction": "Generate ideas.",
              "params": {"num_solutions": 3}},
    "prog": {"kind": "programmer", "instruction": "Write code for the answer."}
  },
  "blocks": {
    "b1": {"type": "seq", "operators": ["multi"]},
    "b2": {"type": "seq", "operators": ["prog"]}
  },
  "workflow": ["b1", "b2"]
})";

Workflow two_block_workflow() { return parse_workflow(kCaseStudyDoc); }

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::Syntax;
}

}  // namespace

TEST_CASE("parse_workflow accepts the minimal document") {
  Workflow w = parse_workflow(kMinimalDoc);
  CHECK(w.order == std::vector<std::string>{"b1"});
  CHECK(w.blocks.size() == 1);
  CHECK(w.blocks.at("b1").variant == BlockVariant::Seq);
  CHECK(w.operators.at("gen").kind == OperatorKind::Generate);
  CHECK(!w.id.empty());
}

TEST_CASE("parse_workflow rejects a fourth block") {
  json doc = json::parse(kMinimalDoc);
  for (int i = 2; i <= 4; ++i) {
    doc["blocks"]["b" + std::to_string(i)] = doc["blocks"]["b1"];
    doc["workflow"].push_back("b" + std::to_string(i));
  }
  CHECK(kind_of([&] { parse_workflow(doc.dump()); }) == ErrorKind::Validation);
  // a larger cap admits the same document
  CHECK(parse_workflow_json(doc, 4).order.size() == 4);
}

TEST_CASE("parse_workflow handles the ensemble+programmer document") {
  Workflow w = two_block_workflow();
  CHECK(w.order == std::vector<std::string>{"b1", "b2"});
  CHECK(w.operators.at("multi").params["num_solutions"] == 3);
  CHECK(w.operators.at("prog").kind == OperatorKind::Programmer);
}

TEST_CASE("parse_workflow error taxonomy") {
  CHECK(kind_of([] { parse_workflow("not json at all"); }) == ErrorKind::Syntax);
  CHECK(kind_of([] { parse_workflow("[1,2]"); }) == ErrorKind::Schema);

  json doc = json::parse(kMinimalDoc);
  SUBCASE("missing top-level key") {
    doc.erase("workflow");
    CHECK(kind_of([&] { parse_workflow(doc.dump()); }) == ErrorKind::Schema);
  }
  SUBCASE("unknown block type") {
    doc["blocks"]["b1"]["type"] = "while";
    CHECK(kind_of([&] { parse_workflow(doc.dump()); }) == ErrorKind::Schema);
  }
  SUBCASE("unknown operator kind") {
    doc["operators"]["gen"]["kind"] = "reticulate";
    CHECK(kind_of([&] { parse_workflow(doc.dump()); }) == ErrorKind::Schema);
  }
  SUBCASE("field not valid for the variant") {
    doc["blocks"]["b1"]["max_iterations"] = 2;
    CHECK(kind_of([&] { parse_workflow(doc.dump()); }) == ErrorKind::Schema);
  }
  SUBCASE("empty operator list") {
    doc["blocks"]["b1"]["operators"] = json::array();
    CHECK(kind_of([&] { parse_workflow(doc.dump()); }) == ErrorKind::Schema);
  }
  SUBCASE("dangling alias") {
    doc["blocks"]["b1"]["operators"] = json::array({"ghost"});
    CHECK(kind_of([&] { parse_workflow(doc.dump()); }) == ErrorKind::Validation);
  }
  SUBCASE("duplicate order entry") {
    doc["workflow"] = json::array({"b1", "b1"});
    CHECK(kind_of([&] { parse_workflow(doc.dump()); }) == ErrorKind::Validation);
  }
}

TEST_CASE("parse_workflow applies loop defaults") {
  json doc = json::parse(kMinimalDoc);
  doc["blocks"]["b1"] = {{"type", "for"}, {"operators", json::array({"gen"})}};
  Workflow w = parse_workflow(doc.dump());
  CHECK(w.blocks.at("b1").max_iterations == 3);
  CHECK(!w.blocks.at("b1").condition.has_value());

  doc["blocks"]["b1"]["condition"] = {{"field", "result"}, {"equals", "pass"}};
  w = parse_workflow(doc.dump());
  REQUIRE(w.blocks.at("b1").condition.has_value());
  CHECK(w.blocks.at("b1").condition->field == "result");
  CHECK(w.blocks.at("b1").condition->equals == json("pass"));
}

TEST_CASE("parse_workflow applies the cond default field") {
  json doc = json::parse(kMinimalDoc);
  doc["blocks"]["b1"] = {{"type", "cond"},
                         {"condition_operator", "gen"},
                         {"success_operators", json::array({"gen"})},
                         {"failure_operators", json::array()}};
  Workflow w = parse_workflow(doc.dump());
  CHECK(w.blocks.at("b1").condition_field == "result");
}

TEST_CASE("validate reports every violation") {
  Workflow ok = two_block_workflow();
  CHECK(validate(ok).empty());

  Workflow w;
  LogicBlock loop;
  loop.name = "b1";
  loop.variant = BlockVariant::For;
  loop.operators = {"gen"};
  loop.max_iterations = 0;
  LogicBlock cond;
  cond.name = "b2";
  cond.variant = BlockVariant::Cond;
  cond.condition_operator = "ghost";
  cond.success_operators = {"gen"};
  w.blocks = {{"b1", loop}, {"b2", cond}};
  w.order = {"b1", "b2"};
  w.operators.emplace("gen", OperatorConfig{"gen", OperatorKind::Generate, "", "x", {}});

  auto violations = validate(w);
  REQUIRE(violations.size() == 2);
  bool saw_iterations = false, saw_dangling = false;
  for (const auto& v : violations) {
    if (v.find("b1") != std::string::npos && v.find("max_iterations") != std::string::npos)
      saw_iterations = true;
    if (v.find("b2") != std::string::npos && v.find("ghost") != std::string::npos)
      saw_dangling = true;
  }
  CHECK(saw_iterations);
  CHECK(saw_dangling);
}

TEST_CASE("canonicalize is key-order insensitive") {
  const char* reordered = R"({
    "workflow": ["b1", "b2"],
    "blocks": {
      "b2": {"operators": ["prog"], "type": "seq"},
      "b1": {"operators": ["multi"], "type": "seq"}
    },
    "operators": {
      "prog": {"instruction": "Write code for the answer.", "kind": "programmer"},
      "multi": {"params": {"num_solutions": 3}, "instruction": "Generate ideas.",
                "kind": "multi_generate_ensemble"}
    }
  })";
  Workflow a = two_block_workflow();
  Workflow b = parse_workflow(reordered);
  CHECK(canonicalize(a) == canonicalize(b));
  CHECK(a.id == b.id);
}

TEST_CASE("canonicalize separates distinct instructions") {
  Workflow a = two_block_workflow();
  json doc = json::parse(kCaseStudyDoc);
  doc["operators"]["prog"]["instruction"] = "Write tested code.";
  Workflow b = parse_workflow(doc.dump());
  CHECK(canonicalize(a) != canonicalize(b));
  CHECK(a.id != b.id);
}

TEST_CASE("canonicalize round-trip fixpoint") {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 200; ++i) {
    Workflow w = jf_test::random_workflow(rng);
    std::string canon = canonicalize(w);
    Workflow again = parse_workflow(canon);
    CHECK(canonicalize(again) == canon);
    CHECK(again.id == w.id);
  }
}

TEST_CASE("serialization round trip preserves structure") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) {
    Workflow w = jf_test::random_workflow(rng);
    Workflow back = parse_workflow_json(workflow_to_json(w));
    CHECK(back.order == w.order);
    CHECK(back.blocks == w.blocks);
    CHECK(back.operators == w.operators);
  }
}

TEST_CASE("apply_action inserts after the target") {
  Workflow w = two_block_workflow();
  ModAction a;
  a.action = ActionKind::AddBlock;
  a.target = "b1";
  a.placement = Placement::After;
  LogicBlock nb;
  nb.name = "b3";
  nb.variant = BlockVariant::Seq;
  nb.operators = {"refine"};
  a.block = nb;
  a.ops.emplace("refine",
                OperatorConfig{"refine", OperatorKind::SelfRefine, "", "Improve.", {}});
  Workflow out = apply_action(w, a);
  CHECK(out.order == std::vector<std::string>{"b1", "b3", "b2"});
  CHECK(out.operators.count("refine") == 1);
  CHECK(w.order == std::vector<std::string>{"b1", "b2"});  // input untouched
}

TEST_CASE("apply_action enforces the block budget") {
  Workflow w = two_block_workflow();
  ModAction grow;
  grow.action = ActionKind::AddBlock;
  grow.target = "b2";
  grow.placement = Placement::After;
  LogicBlock nb;
  nb.name = "b3";
  nb.variant = BlockVariant::Seq;
  nb.operators = {"prog"};
  grow.block = nb;
  Workflow three = apply_action(w, grow);
  REQUIRE(three.order.size() == 3);

  grow.block->name = "b4";
  try {
    apply_action(three, grow);
    FAIL("expected MaxBlocksExceeded");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MaxBlocksExceeded);
  }
}

TEST_CASE("apply_action refuses to empty the workflow") {
  Workflow w = parse_workflow(kMinimalDoc);
  ModAction a;
  a.action = ActionKind::RemoveBlock;
  a.target = "b1";
  try {
    apply_action(w, a);
    FAIL("expected EmptyWorkflow");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyWorkflow);
  }
}

TEST_CASE("RemoveBlock drops orphaned operator configs") {
  Workflow w = two_block_workflow();
  ModAction a;
  a.action = ActionKind::RemoveBlock;
  a.target = "b2";
  Workflow out = apply_action(w, a);
  CHECK(out.order == std::vector<std::string>{"b1"});
  CHECK(out.operators.count("prog") == 0);
  CHECK(out.operators.count("multi") == 1);
}

TEST_CASE("AddBlock name rules") {
  CHECK(is_fresh_block_name("b1"));
  CHECK(is_fresh_block_name("b12"));
  CHECK(!is_fresh_block_name("b0"));
  CHECK(!is_fresh_block_name("b01"));
  CHECK(!is_fresh_block_name("b"));
  CHECK(!is_fresh_block_name("x3"));
  CHECK(!is_fresh_block_name("b3x"));

  Workflow w = two_block_workflow();
  ModAction a;
  a.action = ActionKind::AddBlock;
  a.target = "b1";
  LogicBlock nb;
  nb.name = "extra";
  nb.variant = BlockVariant::Seq;
  nb.operators = {"multi"};
  a.block = nb;
  try {
    apply_action(w, a);
    FAIL("expected Validation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Validation);
  }
}

TEST_CASE("classify_diff recognizes the b3 insertion") {
  Workflow w = two_block_workflow();
  json doc = workflow_to_json(w);
  doc["operators"]["refine"] = {{"kind", "self_refine"}, {"instruction", "Improve."}};
  doc["blocks"]["b3"] = {{"type", "seq"}, {"operators", json::array({"refine"})}};
  doc["workflow"] = json::array({"b1", "b3", "b2"});
  Workflow next = parse_workflow(doc.dump());

  ModAction a = classify_diff(w, next, "b1");
  CHECK(a.action == ActionKind::AddBlock);
  CHECK(a.target == "b1");
  CHECK(a.placement == Placement::After);
  REQUIRE(a.block.has_value());
  CHECK(a.block->name == "b3");
}

TEST_CASE("classify_diff rejects degenerate diffs") {
  Workflow w = two_block_workflow();

  SUBCASE("no change") {
    try {
      classify_diff(w, w, "b1");
      FAIL("expected IllegalDiff");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::IllegalDiff);
    }
  }
  SUBCASE("two blocks changed at once") {
    json doc = workflow_to_json(w);
    doc["operators"]["multi"]["instruction"] = "Generate more ideas.";
    doc["operators"]["prog"]["instruction"] = "Write different code.";
    Workflow next = parse_workflow(doc.dump());
    try {
      classify_diff(w, next, "b1");
      FAIL("expected IllegalDiff");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::IllegalDiff);
    }
  }
  SUBCASE("change outside the target") {
    json doc = workflow_to_json(w);
    doc["operators"]["prog"]["instruction"] = "Write different code.";
    Workflow next = parse_workflow(doc.dump());
    try {
      classify_diff(w, next, "b1");
      FAIL("expected IllegalDiff");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::IllegalDiff);
    }
  }
  SUBCASE("insertion not adjacent to the target") {
    json doc = workflow_to_json(w);
    doc["operators"]["refine"] = {{"kind", "self_refine"}, {"instruction", "Improve."}};
    doc["blocks"]["b3"] = {{"type", "seq"}, {"operators", json::array({"refine"})}};
    doc["workflow"] = json::array({"b1", "b2", "b3"});
    Workflow next = parse_workflow(doc.dump());
    try {
      classify_diff(w, next, "b1");
      FAIL("expected IllegalDiff");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::IllegalDiff);
    }
  }
  SUBCASE("removal of a non-target block") {
    json doc = workflow_to_json(w);
    doc["workflow"] = json::array({"b1"});
    doc["blocks"].erase("b2");
    doc["operators"].erase("prog");
    Workflow next = parse_workflow(doc.dump());
    try {
      classify_diff(w, next, "b1");
      FAIL("expected IllegalDiff");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::IllegalDiff);
    }
  }
}

TEST_CASE("classify_diff inverts apply_action on random workflows") {
  std::mt19937_64 rng(99);
  int uniq = 0;
  int applied = 0;
  for (int i = 0; i < 400; ++i) {
    Workflow w = jf_test::random_workflow(rng, uniq);
    ModAction a = jf_test::random_action(rng, w, uniq);
    Workflow next = apply_action(w, a);
    REQUIRE(next.order.size() >= 1);
    REQUIRE(next.order.size() <= 3);
    ModAction back = classify_diff(w, next, a.target);
    CHECK(jf_test::same_action(a, back));
    ++applied;
  }
  CHECK(applied == 400);
}

TEST_CASE("canonical hash equality tracks structural equality") {
  std::mt19937_64 rng(31337);
  int uniq = 0;
  for (int i = 0; i < 100; ++i) {
    Workflow w = jf_test::random_workflow(rng, uniq);
    Workflow same = parse_workflow(canonicalize(w));
    CHECK(same.id == w.id);
    ModAction a = jf_test::random_action(rng, w, uniq);
    Workflow changed = apply_action(w, a);
    CHECK(changed.id != w.id);
    CHECK((canonicalize(changed) == canonicalize(w)) == (changed.id == w.id));
  }
}
