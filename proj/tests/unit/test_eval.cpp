#include <doctest.h>

#include <sstream>

#include "stepml/builtins.hpp"
#include "stepml/eval.hpp"
#include "stepml/prelude.hpp"
#include "stepml/render.hpp"
#include "stepml/syntax.hpp"
#include "support/properties.hpp"

using namespace stepml;

namespace {

ExprPtr expr(const std::string& src) { return parse_expr(src); }

std::string stepped(Engine& engine, const std::string& src) {
  StepOutcome o = engine.step(expr(src));
  REQUIRE(o.is_next());
  return render_plain(o.expr);
}

// Every state of a run, printed.
std::vector<std::string> states(const std::string& src) {
  std::ostringstream out;
  auto engine = props::make_engine(out);
  std::vector<std::string> result;
  ExprPtr e = expr(src);
  result.push_back(render_plain(e));
  while (true) {
    StepOutcome o = engine->step(e);
    if (!o.is_next()) break;
    e = o.expr;
    result.push_back(render_plain(e));
  }
  return result;
}

}  // namespace

TEST_CASE("values") {
  CHECK(is_value(expr("7")));
  CHECK_FALSE(is_value(expr("1 + 6")));
  CHECK(is_value(expr("[2; 3]")));
  CHECK(is_value(expr("fun x -> x + 1")));
  CHECK(is_value(expr("(1, \"a\", [true])")));
  CHECK_FALSE(is_value(expr("(1, 2 + 3)")));
  CHECK(is_value(expr("Some 3")));
  CHECK_FALSE(is_value(expr("{contents = 1}")));  // not yet allocated
}

TEST_CASE("the right operand of a comparison reduces first") {
  Engine engine;
  StepOutcome o = engine.step(expr("1 + 2 > 3 + 4"));
  REQUIRE(o.is_next());
  CHECK(render_plain(o.expr) == "1 + 2 > 7");
  CHECK(o.op == LastOp::Arith);
}

TEST_CASE("false && e short-circuits") {
  Engine engine;
  for (const char* src : {"false && (1 / 0 = 1)", "false && true", "false && undefined_name"}) {
    CAPTURE(src);
    StepOutcome o = engine.step(expr(src));
    REQUIRE(o.is_next());
    CHECK(render_plain(o.expr) == "false");
    CHECK(o.op == LastOp::Boolean);
  }
}

TEST_CASE("already a value") {
  Engine engine;
  CHECK(engine.step(expr("7")).kind == StepOutcome::Kind::AlreadyValue);
}

TEST_CASE("division by zero becomes a raise") {
  Engine engine;
  StepOutcome o = engine.step(expr("1 / 0"));
  REQUIRE(o.is_next());
  CHECK(render_plain(o.expr) == "raise Division_by_zero");
  CHECK(o.op == LastOp::Arith);
}

TEST_CASE("try with reduces to 4 in four steps") {
  CHECK(states("try 1 + 1/(1-1) with Division_by_zero -> 2 + 2") ==
        std::vector<std::string>{
            "try 1 + 1 / (1 - 1) with Division_by_zero -> 2 + 2",
            "try 1 + 1 / 0 with Division_by_zero -> 2 + 2",
            "try 1 + raise Division_by_zero with Division_by_zero -> 2 + 2",
            "2 + 2",
            "4",
        });
}

TEST_CASE("an unhandled exception escapes") {
  Engine engine;
  RunResult r = engine.run_to_value(expr("1 + 1/(1-1)"));
  CHECK(r.uncaught());
  CHECK(r.exception == "Division_by_zero");
}

TEST_CASE("peek classifies without acting") {
  std::ostringstream out;
  auto engine = props::make_engine(out);
  CHECK(engine->peek(expr("2 * 12")) == LastOp::Arith);
  CHECK(engine->peek(expr("if true then 1 else 2")) == LastOp::IfBool);
  CHECK(engine->peek(expr("1 < 2")) == LastOp::Comparison);

  // Reduce `print_int 5` until the builtin is about to run, then peek.
  ExprPtr e = expr("print_int 5");
  while (engine->peek(e) != LastOp::InsideBuiltIn) {
    StepOutcome o = engine->step(e);
    REQUIRE(o.is_next());
    e = o.expr;
  }
  const auto steps = engine->steps_taken();
  CHECK(engine->peek(e) == LastOp::InsideBuiltIn);
  CHECK(out.str().empty());
  CHECK(engine->steps_taken() == steps);
  StepOutcome o = engine->step(e);
  CHECK(out.str() == "5");
  CHECK(render_plain(o.expr) == "()");
}

TEST_CASE("locate gives the path of the redex") {
  Engine engine;
  auto loc = engine.locate(expr("1 + 2 > 3 + 4"));
  REQUIRE(loc);
  CHECK(loc->path == Path{1});
  CHECK_FALSE(engine.locate(expr("7")));
}

TEST_CASE("pattern matching") {
  auto m = match_pattern(*make_pattern(PCons{make_pattern(PVar{"h"}), make_pattern(PVar{"t"})}),
                         expr("[1; 2; 3]"));
  REQUIRE(m);
  REQUIRE(m->size() == 2);
  CHECK((*m)[0].first == "h");
  CHECK(render_plain((*m)[0].second) == "1");
  CHECK(render_plain((*m)[1].second) == "[2; 3]");

  CHECK_FALSE(match_pattern(*make_pattern(PInt{4}), expr("3")));

  auto t = match_pattern(*make_pattern(PTuple{{make_pattern(PVar{"a"}), make_pattern(PAny{})}}),
                         expr("(7, ())"));
  REQUIRE(t);
  REQUIRE(t->size() == 1);
  CHECK(render_plain((*t)[0].second) == "7");
}

TEST_CASE("matching a raised exception") {
  auto cases_of = [](const std::string& src) {
    ExprPtr e = expr(src);
    return as<TryWith>(e)->cases;
  };
  MatchResult r = eval_match_exception("Division_by_zero", nullptr,
                                       cases_of("try () with Division_by_zero -> 2 + 2"));
  CHECK(r.matched);
  CHECK(render_plain(r.body) == "2 + 2");

  CHECK_FALSE(eval_match_exception("Failure", string_value("broken"),
                                   cases_of("try () with Division_by_zero -> 0"))
                  .matched);

  MatchResult bound = eval_match_exception("Failure", string_value("broken"),
                                           cases_of("try () with Failure m -> m"));
  REQUIRE(bound.matched);
  Engine engine;
  RunResult v = engine.run_to_value(bound.body);
  REQUIRE_FALSE(v.uncaught());
  CHECK(render_plain(v.value) == "\"broken\"");
}

TEST_CASE("builtins") {
  std::ostringstream out;
  EngineOptions opts;
  opts.out = &out;
  Engine engine(opts);
  install_standard_builtins(engine);
  engine.register_builtin("%add3", 3, "add3", [](Engine&, const std::vector<ExprPtr>& a) {
    return int_value(as<Int>(a[0])->value + as<Int>(a[1])->value + as<Int>(a[2])->value);
  });
  engine.register_builtin("%boom", 1, "boom", [](Engine&, const std::vector<ExprPtr>&) -> ExprPtr {
    throw HostException{"Failure", string_value("host")};
  });
  CHECK_THROWS_AS(engine.register_builtin("%add3", 1, "x", nullptr), DuplicateKey);
  engine.run_program(parse_program(
      "external print_int : int -> unit = \"%print_int\"\n"
      "external add3 : int -> int -> int -> int = \"%add3\"\n"
      "external boom : unit -> 'a = \"%boom\""));

  RunResult p = engine.run_to_value(expr("print_int 5"));
  CHECK(render_plain(p.value) == "()");
  CHECK(out.str() == "5");

  RunResult partial = engine.run_to_value(expr("add3 1 2"));
  REQUIRE_FALSE(partial.uncaught());
  CHECK(is_value(partial.value));
  CHECK(render(partial.value, nullptr, {}).text == "add3 1 2");
  CHECK(render_plain(engine.run_to_value(expr("add3 1 2 3")).value) == "6");

  RunResult failed = engine.run_to_value(expr("boom ()"));
  CHECK(failed.uncaught());
  CHECK(failed.exception == "Failure");
  CHECK(render_plain(failed.payload) == "\"host\"");
  CHECK(render_plain(engine.run_to_value(expr("try boom () with Failure m -> m")).value) ==
        "\"host\"");
}

TEST_CASE("whole programs") {
  CHECK(props::final_value("1 + 2 * 3") == "7");
  CHECK(props::final_value(
            "let rec factorial n = if n = 1 then 1 else n * factorial (n - 1)\n"
            "let _ = factorial 4") == "24");
  CHECK(props::final_value("let x = ref 0 in x := !x + 1; !x") == "1");
  CHECK(props::final_value("let p = {a = 1; b = 2} in p.a <- 5; p.a + p.b") == "7");
  CHECK(props::final_value("let r = ref 0 in while !r < 5 do r := !r + 1 done; !r") == "5");
  CHECK(props::final_value("let s = ref 0 in for i = 1 to 4 do s := !s + i done; !s") == "10");
  CHECK(props::final_value("let s = ref 0 in for i = 4 downto 1 do s := !s * 10 + i done; !s") ==
        "4321");
  CHECK(props::final_value("List.map (fun x -> x * x) [1; 2; 3]") == "[1; 4; 9]");
  CHECK(props::final_value("List.rev [1; 2; 3] @ [4]") == "[3; 2; 1; 4]");
  CHECK(props::final_value("List.length [1; 2; 3]") == "3");
  CHECK(props::final_value("\"ab\" ^ \"cd\"") == "\"abcd\"");
  CHECK(props::final_value("1.5 +. 2.25") == "3.75");
  CHECK(props::final_value("let f = function 0 -> \"zero\" | n when n < 0 -> \"neg\" | _ -> "
                           "\"pos\" in (f 0, f (-2), f 5)") == "(\"zero\", \"neg\", \"pos\")");
  CHECK(props::final_value("exception Oops of int\nlet _ = try raise (Oops 3) with Oops n -> n") ==
        "3");
  CHECK(props::final_value("type t = A | B of int\nlet _ = match B 2 with A -> 0 | B n -> n") ==
        "2");
  CHECK(props::final_value("let x = 1 in let f y = x + y in let x = 10 in f x") == "11");
  std::string ex;
  props::final_value("match 3 with 4 -> 0", &ex);
  CHECK(ex == "Match_failure");
  props::final_value("failwith \"no\"", &ex);
  CHECK(ex == "Failure");
}

TEST_CASE("match drops failing cases from the front") {
  const auto s = states("match 3 with 4 -> 0 | n -> n + 1");
  REQUIRE(s.size() >= 3);
  CHECK(s[1] == "match 3 with n -> n + 1");
}

TEST_CASE("currying steps one argument at a time") {
  const auto s = states("(fun x y -> x + y) 4 5");
  REQUIRE(s.size() >= 2);
  CHECK(s[1] == "(let x = 4 in fun y -> x + y) 5");
  CHECK(s.back() == "9");
}

TEST_CASE("fast curry binds every argument in one step") {
  std::ostringstream out;
  auto engine = props::make_engine(out);
  engine->set_fast_curry(true);
  StepOutcome o = engine->step(expr("(fun x y -> x + y) 4 5"));
  REQUIRE(o.is_next());
  CHECK(render_plain(o.expr) == "let x = 4 in let y = 5 in x + y");

  // Partial application binds only what it has; the oracle is slow currying.
  engine->set_fast_curry(false);
  RunResult slow = engine->run_to_value(expr("(fun x y -> x) 1"));
  engine->set_fast_curry(true);
  RunResult fast = engine->run_to_value(expr("(fun x y -> x) 1"));
  REQUIRE_FALSE(fast.uncaught());
  CHECK(is<Fun>(fast.value));
  CHECK(render_plain(engine->run_to_value(make(App{fast.value, int_value(9)})).value) ==
        render_plain(engine->run_to_value(make(App{slow.value, int_value(9)})).value));
  CHECK(render_plain(apply_fast_curry(expr("(fun x -> x) 1"))) == "(fun x -> x) 1");
}

TEST_CASE("modules") {
  std::ostringstream out;
  auto engine = props::make_engine(out);
  const EnvNode* before = engine->globals();
  engine->load_module("Empty", {});
  CHECK(engine->globals() == before);

  engine->load_module("A", parse_program("let f x = x * 2\nlet base = 10"));
  engine->load_module("B", parse_program("let calc n = A.f n + A.base"));
  RunResult r = engine->run_program(parse_program("let _ = B.calc 4"));
  REQUIRE_FALSE(r.uncaught());
  // Same program as one file with the names spelled out.
  CHECK(render_plain(as<LetDef>(r.value)->bindings[0].expr) ==
        props::final_value("let a_f x = x * 2\nlet a_base = 10\nlet b_calc n = a_f n + a_base\n"
                           "let _ = b_calc 4"));
}

TEST_CASE("divergence hits the step budget") {
  std::ostringstream out;
  auto engine = props::make_engine(out);
  engine->set_step_budget(engine->steps_taken() + 10'000);
  CHECK_THROWS_AS(engine->run_to_value(expr("let rec loop x = loop x in loop 0")),
                  StepBudgetExceeded);
}

TEST_CASE("integer edge cases") {
  CHECK(props::final_value("4611686018427387904 * 4 = 0") == "true");
  CHECK(props::final_value("7 mod (-1)") == "0");
  CHECK(props::final_value("(-7) / 2") == "-3");
  CHECK(props::final_value("(-7) mod 2") == "-1");
}
