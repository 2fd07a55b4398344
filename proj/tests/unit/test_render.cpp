#include <doctest.h>

#include <sstream>

#include "stepml/render.hpp"
#include "stepml/syntax.hpp"
#include "support/properties.hpp"

using namespace stepml;

namespace {

std::string underlined(const TraceLine& l) {
  if (l.redex_span.empty()) return "";
  return l.text.substr(l.redex_span.begin, l.redex_span.end - l.redex_span.begin);
}

std::vector<TraceLine> trace(const std::string& src, RenderOptions opts) {
  std::ostringstream out;
  auto engine = props::make_engine(out);
  CollectingSink sink;
  emit_trace(*engine, parse_program(src), opts, sink);
  return sink.lines;
}

RenderOptions everything() {
  RenderOptions o;
  o.show_all = true;
  return o;
}

}  // namespace

TEST_CASE("simple renderings") {
  TraceLine sum = render(make(Op{ArithOp::Add, int_value(4), int_value(5)}), nullptr, {});
  CHECK(sum.text == "4 + 5");
  const Path root;
  TraceLine marked = render(make(Op{ArithOp::Add, int_value(4), int_value(5)}), &root, {});
  CHECK(underlined(marked) == "4 + 5");

  CHECK(render(list_value({int_value(2), int_value(3)}), nullptr, {}).text == "[2; 3]");
  CHECK(render_plain(make(Cons{int_value(1), make(Var{"l"})})) == "1 :: l");
  CHECK(render_plain(parse_expr("fun x y -> x + y")) == "fun x y -> x + y");
  CHECK(render_plain(string_value("a\"b\n")) == "\"a\\\"b\\n\"");
  CHECK(render_plain(make(Float{2.0})) == "2.");
  CHECK(render_plain(make(Float{0.1})) == "0.1");
  CHECK(render_plain(int_value(-3)) == "-3");
  CHECK(render_plain(parse_expr("f (-3)")) == "f (-3)");
}

TEST_CASE("factorial with side-lets") {
  RenderOptions opts;
  opts.side_lets = true;
  const auto lines = trace(
      "let rec factorial n =\n  if n = 1 then 1 else n * factorial (n - 1)\n\nlet _ = factorial 4",
      opts);
  REQUIRE(lines.size() >= 2);
  CHECK(lines[0].text == "factorial 4");
  CHECK(lines[1].gutter == "n = 4");
  CHECK(lines[1].text == "if n = 1 then 1 else n * factorial (n - 1)");
  CHECK(lines.back().text == "24");
  CHECK(lines.back().arrow == "=>* ");
  CHECK(lines.back().gutter.empty());
}

TEST_CASE("side-lets stay inline when a name is bound twice") {
  RenderOptions opts;
  opts.side_lets = true;
  TraceLine l = render(parse_expr("let x = 1 in let x = 2 in x"), nullptr, opts);
  CHECK(l.gutter.empty());
  CHECK(l.text == "let x = 1 in let x = 2 in x");
  TraceLine two = render(parse_expr("let x = 1 in let y = 2 in x + y"), nullptr, opts);
  CHECK(two.gutter == "x = 1 y = 2");
  CHECK(two.text == "x + y");
  TraceLine computed = render(parse_expr("let x = 1 + 1 in x"), nullptr, opts);
  CHECK(computed.gutter.empty());
}

TEST_CASE("should_print") {
  RenderOptions opts;
  // No previous state: always printed.
  CHECK(should_print(std::nullopt, false, LastOp::Arith, false, opts));
  // A value: always printed.
  CHECK(should_print(LastOp::Arith, true, std::nullopt, false, opts));
  // Sandwiched between arithmetic steps: elided.
  CHECK_FALSE(should_print(LastOp::Arith, false, LastOp::Arith, false, opts));
  // A value coming next does not rescue a state inside an arithmetic run;
  // otherwise 1 * 24 would show between 1 * (2 * 12) and 24.
  CHECK_FALSE(should_print(LastOp::Arith, false, LastOp::Arith, true, opts));
  CHECK(should_print(LastOp::Arith, false, LastOp::Other, false, opts));
  CHECK(should_print(LastOp::Other, false, LastOp::Arith, false, opts));
  CHECK_FALSE(should_print(LastOp::VarLookup, false, LastOp::VarLookup, false, opts));
  CHECK_FALSE(should_print(LastOp::IfBool, false, LastOp::IfBool, false, opts));
  CHECK_FALSE(should_print(LastOp::Comparison, false, LastOp::Comparison, false, opts));
  CHECK_FALSE(should_print(LastOp::Boolean, false, LastOp::Boolean, false, opts));
  // Mixed enabled kinds still count as a sandwich.
  CHECK_FALSE(should_print(LastOp::Arith, false, LastOp::VarLookup, false, opts));
  CHECK(should_print(LastOp::InsideBuiltIn, false, LastOp::InsideBuiltIn, false, opts));

  RenderOptions off = opts;
  off.elide_arith = false;
  CHECK(should_print(LastOp::Arith, false, LastOp::Arith, false, off));
  CHECK_FALSE(elidable(LastOp::Arith, off));
  CHECK(elidable(LastOp::Arith, opts));
  CHECK_FALSE(elidable(LastOp::Other, opts));

  RenderOptions all = opts;
  all.show_all = true;
  CHECK(should_print(LastOp::Arith, false, LastOp::Arith, false, all));
}

TEST_CASE("elision keeps the endpoints of an arithmetic run") {
  const auto elided = trace("1 * (2 * (3 * 4))", RenderOptions{});
  REQUIRE(elided.size() == 2);
  CHECK(elided[0].text == "1 * (2 * (3 * 4))");
  CHECK(elided[0].arrow == "   ");
  CHECK(elided[1].text == "24");
  CHECK(elided[1].arrow == "=>* ");
  CHECK(trace("1 * (2 * (3 * 4))", everything()).size() == 4);
}

TEST_CASE("exception lines") {
  CHECK(exception_line("Division_by_zero", nullptr) == "Exception: Division_by_zero.");
  CHECK(exception_line("Failure", string_value("oops")) == "Exception: Failure \"oops\".");
  const auto lines = trace("1 + 1/(1-1)", everything());
  REQUIRE_FALSE(lines.empty());
  CHECK(lines.back().is_exception);
  CHECK(lines.back().text == "Exception: Division_by_zero.");
}

TEST_CASE("redex spans re-parse to the redex") {
  const auto lines = trace("let x = 3 in (x + 1) * 2 > 7 && not false", everything());
  for (std::size_t i = 0; i + 1 < lines.size(); ++i) {
    CAPTURE(lines[i].text);
    const std::string r = underlined(lines[i]);
    REQUIRE_FALSE(r.empty());
    CHECK_NOTHROW(parse_expr(r));
  }
  CHECK(underlined(trace("1 + 2 * 3", everything())[0]) == "2 * 3");
}

TEST_CASE("plain and ANSI output agree") {
  for (const auto& src : props::pure_corpus()) {
    CAPTURE(src);
    RenderOptions plain = everything();
    plain.side_lets = true;
    RenderOptions ansi = plain;
    ansi.ansi = true;
    const auto lines = trace(src, plain);
    for (const auto& l : lines) {
      const std::vector<Span> hl = {{0, 2}};
      CHECK(strip_ansi(format_line(l, 6, hl, ansi)) == format_line(l, 6, hl, plain));
      CHECK(format_line(l, 6, {}, plain) == plain_line(l, 6));
    }
  }
}

TEST_CASE("ANSI codes") {
  RenderOptions ansi;
  ansi.ansi = true;
  TraceLine l = render(parse_expr("1 + 2 * 3"), nullptr, ansi);
  l.redex_span = {4, 9};
  l.arrow = "=> ";
  CHECK(format_line(l, 0, {}, ansi) == "=> 1 + \x1b[4m2 * 3\x1b[24m");
  CHECK(format_line(l, 0, {{3, 4}}, ansi) == "=> \x1b[7m1\x1b[27m + \x1b[4m2 * 3\x1b[24m");
}

TEST_CASE("gutters pad to a common width") {
  TraceLine l;
  l.text = "x + y";
  l.arrow = "=> ";
  l.gutter = "x = 1";
  CHECK(plain_line(l, 8) == "x = 1   => x + y");
  l.gutter.clear();
  CHECK(plain_line(l, 8) == "        => x + y");
  CHECK(plain_line(l, 0) == "=> x + y");
}

TEST_CASE("wrapping") {
  RenderOptions opts;
  opts.width = 20;
  TraceLine l;
  l.text = "[f (1 + 2); 4 + 5; 2 * 3]";
  const std::string out = format_line(l, 0, {}, opts);
  CHECK(out.find('\n') != std::string::npos);
  std::istringstream in(out);
  std::string first, rest, joined;
  std::getline(in, first);
  CHECK(first.size() <= 20);
  std::getline(in, rest);
  CHECK(rest.rfind("      ", 0) == 0);
  CHECK(first + " " + rest.substr(6) == l.text);
}

TEST_CASE("printing round trips") {
  for (const char* src :
       {"let rec f x = if x = 0 then 1 else x * f (x - 1) in f 3", "fun (a, b) -> a :: b",
        "match l with [] -> 0 | x :: _ when x > 0 -> x | _ -> -1",
        "try f () with Not_found -> 0 | Failure s -> 1", "(if a then b else c) + 1",
        "f (fun x -> x) (let y = 1 in y)", "a; b; c", "x := !x + 1; !x",
        "(1, 2) :: [(3, 4)]", "Some (1, 2)", "[[1]; []]", "a || b && c", "(a || b) && c",
        "1 - (2 - 3)", "1 - 2 - 3", "(1 :: []) @ [2]", "f x y z", "f (g x) y",
        "for i = 1 to 3 do print_int i done", "while !r > 0 do r := !r - 1 done", "-1 + 2"}) {
    CAPTURE(src);
    const std::string once = render_plain(parse_expr(src));
    CHECK(render_plain(parse_expr(once)) == once);
  }
}
