#include <doctest.h>

#include <sstream>

#include "stepml/search.hpp"
#include "stepml/syntax.hpp"
#include "support/properties.hpp"

using namespace stepml;

namespace {

const char* kMap = "map (fun x -> x + 1) [1; 2; 3]";

// Runs `src` with every state shown through a filter built from `spec`.
std::vector<FilteredLine> filtered(const std::string& src, const SearchSpec& spec,
                                   RenderOptions opts = {}, bool* stopped = nullptr) {
  opts.show_all = true;
  std::ostringstream out;
  auto engine = props::make_engine(out);
  std::vector<FilteredLine> lines;
  SearchFilter filter(spec, [&](const FilteredLine& l) { lines.push_back(l); });
  TraceResult r = emit_trace(*engine, parse_program(src), opts, filter);
  if (stopped) *stopped = r.stopped;
  return lines;
}

std::vector<std::string> texts(const std::vector<FilteredLine>& lines) {
  std::vector<std::string> out;
  for (const auto& l : lines) out.push_back(l.line.text);
  return out;
}

std::vector<std::string> full(const std::string& src) { return texts(filtered(src, {})); }

}  // namespace

TEST_CASE("pattern examples") {
  const CompiledPattern three = compile_pattern("[_; _; _]");
  CHECK(three.matches("[1; 2; 3]"));
  CHECK(three.matches("[2; 3; 4]"));
  CHECK_FALSE(three.matches("[1; 2]"));
  CHECK_FALSE(three.matches("[1; 2; 3; 4]"));

  CHECK(compile_pattern("4::").matches("2::3::let l = [] in 4::map f l"));
  CHECK(compile_pattern("1+2").matches("1 + 2"));
  CHECK(compile_pattern("1 + 2").matches("x+1+2"));
  CHECK_FALSE(compile_pattern("x").matches("xs"));
  CHECK(compile_pattern("f _").matches("f (g x)") == true);
  CHECK_THROWS_AS(compile_pattern("\"unterminated"), PatternError);
}

TEST_CASE("match positions") {
  const auto spans = compile_pattern("1 + 2").find_all("1 + 2 + (1+2)");
  REQUIRE(spans.size() == 2);
  CHECK(spans[0] == Span{0, 5});
  CHECK(spans[1] == Span{9, 12});

  const auto np = compile_pattern("f x", {true, false}).find_all("g (f (x))");
  REQUIRE(np.size() == 1);
  CHECK(np[0].begin == 3);
  CHECK(np[0].end == 7);  // the closing parens are not part of the match
}

TEST_CASE("raw regular expressions") {
  const CompiledPattern p = compile_pattern("[0-9]+ \\* [0-9]+", {false, true});
  CHECK(p.matches("1 + 2 * 3"));
  CHECK_FALSE(p.matches("1 + 2"));
  CHECK_THROWS_AS(compile_pattern("(", {false, true}), PatternError);
}

TEST_CASE("no-parens matches iff the paren-free line matches") {
  const CompiledPattern p = compile_pattern("fun x -> x + 1", {true, false});
  const CompiledPattern strict = compile_pattern("fun x -> x + 1");
  for (const std::string line :
       {"(fun x -> (x + 1)) 2", "fun x -> x + 1", "((fun x -> x) + 1)", "fun y -> y + 1"}) {
    std::string stripped;
    for (char c : line)
      if (c != '(' && c != ')') stripped += c;
    CAPTURE(line);
    CHECK(p.matches(line) == strict.matches(stripped));
  }
}

TEST_CASE("search keeps matching lines and the final value") {
  SearchSpec spec;
  spec.search = {"[_; _; _]"};
  const auto got = texts(filtered(kMap, spec));
  std::vector<std::string> expected;
  const CompiledPattern three = compile_pattern("[_; _; _]");
  for (const auto& l : full(kMap))
    if (three.matches(l)) expected.push_back(l);
  CHECK(got == expected);
  REQUIRE_FALSE(got.empty());
  CHECK(got.back() == "[2; 3; 4]");
}

TEST_CASE("inverted search is the complement") {
  SearchSpec spec;
  spec.search = {"[_; _; _]"};
  spec.invert_search = true;
  const auto inverted = texts(filtered(kMap, spec));
  spec.invert_search = false;
  const auto normal = texts(filtered(kMap, spec));
  CHECK(inverted.size() + normal.size() == full(kMap).size());

  SearchSpec nothing;
  nothing.search = {"no_such_token"};
  nothing.invert_search = true;
  CHECK(texts(filtered(kMap, nothing)) == full(kMap));
}

TEST_CASE("after and until windows") {
  const std::string src = "1 + 2 + 3 + 4 + 5";
  const auto all = full(src);  // 1 + 2 + 3 + 4 + 5, 3 + 3 + 4 + 5, 6 + 4 + 5, 10 + 5, 15
  REQUIRE(all.size() == 5);
  SearchSpec spec;
  spec.after = {"3 + 3"};
  spec.until = {"10"};
  CHECK(texts(filtered(src, spec)) == std::vector<std::string>(all.begin() + 1, all.begin() + 4));

  SearchSpec after_only;
  after_only.after = {"6"};
  CHECK(texts(filtered(src, after_only)) == std::vector<std::string>(all.begin() + 2, all.end()));

  SearchSpec until_only;
  until_only.until = {"6"};
  CHECK(texts(filtered(src, until_only)) == std::vector<std::string>(all.begin(), all.begin() + 3));

  SearchSpec inverted;
  inverted.after = {"1 + 2"};
  inverted.invert_after = true;
  CHECK(texts(filtered(src, inverted)) == std::vector<std::string>(all.begin() + 1, all.end()));
}

TEST_CASE("repeat reopens windows") {
  const std::string src = "(1 + 2) * (3 + 4) + (5 + 6)";
  const auto all = full(src);
  SearchSpec once;
  once.after = {"+"};
  once.until = {"*"};
  SearchSpec again = once;
  again.repeat = true;
  CHECK(texts(filtered(src, again)).size() >= texts(filtered(src, once)).size());

  // Windows that open on every step keep everything with repeat on.
  SearchSpec every;
  every.after = {"_"};
  every.until = {"_"};
  every.repeat = true;
  CHECK(texts(filtered(src, every)) == all);
  every.repeat = false;
  CHECK(texts(filtered(src, every)).size() == 1);
}

TEST_CASE("result limits") {
  SearchSpec spec;
  spec.search = {"_"};
  spec.n = 2;
  CHECK(filtered(kMap, spec).size() == 2);
  spec.n = 0;
  CHECK(filtered(kMap, spec).empty());
  spec.n = 1000;
  CHECK(texts(filtered(kMap, spec)) == full(kMap));
}

TEST_CASE("stop halts evaluation") {
  SearchSpec spec;
  spec.search = {"print_int"};
  spec.n = 1;
  spec.stop = true;
  bool stopped = false;
  const auto lines =
      filtered("print_int 1; print_int 2; print_int 3", spec, RenderOptions{}, &stopped);
  CHECK(lines.size() == 1);
  CHECK(stopped);
}

TEST_CASE("upto adds preceding context") {
  SearchSpec spec;
  spec.search = {"[2; 3; 4]"};
  spec.upto = 2;
  const auto lines = filtered(kMap, spec);
  const auto all = full(kMap);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0].context);
  CHECK(lines[1].context);
  CHECK_FALSE(lines[2].context);
  CHECK(texts(lines) == std::vector<std::string>(all.end() - 3, all.end()));
}

TEST_CASE("highlights cover every occurrence") {
  SearchSpec spec;
  spec.search = {"1"};
  spec.highlight = true;
  const auto lines = filtered("1 + (1 + 1)", spec);
  REQUIRE_FALSE(lines.empty());
  CHECK(lines[0].highlights.size() == 3);
  for (const auto& h : lines[0].highlights)
    CHECK(plain_line(lines[0].line, lines[0].gutter_width).substr(h.begin, h.end - h.begin) == "1");
}

TEST_CASE("any-step windows see elided states") {
  const std::string src = "1 * (2 * (3 * 4))";
  // "2 * 12" is elided by default, so a plain -after never opens.
  std::ostringstream out;
  auto run = [&](const SearchSpec& spec) {
    auto engine = props::make_engine(out);
    std::vector<std::string> lines;
    SearchFilter f(spec, [&](const FilteredLine& l) { lines.push_back(l.line.text); });
    emit_trace(*engine, parse_program(src), RenderOptions{}, f);
    return lines;
  };
  SearchSpec printed;
  printed.after = {"2 * 12"};
  CHECK(run(printed).empty());
  SearchSpec any;
  any.after_any = {"2 * 12"};
  CHECK(run(any) == std::vector<std::string>{"24"});
  SearchSpec until_any;
  until_any.until_any = {"2 * 12"};
  CHECK(run(until_any) == std::vector<std::string>{"1 * (2 * (3 * 4))"});
}
