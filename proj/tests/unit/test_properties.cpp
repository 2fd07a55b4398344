#include <doctest.h>

#include <set>

#include "stepml/syntax.hpp"
#include "support/oracle.hpp"
#include "support/properties.hpp"

TEST_CASE("the generator produces varied programs") {
  oracle::Generator gen(5);
  int values = 0;
  int exceptions = 0;
  std::set<std::string> distinct;
  for (int i = 0; i < 200; ++i) {
    const std::string src = gen.program(1 + i % 6);
    distinct.insert(src);
    const auto o = oracle::evaluate(stepml::parse_program(src).at(0));
    (o.exception.empty() ? values : exceptions) += 1;
  }
  CHECK(distinct.size() > 150);
  CHECK(values > 150);
}

TEST_CASE("the oracle agrees with hand-computed results") {
  auto eval = [](const std::string& src) {
    const auto o = oracle::evaluate(stepml::parse_expr(src));
    return o.exception.empty() ? o.value : "exn " + o.exception;
  };
  CHECK(eval("1 + 2 * 3") == "7");
  CHECK(eval("let rec f n = if n = 0 then 1 else n * f (n - 1) in f 5") == "120");
  CHECK(eval("map (fun x -> x * x) [1; 2; 3]") == "[1; 4; 9]");
  CHECK(eval("try 1 / 0 with Division_by_zero -> 7") == "7");
  CHECK(eval("10 mod 0") == "exn Division_by_zero");
  CHECK(eval("match [] with x :: _ -> x") == "exn Match_failure");
}

TEST_CASE("property suites on other seeds") {
  const auto oracle = props::oracle_agreement(150, 6, 99);
  CHECK_MESSAGE(oracle.ok, oracle.detail);
  const auto cons = props::elision_conservativity(40, 3);
  CHECK_MESSAGE(cons.ok, cons.detail);
  const auto rt = props::round_trip(40, 4);
  CHECK_MESSAGE(rt.ok, rt.detail);
  const auto purity = props::peek_purity();
  CHECK_MESSAGE(purity.ok, purity.detail);
}
