#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "stepml/expr.hpp"

namespace oracle {

/// Outcome of the big-step reference evaluator: either a printed value or
/// the name of an escaping exception.
struct Outcome {
  std::string value;
  std::string exception;
  bool operator==(const Outcome&) const = default;
};

/// Evaluates a parsed expression with an environment-passing big-step
/// interpreter that shares no code with the stepper. Knows the handful of
/// library functions the generator uses (map, length, @, not, fst, snd).
Outcome evaluate(const stepml::ExprPtr& e);

/// Random closed integer programs of bounded depth, as source text.
class Generator {
 public:
  explicit Generator(std::uint32_t seed) : rng_(seed) {}
  std::string program(int depth);

 private:
  std::string int_expr(int depth);
  std::string bool_expr(int depth);
  std::string list_expr(int depth);
  int pick(int n);
  std::string fresh();
  std::string int_var();

  std::mt19937 rng_;
  std::vector<std::string> ints_;
  std::vector<std::string> lists_;
  int counter_ = 0;
};

}  // namespace oracle
