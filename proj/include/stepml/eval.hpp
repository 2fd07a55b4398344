#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stepml/expr.hpp"

namespace stepml {

enum class LastOp { Arith, Boolean, Comparison, IfBool, InsideBuiltIn, VarLookup, Other };

const char* to_string(LastOp op);

/// One global binding. Nodes form a persistent list; closures defined at
/// top level point at the node list that was current when they were made.
struct EnvNode {
  std::string name;
  ExprPtr value;
  const EnvNode* next = nullptr;
};

/// Ill-typed programs and engine misuse. In-language exceptions never use this.
class RuntimeError : public std::runtime_error {
 public:
  explicit RuntimeError(const std::string& message) : std::runtime_error(message) {}
};

class StepBudgetExceeded : public std::runtime_error {
 public:
  explicit StepBudgetExceeded(std::uint64_t n)
      : std::runtime_error("step budget of " + std::to_string(n) + " exceeded"),
        steps(n) {}
  std::uint64_t steps;
};

class DuplicateKey : public std::runtime_error {
 public:
  explicit DuplicateKey(const std::string& key)
      : std::runtime_error("builtin already registered: " + key) {}
};

/// Thrown by builtin host functions to raise an in-language exception.
struct HostException {
  std::string name;
  ExprPtr payload;
};

struct StepOutcome {
  enum class Kind { Next, AlreadyValue, Uncaught };
  Kind kind = Kind::AlreadyValue;
  ExprPtr expr;  // Next: the new state
  LastOp op = LastOp::Other;
  std::string exception;  // Uncaught: exception name
  ExprPtr payload;        // Uncaught: payload value or null

  bool is_next() const { return kind == Kind::Next; }
};

using Bindings = std::vector<std::pair<std::string, ExprPtr>>;

struct MatchResult {
  bool matched = false;
  ExprPtr body;  // with the pattern bindings as enclosing lets
};

/// Child index path from the root to a redex.
using Path = std::vector<int>;

struct PeekResult {
  LastOp op = LastOp::Other;
  Path path;
};

struct RunResult {
  ExprPtr value;  // null when an exception escaped
  std::string exception;
  ExprPtr payload;
  bool uncaught() const { return value == nullptr; }
};

struct EngineOptions {
  bool fast_curry = false;
  std::uint64_t step_budget = 10'000'000;
  std::ostream* out = nullptr;  // program output; defaults to std::cout
};

struct BuiltinEntry {
  std::string key;
  int arity;
  std::string display;
  BuiltinFn fn;
  ExprPtr value;  // the curried wrapper
};

bool is_value(const ExprPtr& e);

std::optional<Bindings> match_pattern(const Pattern& p, const ExprPtr& v);

MatchResult eval_match_exception(const std::string& name, const ExprPtr& payload,
                                 const std::vector<Case>& cases);

/// Wraps `body` in one non-recursive let per binding, outermost first.
ExprPtr wrap_lets(const Bindings& bindings, ExprPtr body);

/// Turns a saturated application of a multi-parameter function, all of whose
/// arguments are values, into nested lets. Anything else is returned as is.
ExprPtr apply_fast_curry(const ExprPtr& e);

class Engine {
 public:
  explicit Engine(EngineOptions options = {});
  ~Engine();
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  const EngineOptions& options() const { return options_; }
  void set_fast_curry(bool on) { options_.fast_curry = on; }
  void set_step_budget(std::uint64_t n) { options_.step_budget = n; }
  std::ostream& out();

  // Builtin registry ---------------------------------------------------------
  void register_builtin(const std::string& key, int arity, const std::string& display,
                        BuiltinFn fn);
  const BuiltinEntry* builtin(const std::string& key) const;

  // Global environment -------------------------------------------------------
  const EnvNode* globals() const { return globals_; }
  void define_global(const std::string& name, ExprPtr value);
  std::optional<ExprPtr> lookup_global(const std::string& name) const;

  // Stepping -----------------------------------------------------------------
  StepOutcome step(const ExprPtr& e);
  /// Classifies the next reduction without performing it.
  LastOp peek(const ExprPtr& e);
  /// Classification plus the location of the redex; nullopt for values.
  std::optional<PeekResult> locate(const ExprPtr& e);

  /// Adds a finished structure item (LetDef with value right-hand sides,
  /// ExceptionDef, TypeDef) to the global environment. Returns an
  /// exception name when a top-level pattern fails to match.
  std::optional<std::string> install(const ExprPtr& item);

  RunResult run_to_value(ExprPtr e);
  /// Evaluates every item in order; the result holds the last item's final form.
  RunResult run_program(const std::vector<ExprPtr>& items);
  /// Runs a module's items silently and exports `name.x` for each binding.
  void load_module(const std::string& name, const std::vector<ExprPtr>& items);

  std::uint64_t steps_taken() const { return steps_; }
  void count_step();

  /// Allocates an environment node owned by this engine.
  const EnvNode* extend(const EnvNode* env, std::string name, ExprPtr value);
  EnvNode* extend_mutable(const EnvNode* env, std::string name);

 private:
  friend class Stepper;

  EngineOptions options_;
  std::vector<std::unique_ptr<EnvNode>> arena_;
  const EnvNode* globals_ = nullptr;
  std::map<std::string, BuiltinEntry> builtins_;
  std::uint64_t steps_ = 0;
};

/// Convenience wrapper matching the single-step operation.
inline StepOutcome eval_step(Engine& engine, const ExprPtr& e) { return engine.step(e); }

}  // namespace stepml
