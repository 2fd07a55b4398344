#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace stepml {

struct Expr;
struct Pattern;
struct EnvNode;
class Engine;

using ExprPtr = std::shared_ptr<const Expr>;
using PatternPtr = std::shared_ptr<const Pattern>;

// ---------------------------------------------------------------------------
// Patterns
// ---------------------------------------------------------------------------

struct PAny {};
struct PVar { std::string name; };
struct PInt { std::int64_t value; };
struct PBool { bool value; };
struct PString { std::string value; };
struct PUnit {};
struct PNil {};
struct PTuple { std::vector<PatternPtr> items; };
struct PCons { PatternPtr head, tail; };
struct PConstr { std::string tag; PatternPtr payload; };  // payload may be null
struct POr { PatternPtr left, right; };

struct Pattern {
  std::variant<PAny, PVar, PInt, PBool, PString, PUnit, PNil, PTuple, PCons,
               PConstr, POr>
      node;
};

template <typename T>
PatternPtr make_pattern(T node) {
  return std::make_shared<const Pattern>(Pattern{std::move(node)});
}

/// Names bound by a pattern, left to right.
std::vector<std::string> pattern_vars(const Pattern& p);

// ---------------------------------------------------------------------------
// Expressions
// ---------------------------------------------------------------------------

enum class ArithOp { Add, Sub, Mul, Div, Mod, FAdd, FSub, FMul, FDiv, Concat };
enum class CmpOp { Eq, Ne, Lt, Gt, Le, Ge };
enum class ForDirection { Up, Down };

struct Binding {
  PatternPtr pattern;
  ExprPtr expr;
};

struct Case {
  PatternPtr pattern;
  ExprPtr guard;  // null when absent
  ExprPtr body;
};

/// Host function behind a builtin. Receives exactly `arity` value arguments.
using BuiltinFn = std::function<ExprPtr(Engine&, const std::vector<ExprPtr>&)>;

/// The single mutable position in a tree. Shared by every copy of an
/// allocated record, which is what gives references their identity.
struct Cell {
  ExprPtr value;
};

struct Field {
  std::string name;
  std::shared_ptr<Cell> cell;
};

struct Unit {};
struct Int { std::int64_t value; };
struct Bool { bool value; };
struct Float { double value; };
struct String { std::string value; };
struct Var { std::string name; };
struct Op { ArithOp op; ExprPtr lhs, rhs; };
struct Cmp { CmpOp op; ExprPtr lhs, rhs; };
struct And { ExprPtr lhs, rhs; };
struct Or { ExprPtr lhs, rhs; };
struct If { ExprPtr cond, then_branch, else_branch; };  // else may be null
struct Let { bool recursive; std::vector<Binding> bindings; ExprPtr body; };
struct LetDef { bool recursive; std::vector<Binding> bindings; };

// `curried_tail` marks the inner functions of `fun x y -> ...` so the group
// prints as one multi-parameter function. `env` is non-null for closures
// defined at top level or in a module; local closures are closed
// syntactically. `display_name` is set when the value came from looking up
// a recursive or global name, and makes it print as that name.
struct Fun {
  PatternPtr param;
  ExprPtr body;
  const EnvNode* env = nullptr;
  bool curried_tail = false;
  std::string display_name;
};

struct Function {
  std::vector<Case> cases;
  const EnvNode* env = nullptr;
  std::string display_name;
};

struct App { ExprPtr fn, arg; };
struct Seq { ExprPtr first, second; };
struct While { ExprPtr cond, body, cond_copy, body_copy; };
struct For {
  std::string var;
  ExprPtr from;
  ForDirection direction;
  ExprPtr to;
  ExprPtr body;
  ExprPtr body_copy;
};

// A record literal is unallocated until all its fields are values; the
// allocation step gives it fresh cells.
struct Record {
  std::vector<Field> fields;
  bool allocated = false;
};

struct FieldGet { ExprPtr record; std::string field; };
struct FieldSet { ExprPtr record; std::string field; ExprPtr value; };
struct Tuple { std::vector<ExprPtr> items; };
struct Cons { ExprPtr head, tail; };
struct Nil {};
struct Constr { std::string tag; ExprPtr payload; };  // payload may be null
struct Raise { std::string name; ExprPtr payload; };  // payload may be null
struct Match { ExprPtr scrutinee; std::vector<Case> cases; };
struct TryWith { ExprPtr body; std::vector<Case> cases; };
struct ExceptionDef { std::string name; int arity; std::string payload_type; };

struct TypeConstructor {
  std::string name;
  std::string payload_type;  // empty for constant constructors
};
struct TypeDef {
  std::string params;  // e.g. "'a " including trailing space, or empty
  std::string name;
  std::vector<TypeConstructor> constructors;
  std::string manifest;  // record or alias body when there are no constructors
};

struct CallBuiltIn {
  std::string display;
  std::vector<ExprPtr> args;
  BuiltinFn fn;
};

struct Struct { std::string name; std::vector<ExprPtr> items; };

/// Evaluates `body` under a captured global environment instead of the
/// surrounding one. Produced when a top-level closure is applied; prints
/// transparently.
struct Scope {
  const EnvNode* env;
  ExprPtr body;
};

struct Expr {
  std::variant<Unit, Int, Bool, Float, String, Var, Op, Cmp, And, Or, If, Let,
               LetDef, Fun, Function, App, Seq, While, For, Record, FieldGet,
               FieldSet, Tuple, Cons, Nil, Constr, Raise, Match, TryWith,
               ExceptionDef, TypeDef, CallBuiltIn, Struct, Scope>
      node;
};

template <typename T>
ExprPtr make(T node) {
  return std::make_shared<const Expr>(Expr{std::move(node)});
}

template <typename T>
const T* as(const Expr& e) {
  return std::get_if<T>(&e.node);
}
template <typename T>
const T* as(const ExprPtr& e) {
  return e ? std::get_if<T>(&e->node) : nullptr;
}
template <typename T>
bool is(const ExprPtr& e) {
  return e && std::holds_alternative<T>(e->node);
}

inline ExprPtr unit_value() { return make(Unit{}); }
inline ExprPtr int_value(std::int64_t v) { return make(Int{v}); }
inline ExprPtr bool_value(bool v) { return make(Bool{v}); }
inline ExprPtr string_value(std::string v) { return make(String{std::move(v)}); }
ExprPtr list_value(const std::vector<ExprPtr>& items);

/// Structural equality. Ignores captured environments, display names,
/// allocation state and record identity.
bool structurally_equal(const Expr& a, const Expr& b);
bool structurally_equal(const Pattern& a, const Pattern& b);

/// Free variables of an expression. Closures with a captured environment
/// and Scope nodes are treated as closed.
std::set<std::string> free_vars(const Expr& e);

/// True if `name` occurs free in `e`.
bool mentions(const Expr& e, const std::string& name);

const char* arith_symbol(ArithOp op);
const char* cmp_symbol(CmpOp op);

/// True for names the builtin bridge introduces (never written in source).
inline bool is_internal_name(const std::string& name) {
  return !name.empty() && name[0] == '*';
}

}  // namespace stepml
