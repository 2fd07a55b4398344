#include "stepml/expr.hpp"

#include <algorithm>
#include <type_traits>

namespace stepml {

namespace {

void collect_pattern_vars(const Pattern& p, std::vector<std::string>& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, PVar>) {
          out.push_back(n.name);
        } else if constexpr (std::is_same_v<T, PTuple>) {
          for (const auto& item : n.items) collect_pattern_vars(*item, out);
        } else if constexpr (std::is_same_v<T, PCons>) {
          collect_pattern_vars(*n.head, out);
          collect_pattern_vars(*n.tail, out);
        } else if constexpr (std::is_same_v<T, PConstr>) {
          if (n.payload) collect_pattern_vars(*n.payload, out);
        } else if constexpr (std::is_same_v<T, POr>) {
          collect_pattern_vars(*n.left, out);
        }
      },
      p.node);
}

// Walks free occurrences of variables. The visitor returns true to stop.
class FreeWalker {
 public:
  explicit FreeWalker(std::function<bool(const std::string&)> visit)
      : visit_(std::move(visit)) {}

  bool walk(const ExprPtr& e) { return e && walk(*e); }

  bool walk(const Expr& e) {
    return std::visit([&](const auto& n) { return walk_node(n); }, e.node);
  }

 private:
  bool bound(const std::string& name) const {
    return std::find(bound_.begin(), bound_.end(), name) != bound_.end();
  }

  template <typename F>
  bool with_bound(const std::vector<std::string>& names, F&& body) {
    const auto mark = bound_.size();
    bound_.insert(bound_.end(), names.begin(), names.end());
    const bool stop = body();
    bound_.resize(mark);
    return stop;
  }

  bool walk_case(const Case& c) {
    return with_bound(pattern_vars(*c.pattern),
                      [&] { return walk(c.guard) || walk(c.body); });
  }

  bool walk_node(const Var& n) { return !bound(n.name) && visit_(n.name); }
  bool walk_node(const Op& n) { return walk(n.lhs) || walk(n.rhs); }
  bool walk_node(const Cmp& n) { return walk(n.lhs) || walk(n.rhs); }
  bool walk_node(const And& n) { return walk(n.lhs) || walk(n.rhs); }
  bool walk_node(const Or& n) { return walk(n.lhs) || walk(n.rhs); }
  bool walk_node(const If& n) {
    return walk(n.cond) || walk(n.then_branch) || walk(n.else_branch);
  }
  bool walk_bindings(bool recursive, const std::vector<Binding>& bindings,
                     const ExprPtr& body) {
    std::vector<std::string> names;
    for (const auto& b : bindings) collect_pattern_vars(*b.pattern, names);
    if (!recursive) {
      for (const auto& b : bindings)
        if (walk(b.expr)) return true;
      return with_bound(names, [&] { return walk(body); });
    }
    return with_bound(names, [&] {
      for (const auto& b : bindings)
        if (walk(b.expr)) return true;
      return walk(body);
    });
  }
  bool walk_node(const Let& n) {
    return walk_bindings(n.recursive, n.bindings, n.body);
  }
  bool walk_node(const LetDef& n) {
    return walk_bindings(n.recursive, n.bindings, nullptr);
  }
  bool walk_node(const Fun& n) {
    if (n.env) return false;
    return with_bound(pattern_vars(*n.param), [&] { return walk(n.body); });
  }
  bool walk_node(const Function& n) {
    if (n.env) return false;
    for (const auto& c : n.cases)
      if (walk_case(c)) return true;
    return false;
  }
  bool walk_node(const App& n) { return walk(n.fn) || walk(n.arg); }
  bool walk_node(const Seq& n) { return walk(n.first) || walk(n.second); }
  bool walk_node(const While& n) {
    return walk(n.cond) || walk(n.body) || walk(n.cond_copy) ||
           walk(n.body_copy);
  }
  bool walk_node(const For& n) {
    if (walk(n.from) || walk(n.to)) return true;
    return with_bound({n.var},
                      [&] { return walk(n.body) || walk(n.body_copy); });
  }
  bool walk_node(const Record& n) {
    for (const auto& f : n.fields)
      if (walk(f.cell->value)) return true;
    return false;
  }
  bool walk_node(const FieldGet& n) { return walk(n.record); }
  bool walk_node(const FieldSet& n) {
    return walk(n.record) || walk(n.value);
  }
  bool walk_node(const Tuple& n) {
    for (const auto& item : n.items)
      if (walk(item)) return true;
    return false;
  }
  bool walk_node(const Cons& n) { return walk(n.head) || walk(n.tail); }
  bool walk_node(const Constr& n) { return walk(n.payload); }
  bool walk_node(const Raise& n) { return walk(n.payload); }
  bool walk_node(const Match& n) {
    if (walk(n.scrutinee)) return true;
    for (const auto& c : n.cases)
      if (walk_case(c)) return true;
    return false;
  }
  bool walk_node(const TryWith& n) {
    if (walk(n.body)) return true;
    for (const auto& c : n.cases)
      if (walk_case(c)) return true;
    return false;
  }
  bool walk_node(const CallBuiltIn& n) {
    for (const auto& a : n.args)
      if (walk(a)) return true;
    return false;
  }
  template <typename T>
  bool walk_node(const T&) {
    return false;  // literals, definitions, Scope, Struct
  }

  std::function<bool(const std::string&)> visit_;
  std::vector<std::string> bound_;
};

bool equal_ptr(const ExprPtr& a, const ExprPtr& b) {
  if (!a || !b) return !a && !b;
  return structurally_equal(*a, *b);
}

bool equal_pattern_ptr(const PatternPtr& a, const PatternPtr& b) {
  if (!a || !b) return !a && !b;
  return structurally_equal(*a, *b);
}

bool equal_cases(const std::vector<Case>& a, const std::vector<Case>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!equal_pattern_ptr(a[i].pattern, b[i].pattern) ||
        !equal_ptr(a[i].guard, b[i].guard) || !equal_ptr(a[i].body, b[i].body))
      return false;
  }
  return true;
}

bool equal_bindings(const std::vector<Binding>& a,
                    const std::vector<Binding>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!equal_pattern_ptr(a[i].pattern, b[i].pattern) ||
        !equal_ptr(a[i].expr, b[i].expr))
      return false;
  }
  return true;
}

bool equal_lists(const std::vector<ExprPtr>& a, const std::vector<ExprPtr>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!equal_ptr(a[i], b[i])) return false;
  return true;
}

struct EqualVisitor {
  const Expr& other;

  template <typename T>
  bool operator()(const T& a) const {
    const T* b = std::get_if<T>(&other.node);
    return b && same(a, *b);
  }

  static bool same(const Unit&, const Unit&) { return true; }
  static bool same(const Nil&, const Nil&) { return true; }
  static bool same(const Int& a, const Int& b) { return a.value == b.value; }
  static bool same(const Bool& a, const Bool& b) { return a.value == b.value; }
  static bool same(const Float& a, const Float& b) {
    return a.value == b.value || (a.value != a.value && b.value != b.value);
  }
  static bool same(const String& a, const String& b) {
    return a.value == b.value;
  }
  static bool same(const Var& a, const Var& b) { return a.name == b.name; }
  static bool same(const Op& a, const Op& b) {
    return a.op == b.op && equal_ptr(a.lhs, b.lhs) && equal_ptr(a.rhs, b.rhs);
  }
  static bool same(const Cmp& a, const Cmp& b) {
    return a.op == b.op && equal_ptr(a.lhs, b.lhs) && equal_ptr(a.rhs, b.rhs);
  }
  static bool same(const And& a, const And& b) {
    return equal_ptr(a.lhs, b.lhs) && equal_ptr(a.rhs, b.rhs);
  }
  static bool same(const Or& a, const Or& b) {
    return equal_ptr(a.lhs, b.lhs) && equal_ptr(a.rhs, b.rhs);
  }
  static bool same(const If& a, const If& b) {
    return equal_ptr(a.cond, b.cond) && equal_ptr(a.then_branch, b.then_branch) &&
           equal_ptr(a.else_branch, b.else_branch);
  }
  static bool same(const Let& a, const Let& b) {
    return a.recursive == b.recursive && equal_bindings(a.bindings, b.bindings) &&
           equal_ptr(a.body, b.body);
  }
  static bool same(const LetDef& a, const LetDef& b) {
    return a.recursive == b.recursive && equal_bindings(a.bindings, b.bindings);
  }
  static bool same(const Fun& a, const Fun& b) {
    return a.curried_tail == b.curried_tail &&
           equal_pattern_ptr(a.param, b.param) && equal_ptr(a.body, b.body);
  }
  static bool same(const Function& a, const Function& b) {
    return equal_cases(a.cases, b.cases);
  }
  static bool same(const App& a, const App& b) {
    return equal_ptr(a.fn, b.fn) && equal_ptr(a.arg, b.arg);
  }
  static bool same(const Seq& a, const Seq& b) {
    return equal_ptr(a.first, b.first) && equal_ptr(a.second, b.second);
  }
  static bool same(const While& a, const While& b) {
    return equal_ptr(a.cond, b.cond) && equal_ptr(a.body, b.body) &&
           equal_ptr(a.cond_copy, b.cond_copy) &&
           equal_ptr(a.body_copy, b.body_copy);
  }
  static bool same(const For& a, const For& b) {
    return a.var == b.var && a.direction == b.direction &&
           equal_ptr(a.from, b.from) && equal_ptr(a.to, b.to) &&
           equal_ptr(a.body, b.body) && equal_ptr(a.body_copy, b.body_copy);
  }
  static bool same(const Record& a, const Record& b) {
    if (a.fields.size() != b.fields.size()) return false;
    for (std::size_t i = 0; i < a.fields.size(); ++i) {
      if (a.fields[i].name != b.fields[i].name ||
          !equal_ptr(a.fields[i].cell->value, b.fields[i].cell->value))
        return false;
    }
    return true;
  }
  static bool same(const FieldGet& a, const FieldGet& b) {
    return a.field == b.field && equal_ptr(a.record, b.record);
  }
  static bool same(const FieldSet& a, const FieldSet& b) {
    return a.field == b.field && equal_ptr(a.record, b.record) &&
           equal_ptr(a.value, b.value);
  }
  static bool same(const Tuple& a, const Tuple& b) {
    return equal_lists(a.items, b.items);
  }
  static bool same(const Cons& a, const Cons& b) {
    return equal_ptr(a.head, b.head) && equal_ptr(a.tail, b.tail);
  }
  static bool same(const Constr& a, const Constr& b) {
    return a.tag == b.tag && equal_ptr(a.payload, b.payload);
  }
  static bool same(const Raise& a, const Raise& b) {
    return a.name == b.name && equal_ptr(a.payload, b.payload);
  }
  static bool same(const Match& a, const Match& b) {
    return equal_ptr(a.scrutinee, b.scrutinee) && equal_cases(a.cases, b.cases);
  }
  static bool same(const TryWith& a, const TryWith& b) {
    return equal_ptr(a.body, b.body) && equal_cases(a.cases, b.cases);
  }
  static bool same(const ExceptionDef& a, const ExceptionDef& b) {
    return a.name == b.name && a.arity == b.arity;
  }
  static bool same(const TypeDef& a, const TypeDef& b) {
    if (a.name != b.name || a.constructors.size() != b.constructors.size())
      return false;
    for (std::size_t i = 0; i < a.constructors.size(); ++i)
      if (a.constructors[i].name != b.constructors[i].name) return false;
    return true;
  }
  static bool same(const CallBuiltIn& a, const CallBuiltIn& b) {
    return a.display == b.display && equal_lists(a.args, b.args);
  }
  static bool same(const Struct& a, const Struct& b) {
    return a.name == b.name && equal_lists(a.items, b.items);
  }
  static bool same(const Scope& a, const Scope& b) {
    return equal_ptr(a.body, b.body);
  }
};

struct PatternEqualVisitor {
  const Pattern& other;

  template <typename T>
  bool operator()(const T& a) const {
    const T* b = std::get_if<T>(&other.node);
    return b && same(a, *b);
  }
  static bool same(const PAny&, const PAny&) { return true; }
  static bool same(const PUnit&, const PUnit&) { return true; }
  static bool same(const PNil&, const PNil&) { return true; }
  static bool same(const PVar& a, const PVar& b) { return a.name == b.name; }
  static bool same(const PInt& a, const PInt& b) { return a.value == b.value; }
  static bool same(const PBool& a, const PBool& b) { return a.value == b.value; }
  static bool same(const PString& a, const PString& b) {
    return a.value == b.value;
  }
  static bool same(const PTuple& a, const PTuple& b) {
    if (a.items.size() != b.items.size()) return false;
    for (std::size_t i = 0; i < a.items.size(); ++i)
      if (!equal_pattern_ptr(a.items[i], b.items[i])) return false;
    return true;
  }
  static bool same(const PCons& a, const PCons& b) {
    return equal_pattern_ptr(a.head, b.head) && equal_pattern_ptr(a.tail, b.tail);
  }
  static bool same(const PConstr& a, const PConstr& b) {
    return a.tag == b.tag && equal_pattern_ptr(a.payload, b.payload);
  }
  static bool same(const POr& a, const POr& b) {
    return equal_pattern_ptr(a.left, b.left) &&
           equal_pattern_ptr(a.right, b.right);
  }
};

}  // namespace

std::vector<std::string> pattern_vars(const Pattern& p) {
  std::vector<std::string> out;
  collect_pattern_vars(p, out);
  return out;
}

ExprPtr list_value(const std::vector<ExprPtr>& items) {
  ExprPtr result = make(Nil{});
  for (auto it = items.rbegin(); it != items.rend(); ++it)
    result = make(Cons{*it, result});
  return result;
}

bool structurally_equal(const Expr& a, const Expr& b) {
  return std::visit(EqualVisitor{b}, a.node);
}

bool structurally_equal(const Pattern& a, const Pattern& b) {
  return std::visit(PatternEqualVisitor{b}, a.node);
}

std::set<std::string> free_vars(const Expr& e) {
  std::set<std::string> out;
  FreeWalker walker([&](const std::string& name) {
    out.insert(name);
    return false;
  });
  walker.walk(e);
  return out;
}

bool mentions(const Expr& e, const std::string& name) {
  FreeWalker walker([&](const std::string& n) { return n == name; });
  return walker.walk(e);
}

const char* arith_symbol(ArithOp op) {
  switch (op) {
    case ArithOp::Add: return "+";
    case ArithOp::Sub: return "-";
    case ArithOp::Mul: return "*";
    case ArithOp::Div: return "/";
    case ArithOp::Mod: return "mod";
    case ArithOp::FAdd: return "+.";
    case ArithOp::FSub: return "-.";
    case ArithOp::FMul: return "*.";
    case ArithOp::FDiv: return "/.";
    case ArithOp::Concat: return "^";
  }
  return "?";
}

const char* cmp_symbol(CmpOp op) {
  switch (op) {
    case CmpOp::Eq: return "=";
    case CmpOp::Ne: return "<>";
    case CmpOp::Lt: return "<";
    case CmpOp::Gt: return ">";
    case CmpOp::Le: return "<=";
    case CmpOp::Ge: return ">=";
  }
  return "?";
}

}  // namespace stepml
