#include "stepml/render.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <regex>

namespace stepml {

namespace {

enum Prec : int {
  kOpen = 0,
  kSeq = 1,
  kAssign = 2,
  kTuple = 3,
  kOr = 4,
  kAnd = 5,
  kCmp = 6,
  kAppend = 7,
  kCons = 8,
  kAdd = 9,
  kMul = 10,
  kUnary = 11,
  kApp = 12,
  kDeref = 13,
  kAtom = 14,
};

int arith_prec(ArithOp op) {
  switch (op) {
    case ArithOp::Add:
    case ArithOp::Sub:
    case ArithOp::FAdd:
    case ArithOp::FSub:
      return kAdd;
    case ArithOp::Concat:
      return kAppend;
    default:
      return kMul;
  }
}

bool is_operator_name(const std::string& name) {
  static const std::string op_chars = "!$%&*+-./:<=>?@^|~";
  return !name.empty() && op_chars.find(name[0]) != std::string::npos && name[0] != '%';
}

std::string name_text(const std::string& name) {
  return is_operator_name(name) ? "( " + name + " )" : name;
}

const std::string* pvar_of(const PatternPtr& p) {
  const auto* v = std::get_if<PVar>(&p->node);
  return v ? &v->name : nullptr;
}

bool is_builtin_fun(const Fun& f) {
  const auto* n = pvar_of(f.param);
  return n && is_internal_name(*n);
}

const CallBuiltIn* builtin_call(const Fun& f) {
  ExprPtr body = f.body;
  while (const auto* inner = as<Fun>(body)) body = inner->body;
  return as<CallBuiltIn>(body);
}

// The `@` operator is the one application the parser produces from infix syntax.
bool is_append_head(const ExprPtr& e) {
  if (const auto* v = as<Var>(e)) return v->name == "@";
  if (const auto* f = as<Fun>(e)) return f->display_name == "@";
  if (const auto* f = as<Function>(e)) return f->display_name == "@";
  return false;
}

bool list_sugar(const Cons& c) {
  ExprPtr tail = c.tail;
  while (const auto* next = as<Cons>(tail)) tail = next->tail;
  return is<Nil>(tail);
}

std::string float_text(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "infinity" : "neg_infinity";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, ptr);
  if (s.find_first_of(".e") == std::string::npos) s += ".";
  return s;
}

std::string string_literal(const std::string& v) {
  std::string out = "\"";
  for (unsigned char c : v) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (c < 0x20 || c == 0x7f) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\%03d", c);
          out += buf;
        } else {
          out += static_cast<char>(c);
        }
    }
  }
  return out + "\"";
}

// Patterns ------------------------------------------------------------------

enum PatPrec : int { kPatOr = 0, kPatTuple = 1, kPatCons = 2, kPatConstr = 3, kPatAtom = 4 };

void print_pattern(const Pattern& p, int min, std::string& out);

int pattern_prec(const Pattern& p) {
  if (std::holds_alternative<POr>(p.node)) return kPatOr;
  if (std::holds_alternative<PTuple>(p.node)) return kPatAtom;  // always parenthesised
  if (const auto* c = std::get_if<PCons>(&p.node)) {
    PatternPtr tail = c->tail;
    while (const auto* next = std::get_if<PCons>(&tail->node)) tail = next->tail;
    return std::holds_alternative<PNil>(tail->node) ? kPatAtom : kPatCons;
  }
  if (const auto* c = std::get_if<PConstr>(&p.node)) return c->payload ? kPatConstr : kPatAtom;
  if (const auto* i = std::get_if<PInt>(&p.node)) return i->value < 0 ? kPatConstr : kPatAtom;
  return kPatAtom;
}

void print_pattern_node(const Pattern& p, std::string& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, PAny>) {
          out += "_";
        } else if constexpr (std::is_same_v<T, PVar>) {
          out += n.name;
        } else if constexpr (std::is_same_v<T, PInt>) {
          out += std::to_string(n.value);
        } else if constexpr (std::is_same_v<T, PBool>) {
          out += n.value ? "true" : "false";
        } else if constexpr (std::is_same_v<T, PString>) {
          out += string_literal(n.value);
        } else if constexpr (std::is_same_v<T, PUnit>) {
          out += "()";
        } else if constexpr (std::is_same_v<T, PNil>) {
          out += "[]";
        } else if constexpr (std::is_same_v<T, PTuple>) {
          out += "(";
          for (std::size_t i = 0; i < n.items.size(); ++i) {
            if (i) out += ", ";
            print_pattern(*n.items[i], kPatCons, out);
          }
          out += ")";
        } else if constexpr (std::is_same_v<T, PCons>) {
          if (pattern_prec(p) == kPatAtom) {
            out += "[";
            const Pattern* cur = &p;
            bool first = true;
            while (const auto* c = std::get_if<PCons>(&cur->node)) {
              if (!first) out += "; ";
              first = false;
              print_pattern(*c->head, kPatCons, out);
              cur = c->tail.get();
            }
            out += "]";
          } else {
            print_pattern(*n.head, kPatConstr, out);
            out += " :: ";
            print_pattern(*n.tail, kPatCons, out);
          }
        } else if constexpr (std::is_same_v<T, PConstr>) {
          out += n.tag;
          if (n.payload) {
            out += " ";
            print_pattern(*n.payload, kPatAtom, out);
          }
        } else {
          print_pattern(*n.left, kPatTuple, out);
          out += " | ";
          print_pattern(*n.right, kPatTuple, out);
        }
      },
      p.node);
}

void print_pattern(const Pattern& p, int min, std::string& out) {
  const bool parens = pattern_prec(p) < min;
  if (parens) out += "(";
  print_pattern_node(p, out);
  if (parens) out += ")";
}

// Binder counting for side-let eligibility ------------------------------------

class BinderCounter {
 public:
  std::map<std::string, int> counts;

  void pattern(const PatternPtr& p) {
    if (!p) return;
    for (const auto& n : pattern_vars(*p)) ++counts[n];
  }

  void walk(const ExprPtr& e) {
    if (!e) return;
    std::visit([&](const auto& n) { node(n); }, e->node);
  }

 private:
  template <typename T>
  void node(const T&) {}
  void node(const Op& n) { walk(n.lhs), walk(n.rhs); }
  void node(const Cmp& n) { walk(n.lhs), walk(n.rhs); }
  void node(const And& n) { walk(n.lhs), walk(n.rhs); }
  void node(const Or& n) { walk(n.lhs), walk(n.rhs); }
  void node(const If& n) { walk(n.cond), walk(n.then_branch), walk(n.else_branch); }
  void node(const Let& n) {
    for (const auto& b : n.bindings) pattern(b.pattern), walk(b.expr);
    walk(n.body);
  }
  void node(const LetDef& n) {
    for (const auto& b : n.bindings) pattern(b.pattern), walk(b.expr);
  }
  void node(const Fun& n) {
    if (!n.display_name.empty() || is_builtin_fun(n)) return;
    pattern(n.param);
    walk(n.body);
  }
  void cases(const std::vector<Case>& cs) {
    for (const auto& c : cs) pattern(c.pattern), walk(c.guard), walk(c.body);
  }
  void node(const Function& n) {
    if (n.display_name.empty()) cases(n.cases);
  }
  void node(const App& n) { walk(n.fn), walk(n.arg); }
  void node(const Seq& n) { walk(n.first), walk(n.second); }
  void node(const While& n) { walk(n.cond), walk(n.body); }
  void node(const For& n) {
    ++counts[n.var];
    walk(n.from), walk(n.to), walk(n.body);
  }
  void node(const Record& n) {
    for (const auto& f : n.fields) walk(f.cell->value);
  }
  void node(const FieldGet& n) { walk(n.record); }
  void node(const FieldSet& n) { walk(n.record), walk(n.value); }
  void node(const Tuple& n) {
    for (const auto& i : n.items) walk(i);
  }
  void node(const Cons& n) {
    walk(n.head);
    ExprPtr tail = n.tail;
    while (const auto* c = as<Cons>(tail)) {
      walk(c->head);
      tail = c->tail;
    }
    walk(tail);
  }
  void node(const Constr& n) { walk(n.payload); }
  void node(const Raise& n) { walk(n.payload); }
  void node(const Match& n) { walk(n.scrutinee), cases(n.cases); }
  void node(const TryWith& n) { walk(n.body), cases(n.cases); }
  void node(const CallBuiltIn& n) {
    for (const auto& a : n.args) walk(a);
  }
  void node(const Scope& n) { walk(n.body); }
};

// The printer ----------------------------------------------------------------

class Printer {
 public:
  Printer(const RenderOptions& opts, const Path* redex) : opts_(opts), redex_(redex) {}

  void top(const ExprPtr& e) {
    if (opts_.side_lets) {
      BinderCounter counter;
      counter.walk(e);
      binders_ = std::move(counter.counts);
    }
    expr(e, kOpen, true);
  }

  std::string out;
  Span span;
  std::vector<std::string> gutter;

 private:
  struct Child {
    Path& path;
    Child(Path& p, int i) : path(p) { path.push_back(i); }
    ~Child() { path.pop_back(); }
  };

  bool hidden_rec(const Let& l) const {
    if (!opts_.hide_rec_defs || !l.recursive) return false;
    return std::all_of(l.bindings.begin(), l.bindings.end(), [](const Binding& b) {
      return is<Fun>(b.expr) || is<Function>(b.expr);
    });
  }

  bool hoisted(const Let& l) const {
    if (!opts_.side_lets || l.recursive || under_binder_ > 0) return false;
    for (const auto& b : l.bindings) {
      const auto* name = pvar_of(b.pattern);
      if (!name || !is_value(b.expr)) return false;
      auto it = binders_.find(*name);
      if (it == binders_.end() || it->second != 1) return false;
    }
    return true;
  }

  int prec(const ExprPtr& e) const {
    return std::visit(
        [&](const auto& n) -> int {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, Int>) {
            return n.value < 0 ? kUnary : kAtom;
          } else if constexpr (std::is_same_v<T, Float>) {
            return std::signbit(n.value) && !std::isnan(n.value) ? kUnary : kAtom;
          } else if constexpr (std::is_same_v<T, Op>) {
            return arith_prec(n.op);
          } else if constexpr (std::is_same_v<T, Cmp>) {
            return kCmp;
          } else if constexpr (std::is_same_v<T, And>) {
            return kAnd;
          } else if constexpr (std::is_same_v<T, Or>) {
            return kOr;
          } else if constexpr (std::is_same_v<T, If> || std::is_same_v<T, Let> ||
                               std::is_same_v<T, Match> || std::is_same_v<T, TryWith> ||
                               std::is_same_v<T, Function> || std::is_same_v<T, LetDef> ||
                               std::is_same_v<T, ExceptionDef> || std::is_same_v<T, TypeDef>) {
            if constexpr (std::is_same_v<T, Function>)
              if (!n.display_name.empty()) return kAtom;
            return kOpen;
          } else if constexpr (std::is_same_v<T, Fun>) {
            if (!n.display_name.empty()) return kAtom;
            if (is_builtin_fun(n)) {
              const auto* call = builtin_call(n);
              for (const auto& a : call->args)
                if (!is<Var>(a)) return kApp;
              return kAtom;
            }
            return kOpen;
          } else if constexpr (std::is_same_v<T, App>) {
            if (const auto* inner = as<App>(n.fn); inner && is_append_head(inner->fn))
              return kAppend;
            return kApp;
          } else if constexpr (std::is_same_v<T, Seq>) {
            return kSeq;
          } else if constexpr (std::is_same_v<T, FieldSet>) {
            return kAssign;
          } else if constexpr (std::is_same_v<T, FieldGet>) {
            return kDeref;
          } else if constexpr (std::is_same_v<T, Cons>) {
            return list_sugar(n) ? kAtom : kCons;
          } else if constexpr (std::is_same_v<T, Constr>) {
            return n.payload ? kApp : kAtom;
          } else if constexpr (std::is_same_v<T, Raise>) {
            return kApp;
          } else if constexpr (std::is_same_v<T, CallBuiltIn>) {
            return n.args.empty() ? kAtom : kApp;
          } else {
            return kAtom;
          }
        },
        e->node);
  }

  static bool is_open_prec(int p) { return p == kOpen; }

  void expr(const ExprPtr& e, int min, bool tail) {
    const bool mark = redex_ && path_ == *redex_;
    const std::size_t start = out.size();

    if (const auto* s = as<Scope>(e)) {
      Child c(path_, 0);
      expr(s->body, min, tail);
    } else if (const auto* l = as<Let>(e); l && (hidden_rec(*l) || hoisted(*l))) {
      if (!hidden_rec(*l)) {
        for (const auto& b : l->bindings) gutter.push_back(binding_text(b));
      }
      Child c(path_, static_cast<int>(l->bindings.size()));
      expr(l->body, min, tail);
    } else {
      const int p = prec(e);
      const bool parens = is_open_prec(p) ? !tail : p < min;
      if (parens) out += "(";
      node(e, parens ? true : tail);
      if (parens) out += ")";
    }

    if (mark) span = Span{start, out.size()};
  }

  template <typename F>
  void child(int index, F&& f) {
    Child c(path_, index);
    f();
  }

  void sub(const ExprPtr& e, int index, int min, bool tail) {
    Child c(path_, index);
    expr(e, min, tail);
  }

  std::string binding_text(const Binding& b) const {
    Printer p(opts_, nullptr);
    p.binders_ = binders_;
    p.under_binder_ = 1;  // nothing further is hoisted from inside
    p.binding(b, kOpen);
    return p.out;
  }

  void params_and_body(const Fun& f, const char* arrow, bool tail) {
    const Fun* cur = &f;
    while (true) {
      out += " ";
      print_pattern(*cur->param, kPatAtom, out);
      const auto* next = as<Fun>(cur->body);
      if (next && next->curried_tail && next->display_name.empty() && !is_builtin_fun(*next)) {
        cur = next;
        continue;
      }
      break;
    }
    out += arrow;
    ++under_binder_;
    expr(cur->body, kSeq, tail);
    --under_binder_;
  }

  bool sugared(const Binding& b) const {
    const auto* f = as<Fun>(b.expr);
    return pvar_of(b.pattern) && f && f->display_name.empty() && !is_builtin_fun(*f);
  }

  void binding(const Binding& b, int index) {
    if (sugared(b)) {
      out += name_text(*pvar_of(b.pattern));
      Child c(path_, index);
      params_and_body(*as<Fun>(b.expr), " = ", true);
      return;
    }
    if (const auto* name = pvar_of(b.pattern)) {
      out += name_text(*name);
    } else {
      print_pattern(*b.pattern, kPatOr, out);
    }
    out += " = ";
    sub(b.expr, index, kOpen, true);
  }

  void bindings(bool recursive, const std::vector<Binding>& bs) {
    out += recursive ? "let rec " : "let ";
    for (std::size_t i = 0; i < bs.size(); ++i) {
      if (i) out += " and ";
      binding(bs[i], static_cast<int>(i));
    }
  }

  void cases(const std::vector<Case>& cs, bool tail) {
    ++under_binder_;
    for (std::size_t i = 0; i < cs.size(); ++i) {
      if (i) out += " | ";
      print_pattern(*cs[i].pattern, kPatOr, out);
      if (cs[i].guard) {
        out += " when ";
        expr(cs[i].guard, kSeq, false);
      }
      out += " -> ";
      expr(cs[i].body, kSeq, i + 1 == cs.size() ? tail : false);
    }
    --under_binder_;
  }

  void node(const ExprPtr& e, bool tail) {
    std::visit([&](const auto& n) { print(n, tail); }, e->node);
  }

  void print(const Unit&, bool) { out += "()"; }
  void print(const Int& n, bool) { out += std::to_string(n.value); }
  void print(const Bool& n, bool) { out += n.value ? "true" : "false"; }
  void print(const Float& n, bool) { out += float_text(n.value); }
  void print(const String& n, bool) { out += string_literal(n.value); }
  void print(const Var& n, bool) { out += name_text(n.name); }
  void print(const Nil&, bool) { out += "[]"; }

  void print(const Op& n, bool tail) {
    const int p = arith_prec(n.op);
    const bool right = n.op == ArithOp::Concat;
    sub(n.lhs, 0, right ? p + 1 : p, false);
    out += " ";
    out += arith_symbol(n.op);
    out += " ";
    sub(n.rhs, 1, right ? p : p + 1, tail);
  }

  void print(const Cmp& n, bool tail) {
    sub(n.lhs, 0, kCmp, false);
    out += " ";
    out += cmp_symbol(n.op);
    out += " ";
    sub(n.rhs, 1, kCmp + 1, tail);
  }

  void print(const And& n, bool tail) {
    sub(n.lhs, 0, kAnd + 1, false);
    out += " && ";
    sub(n.rhs, 1, kAnd, tail);
  }

  void print(const Or& n, bool tail) {
    sub(n.lhs, 0, kOr + 1, false);
    out += " || ";
    sub(n.rhs, 1, kOr, tail);
  }

  void print(const If& n, bool tail) {
    out += "if ";
    sub(n.cond, 0, kOpen, false);
    out += " then ";
    sub(n.then_branch, 1, kAssign, n.else_branch ? false : tail);
    if (n.else_branch) {
      out += " else ";
      sub(n.else_branch, 2, kAssign, tail);
    }
  }

  void print(const Let& n, bool tail) {
    bindings(n.recursive, n.bindings);
    out += " in ";
    sub(n.body, static_cast<int>(n.bindings.size()), kOpen, tail);
  }

  void print(const LetDef& n, bool tail) {
    if (n.bindings.size() == 1 && !n.recursive &&
        std::holds_alternative<PAny>(n.bindings[0].pattern->node)) {
      sub(n.bindings[0].expr, 0, kOpen, tail);
      return;
    }
    bindings(n.recursive, n.bindings);
  }

  void print(const Fun& n, bool tail) {
    if (!n.display_name.empty()) {
      out += name_text(n.display_name);
      return;
    }
    if (is_builtin_fun(n)) {
      const auto* call = builtin_call(n);
      out += call->display;
      for (const auto& a : call->args) {
        if (is<Var>(a)) continue;
        out += " ";
        expr(a, kDeref, false);
      }
      return;
    }
    out += "fun";
    params_and_body(n, " -> ", tail);
  }

  void print(const Function& n, bool tail) {
    if (!n.display_name.empty()) {
      out += name_text(n.display_name);
      return;
    }
    out += "function ";
    cases(n.cases, tail);
  }

  void print(const App& n, bool tail) {
    if (const auto* inner = as<App>(n.fn); inner && is_append_head(inner->fn)) {
      Child c(path_, 0);
      sub(inner->arg, 1, kAppend + 1, false);
      out += " ";
      const std::size_t at = out.size();
      out += "@";
      if (redex_ && *redex_ == with_suffix(0)) span = Span{at, out.size()};
      out += " ";
      path_.pop_back();
      sub(n.arg, 1, kAppend, tail);
      path_.push_back(0);
      return;
    }
    sub(n.fn, 0, kApp, false);
    out += " ";
    sub(n.arg, 1, kDeref, false);
  }

  Path with_suffix(int i) const {
    Path p = path_;
    p.push_back(i);
    return p;
  }

  void print(const Seq& n, bool tail) {
    sub(n.first, 0, kAssign, false);
    out += "; ";
    sub(n.second, 1, kSeq, tail);
  }

  void print(const While& n, bool) {
    out += "while ";
    sub(n.cond, 0, kOpen, false);
    out += " do ";
    sub(n.body, 1, kOpen, true);
    out += " done";
  }

  void print(const For& n, bool) {
    out += "for " + n.var + " = ";
    sub(n.from, 0, kOpen, false);
    out += n.direction == ForDirection::Up ? " to " : " downto ";
    sub(n.to, 1, kOpen, false);
    out += " do ";
    sub(n.body, 2, kOpen, true);
    out += " done";
  }

  void print(const Record& n, bool) {
    out += "{";
    for (std::size_t i = 0; i < n.fields.size(); ++i) {
      if (i) out += "; ";
      out += n.fields[i].name + " = ";
      sub(n.fields[i].cell->value, static_cast<int>(i), kAssign, false);
    }
    out += "}";
  }

  int record_min(const ExprPtr& record) const {
    if (const auto* g = as<FieldGet>(record); g && g->field != "contents") return kDeref;
    return kAtom;
  }

  void print(const FieldGet& n, bool) {
    if (n.field == "contents") {
      out += "!";
      sub(n.record, 0, kDeref, false);
      return;
    }
    sub(n.record, 0, record_min(n.record), false);
    out += "." + n.field;
  }

  void print(const FieldSet& n, bool tail) {
    if (n.field == "contents") {
      sub(n.record, 0, kTuple, false);
      out += " := ";
    } else {
      sub(n.record, 0, record_min(n.record), false);
      out += "." + n.field + " <- ";
    }
    sub(n.value, 1, kAssign, tail);
  }

  void print(const Tuple& n, bool) {
    out += "(";
    for (std::size_t i = 0; i < n.items.size(); ++i) {
      if (i) out += ", ";
      sub(n.items[i], static_cast<int>(i), kOr, false);
    }
    out += ")";
  }

  void print(const Cons& n, bool tail) {
    if (list_sugar(n)) {
      out += "[";
      std::size_t depth = 0;
      const Cons* cur = &n;
      while (cur) {
        if (depth) out += "; ";
        {
          Child c(path_, 0);
          expr(cur->head, kAssign, false);
        }
        cur = as<Cons>(cur->tail);
        if (cur) {
          path_.push_back(1);
          ++depth;
        }
      }
      path_.resize(path_.size() - depth);
      out += "]";
      return;
    }
    sub(n.head, 0, kCons + 1, false);
    out += " :: ";
    sub(n.tail, 1, kCons, tail);
  }

  void print(const Constr& n, bool) {
    out += n.tag;
    if (n.payload) {
      out += " ";
      sub(n.payload, 0, kDeref, false);
    }
  }

  void print(const Raise& n, bool) {
    out += "raise ";
    if (!n.payload) {
      out += n.name;
      return;
    }
    out += "(" + n.name + " ";
    sub(n.payload, 0, kDeref, false);
    out += ")";
  }

  void print(const Match& n, bool tail) {
    out += "match ";
    sub(n.scrutinee, 0, kOpen, false);
    out += " with ";
    cases(n.cases, tail);
  }

  void print(const TryWith& n, bool tail) {
    out += "try ";
    sub(n.body, 0, kSeq, false);
    out += " with ";
    cases(n.cases, tail);
  }

  void print(const ExceptionDef& n, bool) {
    out += "exception " + n.name;
    if (n.arity) out += " of " + n.payload_type;
  }

  void print(const TypeDef& n, bool) {
    out += "type " + n.params + n.name + " = ";
    if (n.constructors.empty()) {
      out += n.manifest;
      return;
    }
    for (std::size_t i = 0; i < n.constructors.size(); ++i) {
      if (i) out += " | ";
      out += n.constructors[i].name;
      if (!n.constructors[i].payload_type.empty())
        out += " of " + n.constructors[i].payload_type;
    }
  }

  void print(const CallBuiltIn& n, bool) {
    out += n.display;
    for (std::size_t i = 0; i < n.args.size(); ++i) {
      out += " ";
      sub(n.args[i], static_cast<int>(i), kDeref, false);
    }
  }

  void print(const Struct& n, bool) {
    out += "struct";
    for (const auto& item : n.items) {
      out += " ";
      expr(item, kOpen, true);
      out += " ;;";
    }
    out += " end";
  }

  void print(const Scope& n, bool tail) { expr(n.body, kOpen, tail); }

  RenderOptions opts_;
  const Path* redex_;
  Path path_;
  int under_binder_ = 0;
  std::map<std::string, int> binders_;
};

RenderOptions plain_options() {
  RenderOptions o;
  o.hide_rec_defs = false;
  o.side_lets = false;
  return o;
}

}  // namespace

TraceLine render(const ExprPtr& e, const Path* redex, const RenderOptions& opts) {
  Printer p(opts, redex);
  p.top(e);
  TraceLine line;
  line.text = std::move(p.out);
  line.redex_span = p.span;
  for (std::size_t i = 0; i < p.gutter.size(); ++i) {
    if (i) line.gutter += " ";
    line.gutter += p.gutter[i];
  }
  line.is_value = is_value(e);
  return line;
}

std::string render_plain(const ExprPtr& e) {
  Printer p(plain_options(), nullptr);
  p.top(e);
  return p.out;
}

std::string render_pattern(const Pattern& p) {
  std::string out;
  print_pattern(p, kPatOr, out);
  return out;
}

bool elidable(LastOp op, const RenderOptions& opts) {
  switch (op) {
    case LastOp::Arith: return opts.elide_arith;
    case LastOp::VarLookup: return opts.elide_var_lookup;
    case LastOp::IfBool: return opts.elide_if_bool;
    case LastOp::Comparison: return opts.elide_comparison;
    case LastOp::Boolean: return opts.elide_boolean;
    default: return false;
  }
}

bool should_print(std::optional<LastOp> prev, bool current_is_value, std::optional<LastOp> next,
                  bool, const RenderOptions& opts) {
  if (opts.show_all) return true;
  if (!prev || current_is_value || !next) return true;
  return !(elidable(*prev, opts) && elidable(*next, opts));
}

std::string exception_line(const std::string& name, const ExprPtr& payload) {
  if (!payload) return "Exception: " + name + ".";
  return "Exception: " + render_plain(make(Constr{name, payload})) + ".";
}

std::string plain_line(const TraceLine& line, std::size_t gutter_width) {
  std::string out;
  if (gutter_width > 0) {
    out = line.gutter;
    out.resize(std::max(gutter_width, line.gutter.size() + 1), ' ');
  }
  return out + line.arrow + line.text;
}

std::string strip_ansi(const std::string& s) {
  static const std::regex sgr("\x1b\\[[0-9;]*m");
  return std::regex_replace(s, sgr, "");
}

std::string format_line(const TraceLine& line, std::size_t gutter_width,
                        const std::vector<Span>& highlights, const RenderOptions& opts) {
  const std::string plain = plain_line(line, gutter_width);
  const std::size_t text_offset = plain.size() - line.text.size();

  // Attribute per byte: bit 0 underline, bit 1 reverse.
  std::vector<unsigned char> attr(plain.size(), 0);
  if (opts.ansi && opts.underline_redex && !line.redex_span.empty()) {
    for (std::size_t i = line.redex_span.begin; i < line.redex_span.end; ++i)
      attr[text_offset + i] |= 1;
  }
  if (opts.ansi) {
    for (const auto& h : highlights)
      for (std::size_t i = h.begin; i < std::min(h.end, plain.size()); ++i) attr[i] |= 2;
  }

  // Break points for wrapping, chosen on spaces.
  std::vector<std::size_t> breaks;
  if (opts.width > 0) {
    const std::size_t width = static_cast<std::size_t>(opts.width);
    constexpr std::size_t indent = 6;
    std::size_t line_start = 0;
    std::size_t budget = width;
    while (plain.size() - line_start > budget) {
      std::size_t cut = plain.rfind(' ', line_start + budget);
      if (cut == std::string::npos || cut <= line_start) {
        cut = plain.find(' ', line_start + budget);
        if (cut == std::string::npos) break;
      }
      breaks.push_back(cut);
      line_start = cut + 1;
      budget = width > indent ? width - indent : 1;
    }
  }

  std::string out;
  unsigned char current = 0;
  auto set_attr = [&](unsigned char want) {
    if ((current & 1) != (want & 1)) out += (want & 1) ? "\x1b[4m" : "\x1b[24m";
    if ((current & 2) != (want & 2)) out += (want & 2) ? "\x1b[7m" : "\x1b[27m";
    current = want;
  };
  std::size_t next_break = 0;
  for (std::size_t i = 0; i < plain.size(); ++i) {
    if (next_break < breaks.size() && i == breaks[next_break]) {
      set_attr(0);
      out += "\n      ";
      ++next_break;
      continue;
    }
    set_attr(attr[i]);
    out += plain[i];
  }
  set_attr(0);
  return out;
}

std::vector<std::string> CollectingSink::texts() const {
  std::vector<std::string> out;
  for (const auto& l : lines) out.push_back(l.text);
  return out;
}

}  // namespace stepml
