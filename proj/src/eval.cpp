#include "stepml/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>

namespace stepml {

const char* to_string(LastOp op) {
  switch (op) {
    case LastOp::Arith: return "Arith";
    case LastOp::Boolean: return "Boolean";
    case LastOp::Comparison: return "Comparison";
    case LastOp::IfBool: return "IfBool";
    case LastOp::InsideBuiltIn: return "InsideBuiltIn";
    case LastOp::VarLookup: return "VarLookup";
    case LastOp::Other: return "Other";
  }
  return "Other";
}

namespace {

struct PeekFound {
  LastOp op;
  Path path;
};

struct ExceptionSignal {
  std::string name;
  ExprPtr payload;
};

ExprPtr raise_value(const std::string& name, ExprPtr payload = nullptr) {
  return make(Raise{name, std::move(payload)});
}

bool all_values(const std::vector<ExprPtr>& items) {
  return std::all_of(items.begin(), items.end(), [](const ExprPtr& e) { return is_value(e); });
}

const std::string* pvar_name(const PatternPtr& p) {
  const auto* v = std::get_if<PVar>(&p->node);
  return v ? &v->name : nullptr;
}

bool is_builtin_fun(const Fun& f) {
  const auto* name = pvar_name(f.param);
  return name && is_internal_name(*name);
}

int joined_params(const ExprPtr& e) {
  int n = 0;
  const Fun* f = as<Fun>(e);
  while (f && !is_builtin_fun(*f)) {
    ++n;
    const Fun* next = as<Fun>(f->body);
    if (!next || !next->curried_tail) break;
    f = next;
  }
  return n;
}

ExprPtr with_display_name(const ExprPtr& v, const std::string& name) {
  if (const auto* f = as<Fun>(v)) {
    if (f->display_name == name) return v;
    Fun copy = *f;
    copy.display_name = name;
    return make(std::move(copy));
  }
  if (const auto* f = as<Function>(v)) {
    if (f->display_name == name) return v;
    Function copy = *f;
    copy.display_name = name;
    return make(std::move(copy));
  }
  return v;
}

// Gives every environment-less closure inside a value the environment `env`.
ExprPtr set_env_deep(const ExprPtr& v, const EnvNode* env) {
  if (const auto* f = as<Fun>(v)) {
    if (f->env || is_builtin_fun(*f)) return v;
    Fun copy = *f;
    copy.env = env;
    return make(std::move(copy));
  }
  if (const auto* f = as<Function>(v)) {
    if (f->env) return v;
    Function copy = *f;
    copy.env = env;
    return make(std::move(copy));
  }
  if (const auto* t = as<Tuple>(v)) {
    Tuple copy{};
    for (const auto& item : t->items) copy.items.push_back(set_env_deep(item, env));
    return make(std::move(copy));
  }
  if (const auto* c = as<Cons>(v)) {
    // Lists can be long; rebuild iteratively.
    std::vector<ExprPtr> heads;
    ExprPtr cur = v;
    while (const auto* cell = as<Cons>(cur)) {
      heads.push_back(set_env_deep(cell->head, env));
      cur = cell->tail;
    }
    ExprPtr out = set_env_deep(cur, env);
    for (auto it = heads.rbegin(); it != heads.rend(); ++it) out = make(Cons{*it, out});
    (void)c;
    return out;
  }
  if (const auto* c = as<Constr>(v)) {
    if (!c->payload) return v;
    return make(Constr{c->tag, set_env_deep(c->payload, env)});
  }
  return v;
}

ExprPtr substitute_internal(const ExprPtr& e, const std::string& name, const ExprPtr& value) {
  if (const auto* var = as<Var>(e)) return var->name == name ? value : e;
  if (const auto* f = as<Fun>(e)) {
    const auto* p = pvar_name(f->param);
    if (p && *p == name) return e;
    Fun copy = *f;
    copy.body = substitute_internal(f->body, name, value);
    copy.display_name.clear();
    return make(std::move(copy));
  }
  if (const auto* call = as<CallBuiltIn>(e)) {
    CallBuiltIn copy = *call;
    for (auto& arg : copy.args) arg = substitute_internal(arg, name, value);
    return make(std::move(copy));
  }
  return e;
}

[[noreturn]] void type_error(const std::string& what) { throw RuntimeError(what); }

int compare_values(const ExprPtr& a, const ExprPtr& b);

int compare_lists(const std::vector<ExprPtr>& a, const std::vector<ExprPtr>& b) {
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i)
    if (int c = compare_values(a[i], b[i])) return c;
  return a.size() < b.size() ? -1 : (a.size() > b.size() ? 1 : 0);
}

template <typename T>
int three_way(const T& x, const T& y) {
  return x < y ? -1 : (y < x ? 1 : 0);
}

int compare_values(const ExprPtr& a, const ExprPtr& b) {
  if (is<Fun>(a) || is<Function>(a) || is<Fun>(b) || is<Function>(b))
    type_error("compare: functional value");
  if (const auto* x = as<Int>(a))
    if (const auto* y = as<Int>(b)) return three_way(x->value, y->value);
  if (const auto* x = as<Float>(a))
    if (const auto* y = as<Float>(b)) return three_way(x->value, y->value);
  if (const auto* x = as<Bool>(a))
    if (const auto* y = as<Bool>(b)) return three_way(x->value, y->value);
  if (const auto* x = as<String>(a))
    if (const auto* y = as<String>(b)) return three_way(x->value, y->value);
  if (is<Unit>(a) && is<Unit>(b)) return 0;
  const bool a_list = is<Nil>(a) || is<Cons>(a);
  const bool b_list = is<Nil>(b) || is<Cons>(b);
  if (a_list && b_list) {
    ExprPtr x = a, y = b;
    while (true) {
      const auto* cx = as<Cons>(x);
      const auto* cy = as<Cons>(y);
      if (!cx || !cy) return three_way(cx != nullptr, cy != nullptr);
      if (int c = compare_values(cx->head, cy->head)) return c;
      x = cx->tail;
      y = cy->tail;
    }
  }
  if (const auto* x = as<Tuple>(a))
    if (const auto* y = as<Tuple>(b)) return compare_lists(x->items, y->items);
  if (const auto* x = as<Constr>(a)) {
    if (const auto* y = as<Constr>(b)) {
      if (x->tag != y->tag) return three_way(x->tag, y->tag);
      if (!x->payload || !y->payload)
        return three_way(x->payload != nullptr, y->payload != nullptr);
      return compare_values(x->payload, y->payload);
    }
  }
  if (const auto* x = as<Record>(a)) {
    if (const auto* y = as<Record>(b)) {
      for (std::size_t i = 0; i < std::min(x->fields.size(), y->fields.size()); ++i)
        if (int c = compare_values(x->fields[i].cell->value, y->fields[i].cell->value))
          return c;
      return three_way(x->fields.size(), y->fields.size());
    }
  }
  type_error("compare: values of different types");
}

ExprPtr fold_arith(ArithOp op, const ExprPtr& lhs, const ExprPtr& rhs) {
  if (op == ArithOp::Concat) {
    const auto* x = as<String>(lhs);
    const auto* y = as<String>(rhs);
    if (!x || !y) type_error("^ expects strings");
    return string_value(x->value + y->value);
  }
  if (op == ArithOp::FAdd || op == ArithOp::FSub || op == ArithOp::FMul || op == ArithOp::FDiv) {
    const auto* x = as<Float>(lhs);
    const auto* y = as<Float>(rhs);
    if (!x || !y) type_error(std::string(arith_symbol(op)) + " expects floats");
    switch (op) {
      case ArithOp::FAdd: return make(Float{x->value + y->value});
      case ArithOp::FSub: return make(Float{x->value - y->value});
      case ArithOp::FMul: return make(Float{x->value * y->value});
      default: return make(Float{x->value / y->value});
    }
  }
  const auto* x = as<Int>(lhs);
  const auto* y = as<Int>(rhs);
  if (!x || !y) type_error(std::string(arith_symbol(op)) + " expects integers");
  // Two's-complement wrap-around, as in OCaml.
  const auto ux = static_cast<std::uint64_t>(x->value);
  const auto uy = static_cast<std::uint64_t>(y->value);
  switch (op) {
    case ArithOp::Add: return int_value(static_cast<std::int64_t>(ux + uy));
    case ArithOp::Sub: return int_value(static_cast<std::int64_t>(ux - uy));
    case ArithOp::Mul: return int_value(static_cast<std::int64_t>(ux * uy));
    case ArithOp::Div:
      if (y->value == 0) return raise_value("Division_by_zero");
      if (y->value == -1) return int_value(static_cast<std::int64_t>(0 - ux));
      return int_value(x->value / y->value);
    case ArithOp::Mod:
      if (y->value == 0) return raise_value("Division_by_zero");
      if (y->value == -1) return int_value(0);
      return int_value(x->value % y->value);
    default: break;
  }
  type_error("bad arithmetic operator");
}

bool fold_cmp(CmpOp op, const ExprPtr& lhs, const ExprPtr& rhs) {
  const int c = compare_values(lhs, rhs);
  switch (op) {
    case CmpOp::Eq: return c == 0;
    case CmpOp::Ne: return c != 0;
    case CmpOp::Lt: return c < 0;
    case CmpOp::Gt: return c > 0;
    case CmpOp::Le: return c <= 0;
    case CmpOp::Ge: return c >= 0;
  }
  return false;
}

bool match_into(const Pattern& p, const ExprPtr& v, Bindings& out) {
  return std::visit(
      [&](const auto& n) -> bool {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, PAny>) {
          return true;
        } else if constexpr (std::is_same_v<T, PVar>) {
          out.emplace_back(n.name, v);
          return true;
        } else if constexpr (std::is_same_v<T, PInt>) {
          const auto* x = as<Int>(v);
          return x && x->value == n.value;
        } else if constexpr (std::is_same_v<T, PBool>) {
          const auto* x = as<Bool>(v);
          return x && x->value == n.value;
        } else if constexpr (std::is_same_v<T, PString>) {
          const auto* x = as<String>(v);
          return x && x->value == n.value;
        } else if constexpr (std::is_same_v<T, PUnit>) {
          return is<Unit>(v);
        } else if constexpr (std::is_same_v<T, PNil>) {
          return is<Nil>(v);
        } else if constexpr (std::is_same_v<T, PTuple>) {
          const auto* t = as<Tuple>(v);
          if (!t || t->items.size() != n.items.size()) return false;
          for (std::size_t i = 0; i < n.items.size(); ++i)
            if (!match_into(*n.items[i], t->items[i], out)) return false;
          return true;
        } else if constexpr (std::is_same_v<T, PCons>) {
          const auto* c = as<Cons>(v);
          return c && match_into(*n.head, c->head, out) && match_into(*n.tail, c->tail, out);
        } else if constexpr (std::is_same_v<T, PConstr>) {
          const auto* c = as<Constr>(v);
          if (!c || c->tag != n.tag) return false;
          if (!n.payload) return true;
          if (!c->payload) return false;
          return match_into(*n.payload, c->payload, out);
        } else {
          const auto mark = out.size();
          if (match_into(*n.left, v, out)) return true;
          out.resize(mark);
          return match_into(*n.right, v, out);
        }
      },
      p.node);
}

}  // namespace

bool is_value(const ExprPtr& e) {
  if (!e) return false;
  return std::visit(
      [](const auto& n) -> bool {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Unit> || std::is_same_v<T, Int> ||
                      std::is_same_v<T, Bool> || std::is_same_v<T, Float> ||
                      std::is_same_v<T, String> || std::is_same_v<T, Nil> ||
                      std::is_same_v<T, Fun> || std::is_same_v<T, Function> ||
                      std::is_same_v<T, ExceptionDef> || std::is_same_v<T, TypeDef> ||
                      std::is_same_v<T, Struct>) {
          return true;
        } else if constexpr (std::is_same_v<T, Tuple>) {
          return all_values(n.items);
        } else if constexpr (std::is_same_v<T, Cons>) {
          if (!is_value(n.head)) return false;
          ExprPtr tail = n.tail;
          while (const auto* c = as<Cons>(tail)) {
            if (!is_value(c->head)) return false;
            tail = c->tail;
          }
          return is_value(tail);
        } else if constexpr (std::is_same_v<T, Constr>) {
          return !n.payload || is_value(n.payload);
        } else if constexpr (std::is_same_v<T, Record>) {
          return n.allocated;
        } else if constexpr (std::is_same_v<T, LetDef>) {
          return std::all_of(n.bindings.begin(), n.bindings.end(),
                             [](const Binding& b) { return is_value(b.expr); });
        } else {
          return false;
        }
      },
      e->node);
}

std::optional<Bindings> match_pattern(const Pattern& p, const ExprPtr& v) {
  Bindings out;
  if (!match_into(p, v, out)) return std::nullopt;
  return out;
}

ExprPtr wrap_lets(const Bindings& bindings, ExprPtr body) {
  for (auto it = bindings.rbegin(); it != bindings.rend(); ++it)
    body = make(Let{false, {Binding{make_pattern(PVar{it->first}), it->second}}, body});
  return body;
}

MatchResult eval_match_exception(const std::string& name, const ExprPtr& payload,
                                 const std::vector<Case>& cases) {
  const ExprPtr exn = make(Constr{name, payload});
  for (const auto& c : cases) {
    if (c.guard) continue;
    if (auto b = match_pattern(*c.pattern, exn)) return MatchResult{true, wrap_lets(*b, c.body)};
  }
  return MatchResult{false, nullptr};
}

ExprPtr apply_fast_curry(const ExprPtr& e) {
  std::vector<ExprPtr> args;
  ExprPtr head = e;
  while (const auto* app = as<App>(head)) {
    args.push_back(app->arg);
    head = app->fn;
  }
  std::reverse(args.begin(), args.end());
  const int k = joined_params(head);
  if (k < 2 || args.size() < 2 || !all_values(args)) return e;
  const std::size_t take = std::min<std::size_t>(k, args.size());

  std::vector<const Fun*> funs;
  const Fun* f = as<Fun>(head);
  for (std::size_t i = 0; i < take; ++i) {
    funs.push_back(f);
    if (i + 1 < take) f = as<Fun>(f->body);
  }
  ExprPtr body = funs.back()->body;
  for (std::size_t i = take; i-- > 0;)
    body = make(Let{false, {Binding{funs[i]->param, args[i]}}, body});
  if (const Fun* outer = as<Fun>(head); outer->env) body = make(Scope{outer->env, body});
  for (std::size_t i = take; i < args.size(); ++i) body = make(App{body, args[i]});
  return body;
}

// ---------------------------------------------------------------------------
// The stepper. One instance performs (or, in peek mode, locates) exactly one
// reduction.
// ---------------------------------------------------------------------------

class Stepper {
 public:
  Stepper(Engine& engine, bool peek) : eng_(engine), peek_(peek), base_(engine.globals_) {}

  ExprPtr run(const ExprPtr& e) {
    op_ = LastOp::Other;
    mutated_ = false;
    return step(e);
  }

  LastOp op() const { return op_; }

 private:
  struct Frame {
    bool recursive;
    const std::vector<Binding>* bindings;
  };

  struct PushGroup {
    bool recursive;
    Bindings bindings;
  };

  class PathGuard {
   public:
    PathGuard(Path& path, int index) : path_(path) { path_.push_back(index); }
    ~PathGuard() { path_.pop_back(); }
    PathGuard(const PathGuard&) = delete;
    PathGuard& operator=(const PathGuard&) = delete;

   private:
    Path& path_;
  };

  class FrameGuard {
   public:
    FrameGuard(std::vector<Frame>& frames, Frame f) : frames_(frames) { frames_.push_back(f); }
    ~FrameGuard() { frames_.pop_back(); }
    FrameGuard(const FrameGuard&) = delete;
    FrameGuard& operator=(const FrameGuard&) = delete;

   private:
    std::vector<Frame>& frames_;
  };

  void redex(LastOp op) {
    if (peek_) throw PeekFound{op, path_};
    op_ = op;
  }

  ExprPtr child(const ExprPtr& e, int index) {
    PathGuard guard(path_, index);
    return step(e);
  }

  // -------------------------------------------------------------------------
  // Variable resolution

  static bool frame_binds(const Frame& f, const std::string& name) {
    for (const auto& b : *f.bindings)
      if (const auto* n = pvar_name(b.pattern); n && *n == name) return true;
    return false;
  }

  static const ExprPtr* frame_value(const Frame& f, const std::string& name) {
    for (const auto& b : *f.bindings)
      if (const auto* n = pvar_name(b.pattern); n && *n == name) return &b.expr;
    return nullptr;
  }

  int find_frame(const std::string& name, int upto) const {
    for (int j = upto; j >= 0; --j)
      if (frame_binds(frames_[j], name)) return j;
    return -1;
  }

  bool shadowed_above(const std::string& name, int j) const {
    for (int i = j + 1; i < static_cast<int>(frames_.size()); ++i)
      if (frame_binds(frames_[i], name)) return true;
    return false;
  }

  const ExprPtr* global_value(const std::string& name) const {
    for (const EnvNode* n = base_; n; n = n->next)
      if (n->name == name) return &n->value;
    return nullptr;
  }

  // Makes a value that was bound in frame `origin` safe to use at the current
  // site. With `full`, every local free variable is pushed inside the value's
  // closures, which is what entering a captured environment requires.
  // Otherwise only variables shadowed between `origin` and the top are.
  ExprPtr close(const ExprPtr& v, int origin, bool full, const std::set<std::string>& exclude) {
    if (!v || is_value_literal(v)) return v;
    const auto fvs = free_vars(*v);
    if (fvs.empty()) return v;
    const int top = static_cast<int>(frames_.size()) - 1;
    const int upto =
        origin > top ? top : (frames_[origin].recursive ? origin : origin - 1);
    std::vector<PushGroup> groups;
    std::set<int> pushed_frames;
    for (const auto& fv : fvs) {
      if (exclude.count(fv)) continue;
      const int j = find_frame(fv, upto);
      if (j < 0) {
        if (full || !shadowed_above(fv, -1)) continue;
        if (const ExprPtr* g = global_value(fv))
          groups.push_back({false, {{fv, with_display_name(*g, fv)}}});
        continue;
      }
      if (!full && !shadowed_above(fv, j)) continue;
      const Frame& f = frames_[j];
      if (f.recursive) {
        if (!pushed_frames.insert(j).second) continue;
        std::set<std::string> names;
        for (const auto& b : *f.bindings) names.insert(*pvar_name(b.pattern));
        PushGroup g{true, {}};
        for (const auto& b : *f.bindings)
          g.bindings.emplace_back(*pvar_name(b.pattern), close(b.expr, j, full, names));
        groups.push_back(std::move(g));
      } else {
        groups.push_back({false, {{fv, close(*frame_value(f, fv), j, full, {})}}});
      }
    }
    if (groups.empty()) return v;
    return push_into(v, groups);
  }

  static bool is_value_literal(const ExprPtr& v) {
    return is<Int>(v) || is<Bool>(v) || is<Unit>(v) || is<String>(v) || is<Float>(v) ||
           is<Nil>(v);
  }

  static ExprPtr wrap_groups(const std::vector<PushGroup>& groups,
                             const std::set<std::string>& wanted, ExprPtr body) {
    for (auto it = groups.rbegin(); it != groups.rend(); ++it) {
      bool needed = false;
      for (const auto& [name, value] : it->bindings) needed = needed || wanted.count(name);
      if (!needed) continue;
      std::vector<Binding> bs;
      for (const auto& [name, value] : it->bindings)
        if (it->recursive || wanted.count(name))
          bs.push_back(Binding{make_pattern(PVar{name}), value});
      body = make(Let{it->recursive, std::move(bs), body});
    }
    return body;
  }

  // Places let groups inside every closure of the value `v` that mentions
  // them. Data structures are rebuilt around the rewritten closures.
  static ExprPtr push_into(const ExprPtr& v, const std::vector<PushGroup>& groups) {
    if (const auto* f = as<Fun>(v)) {
      if (f->env || is_builtin_fun(*f)) return v;
      const auto wanted = free_vars(*v);
      if (wanted.empty()) return v;
      Fun copy = *f;
      copy.body = wrap_groups(groups, wanted, f->body);
      return make(std::move(copy));
    }
    if (const auto* fn = as<Function>(v)) {
      if (fn->env) return v;
      Function copy = *fn;
      for (auto& c : copy.cases) {
        std::set<std::string> wanted;
        const auto bound = pattern_vars(*c.pattern);
        auto add = [&](const ExprPtr& e) {
          if (!e) return;
          for (const auto& n : free_vars(*e))
            if (std::find(bound.begin(), bound.end(), n) == bound.end()) wanted.insert(n);
        };
        add(c.body);
        add(c.guard);
        if (wanted.empty()) continue;
        c.body = wrap_groups(groups, wanted, c.body);
        if (c.guard) c.guard = wrap_groups(groups, wanted, c.guard);
      }
      return make(std::move(copy));
    }
    if (const auto* t = as<Tuple>(v)) {
      Tuple copy;
      for (const auto& item : t->items) copy.items.push_back(push_into(item, groups));
      return make(std::move(copy));
    }
    if (const auto* c = as<Cons>(v)) return make(Cons{push_into(c->head, groups), push_into(c->tail, groups)});
    if (const auto* c = as<Constr>(v)) {
      if (!c->payload) return v;
      return make(Constr{c->tag, push_into(c->payload, groups)});
    }
    if (const auto* r = as<Record>(v)) {
      for (const auto& field : r->fields) field.cell->value = push_into(field.cell->value, groups);
      return v;
    }
    return v;
  }

  ExprPtr lookup(const std::string& name) {
    const int top = static_cast<int>(frames_.size()) - 1;
    if (const int k = find_frame(name, top); k >= 0) {
      redex(LastOp::VarLookup);
      const Frame& f = frames_[k];
      ExprPtr v = *frame_value(f, name);
      std::set<std::string> exclude;
      if (f.recursive) {
        v = with_display_name(v, name);
        // Sibling names of the group stay visible unless shadowed.
        for (const auto& b : *f.bindings) {
          const auto& n = *pvar_name(b.pattern);
          if (!shadowed_above(n, k)) exclude.insert(n);
        }
      }
      return close(v, k, false, exclude);
    }
    if (const ExprPtr* g = global_value(name)) {
      redex(LastOp::VarLookup);
      return with_display_name(*g, name);
    }
    if (!name.empty() && name[0] == '%') {
      if (const auto* entry = eng_.builtin(name)) {
        redex(LastOp::VarLookup);
        return entry->value;
      }
    }
    throw RuntimeError("unbound variable " + name);
  }

  // -------------------------------------------------------------------------
  // Shared helpers

  // Operand order: variables first, leftmost first; then the remaining
  // operands right to left. Returns -1 when every operand is a value.
  static int next_operand(const std::vector<const ExprPtr*>& operands) {
    for (std::size_t i = 0; i < operands.size(); ++i)
      if (is<Var>(*operands[i])) return static_cast<int>(i);
    for (std::size_t i = operands.size(); i-- > 0;)
      if (!is_value(*operands[i])) return static_cast<int>(i);
    return -1;
  }

  bool eval_guard(const ExprPtr& guard, const Bindings& bindings, const EnvNode* env) {
    Stepper sub(eng_, false);
    if (env) {
      sub.base_ = env;
    } else {
      sub.frames_ = frames_;
      sub.base_ = base_;
    }
    ExprPtr g = wrap_lets(bindings, guard);
    while (!is_value(g)) {
      g = sub.run(g);
      mutated_ = mutated_ || sub.mutated_;
      eng_.count_step();
    }
    const auto* b = as<Bool>(g);
    if (!b) type_error("guard is not a boolean");
    return b->value;
  }

  // Tries the first case. Returns the selected body (bindings wrapped as
  // lets) or null when the case was dropped.
  ExprPtr try_first_case(const Case& c, const ExprPtr& v, const EnvNode* env = nullptr) {
    auto bindings = match_pattern(*c.pattern, v);
    if (!bindings) return nullptr;
    if (c.guard && !eval_guard(c.guard, *bindings, env)) return nullptr;
    return wrap_lets(*bindings, c.body);
  }

  ExprPtr enter_scope(const EnvNode* env, ExprPtr body) {
    if (!env) return body;
    if (is_value(body)) return set_env_deep(body, env);
    return make(Scope{env, std::move(body)});
  }

  // Argument entering a captured environment.
  ExprPtr close_argument(const ExprPtr& v) {
    const ExprPtr closed = close(v, static_cast<int>(frames_.size()), true, {});
    return set_env_deep(closed, base_);
  }

  ExprPtr invoke(const CallBuiltIn& call) {
    redex(LastOp::InsideBuiltIn);
    try {
      ExprPtr result = call.fn(eng_, call.args);
      if (!result) type_error(call.display + " returned nothing");
      return result;
    } catch (const HostException& ex) {
      return raise_value(ex.name, ex.payload);
    } catch (const RuntimeError&) {
      throw;
    } catch (const StepBudgetExceeded&) {
      throw;
    } catch (const std::exception& ex) {
      return raise_value("Failure", string_value(ex.what()));
    }
  }

  // -------------------------------------------------------------------------
  // Construct rules

  ExprPtr step(const ExprPtr& e) {
    if (is_value(e)) throw RuntimeError("internal: stepping a value");
    return std::visit([&](const auto& n) { return rule(e, n); }, e->node);
  }

  template <typename T>
  ExprPtr rule(const ExprPtr&, const T&) {
    throw RuntimeError("internal: no rule for this construct");
  }

  ExprPtr rule(const ExprPtr&, const Var& n) { return lookup(n.name); }

  ExprPtr rule(const ExprPtr&, const Op& n) {
    const int i = next_operand({&n.lhs, &n.rhs});
    if (i == 0) return make(Op{n.op, child(n.lhs, 0), n.rhs});
    if (i == 1) return make(Op{n.op, n.lhs, child(n.rhs, 1)});
    redex(LastOp::Arith);
    return fold_arith(n.op, n.lhs, n.rhs);
  }

  ExprPtr rule(const ExprPtr&, const Cmp& n) {
    const int i = next_operand({&n.lhs, &n.rhs});
    if (i == 0) return make(Cmp{n.op, child(n.lhs, 0), n.rhs});
    if (i == 1) return make(Cmp{n.op, n.lhs, child(n.rhs, 1)});
    redex(LastOp::Comparison);
    return bool_value(fold_cmp(n.op, n.lhs, n.rhs));
  }

  template <typename T>
  ExprPtr short_circuit(const T& n, bool decisive) {
    if (!is_value(n.lhs)) return make(T{child(n.lhs, 0), n.rhs});
    const auto* a = as<Bool>(n.lhs);
    if (!a) type_error("boolean operator expects booleans");
    if (a->value == decisive) {
      redex(LastOp::Boolean);
      return bool_value(decisive);
    }
    if (is_value(n.rhs)) {
      if (!is<Bool>(n.rhs)) type_error("boolean operator expects booleans");
      redex(LastOp::Boolean);
      return n.rhs;
    }
    return child(n.rhs, 1);
  }

  ExprPtr rule(const ExprPtr&, const And& n) { return short_circuit(n, false); }
  ExprPtr rule(const ExprPtr&, const Or& n) { return short_circuit(n, true); }

  ExprPtr rule(const ExprPtr&, const If& n) {
    if (!is_value(n.cond)) return make(If{child(n.cond, 0), n.then_branch, n.else_branch});
    const auto* b = as<Bool>(n.cond);
    if (!b) type_error("if condition is not a boolean");
    redex(LastOp::IfBool);
    if (b->value) return n.then_branch;
    return n.else_branch ? n.else_branch : unit_value();
  }

  ExprPtr rule(const ExprPtr& e, const Let& n) {
    for (std::size_t i = 0; i < n.bindings.size(); ++i) {
      if (is_value(n.bindings[i].expr)) continue;
      Let copy = n;
      copy.bindings[i].expr = child(n.bindings[i].expr, static_cast<int>(i));
      return make(std::move(copy));
    }
    const bool simple = std::all_of(n.bindings.begin(), n.bindings.end(),
                                    [](const Binding& b) { return pvar_name(b.pattern) != nullptr; });
    if (!simple) {
      redex(LastOp::Other);
      Bindings all;
      for (const auto& b : n.bindings) {
        auto m = match_pattern(*b.pattern, b.expr);
        if (!m) return raise_value("Match_failure");
        all.insert(all.end(), m->begin(), m->end());
      }
      if (all.empty()) return n.body;
      std::vector<Binding> bs;
      for (auto& [name, value] : all) bs.push_back(Binding{make_pattern(PVar{name}), value});
      return make(Let{n.recursive, std::move(bs), n.body});
    }
    if (is_value(n.body)) {
      redex(LastOp::Other);
      bool used = false;
      for (const auto& b : n.bindings) used = used || mentions(*n.body, *pvar_name(b.pattern));
      if (!used) return n.body;
      PushGroup g{n.recursive, {}};
      for (const auto& b : n.bindings) g.bindings.emplace_back(*pvar_name(b.pattern), b.expr);
      return push_into(n.body, {g});
    }
    ExprPtr body;
    {
      FrameGuard guard(frames_, Frame{n.recursive, &n.bindings});
      body = child(n.body, static_cast<int>(n.bindings.size()));
    }
    if (mutated_) return make(Let{n.recursive, n.bindings, body});
    std::vector<Binding> live;
    for (const auto& b : n.bindings)
      if (mentions(*body, *pvar_name(b.pattern))) live.push_back(b);
    if (n.recursive && !live.empty()) live = n.bindings;
    if (live.empty()) return body;
    (void)e;
    return make(Let{n.recursive, std::move(live), body});
  }

  ExprPtr rule(const ExprPtr&, const LetDef& n) {
    for (std::size_t i = 0; i < n.bindings.size(); ++i) {
      if (is_value(n.bindings[i].expr)) continue;
      LetDef copy = n;
      copy.bindings[i].expr = child(n.bindings[i].expr, static_cast<int>(i));
      return make(std::move(copy));
    }
    throw RuntimeError("internal: stepping a finished definition");
  }

  ExprPtr try_fast_curry(const ExprPtr& e) {
    std::vector<const App*> apps;
    ExprPtr head = e;
    while (const auto* app = as<App>(head)) {
      apps.push_back(app);
      head = app->fn;
    }
    if (apps.size() < 2 || !is_value(head) || joined_params(head) < 2) return nullptr;
    // Arguments left to right; the innermost application holds the first.
    for (std::size_t i = apps.size(); i-- > 0;) {
      if (is_value(apps[i]->arg)) continue;
      // Path to this argument: i steps down the function spine, then the argument.
      for (std::size_t d = 0; d < i; ++d) path_.push_back(0);
      ExprPtr stepped;
      try {
        stepped = child(apps[i]->arg, 1);
      } catch (...) {
        path_.resize(path_.size() - i);
        throw;
      }
      path_.resize(path_.size() - i);
      // Rebuild the spine with the new argument.
      ExprPtr rebuilt = head;
      for (std::size_t j = apps.size(); j-- > 0;)
        rebuilt = make(App{rebuilt, j == i ? stepped : apps[j]->arg});
      return rebuilt;
    }
    redex(LastOp::Other);
    const auto* f = as<Fun>(head);
    if (f->env) {
      ExprPtr rebuilt = head;
      for (std::size_t j = apps.size(); j-- > 0;)
        rebuilt = make(App{rebuilt, close_argument(apps[j]->arg)});
      return apply_fast_curry(rebuilt);
    }
    return apply_fast_curry(e);
  }

  ExprPtr rule(const ExprPtr& e, const App& n) {
    if (eng_.options_.fast_curry)
      if (ExprPtr r = try_fast_curry(e)) return r;
    if (!is_value(n.fn)) return make(App{child(n.fn, 0), n.arg});
    if (!is_value(n.arg)) return make(App{n.fn, child(n.arg, 1)});
    if (const auto* f = as<Fun>(n.fn)) {
      if (is_builtin_fun(*f)) {
        ExprPtr body = substitute_internal(f->body, *pvar_name(f->param), n.arg);
        if (const auto* call = as<CallBuiltIn>(body); call && all_values(call->args))
          return invoke(*call);
        redex(LastOp::Other);
        return body;
      }
      redex(LastOp::Other);
      ExprPtr arg = f->env ? close_argument(n.arg) : n.arg;
      ExprPtr body = make(Let{false, {Binding{f->param, arg}}, f->body});
      return enter_scope(f->env, body);
    }
    if (const auto* fn = as<Function>(n.fn)) {
      redex(LastOp::Other);
      if (fn->cases.empty()) return raise_value("Match_failure");
      const ExprPtr arg = fn->env ? close_argument(n.arg) : n.arg;
      if (ExprPtr body = try_first_case(fn->cases.front(), arg, fn->env))
        return enter_scope(fn->env, body);
      Function rest{{fn->cases.begin() + 1, fn->cases.end()}, fn->env, ""};
      return make(App{make(std::move(rest)), n.arg});
    }
    type_error("application of a non-function");
  }

  ExprPtr rule(const ExprPtr&, const Seq& n) {
    if (!is_value(n.first)) return make(Seq{child(n.first, 0), n.second});
    redex(LastOp::Other);
    return n.second;
  }

  ExprPtr rule(const ExprPtr&, const While& n) {
    if (!is_value(n.cond)) return make(While{child(n.cond, 0), n.body, n.cond_copy, n.body_copy});
    const auto* b = as<Bool>(n.cond);
    if (!b) type_error("while condition is not a boolean");
    if (!b->value) {
      redex(LastOp::Other);
      return unit_value();
    }
    if (is_value(n.body)) {
      redex(LastOp::Other);
      return make(While{n.cond_copy, n.body_copy, n.cond_copy, n.body_copy});
    }
    return make(While{n.cond, child(n.body, 1), n.cond_copy, n.body_copy});
  }

  ExprPtr rule(const ExprPtr&, const For& n) {
    if (!is_value(n.from))
      return make(For{n.var, child(n.from, 0), n.direction, n.to, n.body, n.body_copy});
    if (!is_value(n.to))
      return make(For{n.var, n.from, n.direction, child(n.to, 1), n.body, n.body_copy});
    const auto* x = as<Int>(n.from);
    const auto* y = as<Int>(n.to);
    if (!x || !y) type_error("for loop bounds must be integers");
    const bool done = n.direction == ForDirection::Up ? x->value > y->value : y->value > x->value;
    if (done) {
      redex(LastOp::Other);
      return unit_value();
    }
    if (is_value(n.body)) {
      redex(LastOp::Other);
      const std::int64_t next = n.direction == ForDirection::Up ? x->value + 1 : x->value - 1;
      return make(For{n.var, int_value(next), n.direction, n.to, n.body_copy, n.body_copy});
    }
    const std::vector<Binding> loop_var{Binding{make_pattern(PVar{n.var}), n.from}};
    ExprPtr body;
    {
      FrameGuard guard(frames_, Frame{false, &loop_var});
      body = child(n.body, 2);
    }
    return make(For{n.var, n.from, n.direction, n.to, body, n.body_copy});
  }

  ExprPtr allocate(const Record& r) {
    Record fresh;
    fresh.allocated = true;
    for (const auto& f : r.fields)
      fresh.fields.push_back(Field{f.name, std::make_shared<Cell>(Cell{f.cell->value})});
    return make(std::move(fresh));
  }

  ExprPtr rule(const ExprPtr&, const Record& n) {
    for (std::size_t i = 0; i < n.fields.size(); ++i) {
      if (is_value(n.fields[i].cell->value)) continue;
      Record copy;
      for (const auto& f : n.fields)
        copy.fields.push_back(Field{f.name, std::make_shared<Cell>(Cell{f.cell->value})});
      copy.fields[i].cell->value = child(n.fields[i].cell->value, static_cast<int>(i));
      bool complete = true;
      for (const auto& f : copy.fields) complete = complete && is_value(f.cell->value);
      if (complete) copy.allocated = true;
      return make(std::move(copy));
    }
    redex(LastOp::Other);
    return allocate(n);
  }

  static const std::shared_ptr<Cell>& field_cell(const ExprPtr& record, const std::string& field) {
    const auto* r = as<Record>(record);
    if (!r) type_error("field access on a non-record");
    for (const auto& f : r->fields)
      if (f.name == field) return f.cell;
    type_error("record has no field " + field);
  }

  ExprPtr rule(const ExprPtr&, const FieldGet& n) {
    if (const auto* var = as<Var>(n.record)) {
      // Looking up a reference and reading it is a single step.
      redex(LastOp::VarLookup);
      ExprPtr record = lookup(var->name);
      op_ = LastOp::VarLookup;
      return field_cell(record, n.field)->value;
    }
    if (!is_value(n.record)) return make(FieldGet{child(n.record, 0), n.field});
    redex(LastOp::VarLookup);
    return field_cell(n.record, n.field)->value;
  }

  ExprPtr rule(const ExprPtr&, const FieldSet& n) {
    if (!is_value(n.value)) return make(FieldSet{n.record, n.field, child(n.value, 1)});
    ExprPtr record = n.record;
    if (is<Var>(record)) {
      redex(LastOp::Other);
      record = lookup(as<Var>(record)->name);
    } else if (!is_value(record)) {
      return make(FieldSet{child(record, 0), n.field, n.value});
    } else {
      redex(LastOp::Other);
    }
    field_cell(record, n.field)->value = n.value;
    mutated_ = true;
    op_ = LastOp::Other;
    return unit_value();
  }

  ExprPtr rule(const ExprPtr&, const Tuple& n) {
    std::vector<const ExprPtr*> operands;
    for (const auto& item : n.items) operands.push_back(&item);
    const int i = next_operand(operands);
    Tuple copy = n;
    copy.items[i] = child(n.items[i], i);
    return make(std::move(copy));
  }

  ExprPtr rule(const ExprPtr&, const Cons& n) {
    const int i = next_operand({&n.head, &n.tail});
    if (i == 0) return make(Cons{child(n.head, 0), n.tail});
    return make(Cons{n.head, child(n.tail, 1)});
  }

  ExprPtr rule(const ExprPtr&, const Constr& n) { return make(Constr{n.tag, child(n.payload, 0)}); }

  ExprPtr rule(const ExprPtr&, const Raise& n) {
    if (n.payload && !is_value(n.payload)) return make(Raise{n.name, child(n.payload, 0)});
    redex(LastOp::Other);
    throw ExceptionSignal{n.name, n.payload};
  }

  ExprPtr rule(const ExprPtr&, const Match& n) {
    if (!is_value(n.scrutinee)) return make(Match{child(n.scrutinee, 0), n.cases});
    redex(LastOp::Other);
    if (n.cases.empty()) return raise_value("Match_failure");
    if (ExprPtr body = try_first_case(n.cases.front(), n.scrutinee)) return body;
    return make(Match{n.scrutinee, {n.cases.begin() + 1, n.cases.end()}});
  }

  ExprPtr rule(const ExprPtr&, const TryWith& n) {
    if (is_value(n.body)) {
      redex(LastOp::Other);
      return n.body;
    }
    ExprPtr body;
    try {
      body = child(n.body, 0);
    } catch (const ExceptionSignal& signal) {
      op_ = LastOp::Other;
      const ExprPtr exn = make(Constr{signal.name, signal.payload});
      for (const auto& c : n.cases)
        if (ExprPtr handler = try_first_case(c, exn)) return handler;
      return raise_value(signal.name, signal.payload);
    }
    if (is_value(body)) return body;
    return make(TryWith{body, n.cases});
  }

  ExprPtr rule(const ExprPtr&, const CallBuiltIn& n) {
    std::vector<const ExprPtr*> operands;
    for (const auto& a : n.args) operands.push_back(&a);
    const int i = next_operand(operands);
    if (i < 0) return invoke(n);
    CallBuiltIn copy = n;
    copy.args[i] = child(n.args[i], i);
    return make(std::move(copy));
  }

  ExprPtr rule(const ExprPtr&, const Scope& n) {
    if (is_value(n.body)) {
      redex(LastOp::Other);
      return set_env_deep(n.body, n.env);
    }
    ExprPtr body;
    {
      std::vector<Frame> saved_frames;
      saved_frames.swap(frames_);
      const EnvNode* saved_base = base_;
      base_ = n.env;
      struct Restore {
        Stepper& s;
        std::vector<Frame>& frames;
        const EnvNode* base;
        ~Restore() {
          s.frames_.swap(frames);
          s.base_ = base;
        }
      } restore{*this, saved_frames, saved_base};
      body = child(n.body, 0);
    }
    if (is_value(body)) return set_env_deep(body, n.env);
    return make(Scope{n.env, body});
  }

  Engine& eng_;
  bool peek_;
  std::vector<Frame> frames_;
  const EnvNode* base_;
  Path path_;
  LastOp op_ = LastOp::Other;
  bool mutated_ = false;
};

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

Engine::Engine(EngineOptions options) : options_(options) {}
Engine::~Engine() = default;

std::ostream& Engine::out() { return options_.out ? *options_.out : std::cout; }

void Engine::register_builtin(const std::string& key, int arity, const std::string& display,
                              BuiltinFn fn) {
  if (arity < 1) throw std::invalid_argument("builtin arity must be positive");
  if (builtins_.count(key)) throw DuplicateKey(key);
  std::vector<ExprPtr> args;
  for (int i = 0; i < arity; ++i) args.push_back(make(Var{"*" + std::to_string(i)}));
  ExprPtr body = make(CallBuiltIn{display, args, fn});
  for (int i = arity; i-- > 0;)
    body = make(Fun{make_pattern(PVar{"*" + std::to_string(i)}), body, nullptr, i > 0, ""});
  builtins_.emplace(key, BuiltinEntry{key, arity, display, std::move(fn), body});
}

const BuiltinEntry* Engine::builtin(const std::string& key) const {
  auto it = builtins_.find(key);
  return it == builtins_.end() ? nullptr : &it->second;
}

const EnvNode* Engine::extend(const EnvNode* env, std::string name, ExprPtr value) {
  arena_.push_back(std::make_unique<EnvNode>(EnvNode{std::move(name), std::move(value), env}));
  return arena_.back().get();
}

EnvNode* Engine::extend_mutable(const EnvNode* env, std::string name) {
  arena_.push_back(std::make_unique<EnvNode>(EnvNode{std::move(name), nullptr, env}));
  return arena_.back().get();
}

void Engine::define_global(const std::string& name, ExprPtr value) {
  globals_ = extend(globals_, name, set_env_deep(value, globals_));
}

std::optional<ExprPtr> Engine::lookup_global(const std::string& name) const {
  for (const EnvNode* n = globals_; n; n = n->next)
    if (n->name == name) return n->value;
  return std::nullopt;
}

void Engine::count_step() {
  if (++steps_ > options_.step_budget) throw StepBudgetExceeded(options_.step_budget);
}

StepOutcome Engine::step(const ExprPtr& e) {
  StepOutcome outcome;
  if (is_value(e)) return outcome;
  Stepper stepper(*this, false);
  try {
    outcome.expr = stepper.run(e);
    outcome.kind = StepOutcome::Kind::Next;
    outcome.op = stepper.op();
  } catch (const ExceptionSignal& signal) {
    outcome.kind = StepOutcome::Kind::Uncaught;
    outcome.exception = signal.name;
    outcome.payload = signal.payload;
    outcome.op = LastOp::Other;
  }
  count_step();
  return outcome;
}

std::optional<PeekResult> Engine::locate(const ExprPtr& e) {
  if (is_value(e)) return std::nullopt;
  Stepper stepper(*this, true);
  try {
    stepper.run(e);
  } catch (const PeekFound& found) {
    return PeekResult{found.op, found.path};
  } catch (const RuntimeError&) {
    // The real step will report the error.
  }
  return PeekResult{LastOp::Other, {}};
}

LastOp Engine::peek(const ExprPtr& e) {
  auto r = locate(e);
  return r ? r->op : LastOp::Other;
}

std::optional<std::string> Engine::install(const ExprPtr& item) {
  const auto* def = as<LetDef>(item);
  if (!def) return std::nullopt;
  if (!def->recursive) {
    const EnvNode* env = globals_;
    Bindings all;
    for (const auto& b : def->bindings) {
      auto m = match_pattern(*b.pattern, b.expr);
      if (!m) return std::string("Match_failure");
      all.insert(all.end(), m->begin(), m->end());
    }
    for (auto& [name, value] : all) globals_ = extend(globals_, name, set_env_deep(value, env));
    return std::nullopt;
  }
  std::vector<EnvNode*> nodes;
  const EnvNode* env = globals_;
  for (const auto& b : def->bindings) {
    const auto* name = pvar_name(b.pattern);
    if (!name) throw RuntimeError("let rec requires variable bindings");
    EnvNode* node = extend_mutable(env, *name);
    nodes.push_back(node);
    env = node;
  }
  for (std::size_t i = 0; i < nodes.size(); ++i)
    nodes[i]->value = set_env_deep(def->bindings[i].expr, env);
  globals_ = env;
  return std::nullopt;
}

RunResult Engine::run_to_value(ExprPtr e) {
  while (true) {
    StepOutcome o = step(e);
    switch (o.kind) {
      case StepOutcome::Kind::AlreadyValue:
        return RunResult{e, "", nullptr};
      case StepOutcome::Kind::Uncaught:
        return RunResult{nullptr, o.exception, o.payload};
      case StepOutcome::Kind::Next:
        e = o.expr;
        break;
    }
  }
}

RunResult Engine::run_program(const std::vector<ExprPtr>& items) {
  RunResult last{unit_value(), "", nullptr};
  for (const auto& item : items) {
    last = run_to_value(item);
    if (last.uncaught()) return last;
    if (auto failure = install(last.value)) return RunResult{nullptr, *failure, nullptr};
  }
  return last;
}

void Engine::load_module(const std::string& name, const std::vector<ExprPtr>& items) {
  const EnvNode* saved = globals_;
  for (const auto& item : items) {
    RunResult r = run_to_value(item);
    if (r.uncaught())
      throw RuntimeError("initialisation of module " + name + " raised " + r.exception);
    if (auto failure = install(r.value))
      throw RuntimeError("initialisation of module " + name + " raised " + *failure);
  }
  std::vector<const EnvNode*> defined;
  for (const EnvNode* n = globals_; n != saved; n = n->next) defined.push_back(n);
  globals_ = saved;
  for (auto it = defined.rbegin(); it != defined.rend(); ++it)
    globals_ = extend(globals_, name + "." + (*it)->name, (*it)->value);
}

}  // namespace stepml
