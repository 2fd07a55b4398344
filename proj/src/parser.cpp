#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>

#include "stepml/syntax.hpp"

namespace stepml {

namespace {

std::string join(const std::vector<std::string>& items, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::string describe_position(Position pos) {
  return std::to_string(pos.line) + ":" + std::to_string(pos.column);
}

bool is_capitalised(const std::string& s) {
  return !s.empty() && std::isupper(static_cast<unsigned char>(s[0]));
}

// "List" or "Some" are constructors / module paths; "List.map" is a value.
bool is_constructor_name(const std::string& s) {
  if (!is_capitalised(s)) return false;
  const auto dot = s.rfind('.');
  return dot == std::string::npos || is_capitalised(s.substr(dot + 1));
}

std::string unescape_string(const Token& tok) {
  const std::string& t = tok.text;
  std::string out;
  for (std::size_t i = 1; i + 1 < t.size(); ++i) {
    char c = t[i];
    if (c != '\\') {
      out += c;
      continue;
    }
    c = t[++i];
    switch (c) {
      case 'n': out += '\n'; break;
      case 't': out += '\t'; break;
      case 'r': out += '\r'; break;
      case 'b': out += '\b'; break;
      case '\\': out += '\\'; break;
      case '"': out += '"'; break;
      case '\'': out += '\''; break;
      case ' ': out += ' '; break;
      case '\n':
        while (i + 2 < t.size() && (t[i + 1] == ' ' || t[i + 1] == '\t')) ++i;
        break;
      default:
        if (std::isdigit(static_cast<unsigned char>(c)) && i + 2 < t.size()) {
          out += static_cast<char>(std::stoi(t.substr(i, 3)));
          i += 2;
        } else {
          throw LexError(tok.position, std::string("bad escape \\") + c);
        }
    }
  }
  return out;
}

class Parser {
 public:
  explicit Parser(const std::vector<Token>& tokens) : toks_(tokens) {}

  std::vector<ExprPtr> program() {
    std::vector<ExprPtr> items;
    skip_double_semis();
    while (!at_end()) {
      items.push_back(structure_item());
      skip_double_semis();
    }
    return items;
  }

  ExprPtr whole_expression() {
    auto e = seq_expr();
    if (!at_end()) fail({"end of input"});
    return e;
  }

 private:
  // -------------------------------------------------------------------------
  // Token helpers

  bool at_end() const { return pos_ >= toks_.size(); }
  const Token* peek(std::size_t ahead = 0) const {
    return pos_ + ahead < toks_.size() ? &toks_[pos_ + ahead] : nullptr;
  }
  bool at(std::string_view text, std::size_t ahead = 0) const {
    const Token* t = peek(ahead);
    return t && t->text == text && t->kind != TokenKind::String;
  }
  bool at_kind(TokenKind kind, std::size_t ahead = 0) const {
    const Token* t = peek(ahead);
    return t && t->kind == kind;
  }
  bool accept(std::string_view text) {
    if (!at(text)) return false;
    ++pos_;
    return true;
  }
  const Token& expect(std::string_view text) {
    if (!at(text)) fail({"'" + std::string(text) + "'"});
    return toks_[pos_++];
  }
  const Token& advance() { return toks_[pos_++]; }

  Position current_position() const {
    if (!at_end()) return toks_[pos_].position;
    if (toks_.empty()) return Position{};
    Position p = toks_.back().position;
    p.offset += toks_.back().text.size();
    p.column += static_cast<int>(toks_.back().text.size());
    return p;
  }

  [[noreturn]] void fail(std::vector<std::string> expected) const {
    throw ParseError(current_position(), std::move(expected),
                     at_end() ? "end of input" : toks_[pos_].text);
  }

  void skip_double_semis() {
    while (accept(";;")) {
    }
  }

  bool is_lower_ident(std::size_t ahead = 0) const {
    const Token* t = peek(ahead);
    return t && t->kind == TokenKind::Identifier && !is_constructor_name(t->text) &&
           t->text[0] != '\'';
  }

  bool is_constructor(std::size_t ahead = 0) const {
    const Token* t = peek(ahead);
    return t && t->kind == TokenKind::Identifier && is_constructor_name(t->text);
  }

  // -------------------------------------------------------------------------
  // Structure items

  ExprPtr structure_item() {
    if (at("let")) {
      const std::size_t mark = pos_;
      advance();
      const bool rec = accept("rec");
      auto bindings = let_bindings();
      if (accept("in")) {
        pos_ = mark;
        return wrap_expression(seq_expr());
      }
      check_recursive_bindings(rec, bindings);
      return make(LetDef{rec, std::move(bindings)});
    }
    if (at("type")) return type_definition();
    if (at("exception")) return exception_definition();
    if (at("external")) return external_definition();
    return wrap_expression(seq_expr());
  }

  static ExprPtr wrap_expression(ExprPtr e) {
    return make(LetDef{false, {Binding{make_pattern(PAny{}), std::move(e)}}});
  }

  void check_recursive_bindings(bool rec, const std::vector<Binding>& bindings) {
    if (!rec) return;
    for (const auto& b : bindings) {
      if (!std::holds_alternative<PVar>(b.pattern->node))
        throw ParseError(current_position(), {"variable name"},
                         "pattern in let rec");
    }
  }

  bool at_item_boundary() const {
    return at_end() || at(";;") || at("let") || at("type") ||
           at("exception") || at("external");
  }

  // Type expressions are kept as normalised text; the interpreter is untyped.
  std::string type_text(bool stop_at_bar) {
    std::vector<std::string> parts;
    int depth = 0;
    while (!at_end()) {
      if (depth == 0 && (at_item_boundary() || at("=") || at("in") ||
                         (stop_at_bar && at("|")) || at(")") || at("]")))
        break;
      if (at("(") || at("[") || at("{")) ++depth;
      if (at(")") || at("]") || at("}")) --depth;
      parts.push_back(advance().text);
    }
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const auto& p = parts[i];
      const bool tight_before = p == ")" || p == "," || p == ";" || p == "}";
      const bool prev_open = i > 0 && (parts[i - 1] == "(" || parts[i - 1] == "{");
      if (i > 0 && !tight_before && !prev_open) out += ' ';
      out += p;
    }
    return out;
  }

  ExprPtr type_definition() {
    expect("type");
    accept("nonrec");
    TypeDef def;
    if (at("(")) {
      std::vector<std::string> params;
      advance();
      while (!at(")")) {
        if (at_end()) fail({"')'"});
        params.push_back(advance().text);
      }
      advance();
      std::string text = "(";
      for (const auto& p : params) text += (p == "," ? ", " : p);
      def.params = text + ") ";
    } else if (at_kind(TokenKind::Identifier) && peek()->text[0] == '\'') {
      def.params = advance().text + " ";
    }
    if (!at_kind(TokenKind::Identifier)) fail({"type name"});
    def.name = advance().text;
    expect("=");
    if (at("|") || is_constructor()) {
      accept("|");
      do {
        if (!is_constructor()) fail({"constructor name"});
        TypeConstructor ctor{advance().text, ""};
        if (accept("of")) ctor.payload_type = type_text(true);
        def.constructors.push_back(std::move(ctor));
      } while (accept("|"));
    } else {
      def.manifest = type_text(false);
    }
    return make(std::move(def));
  }

  ExprPtr exception_definition() {
    expect("exception");
    if (!is_constructor()) fail({"exception name"});
    ExceptionDef def{advance().text, 0, ""};
    if (accept("of")) {
      def.arity = 1;
      def.payload_type = type_text(false);
    }
    return make(std::move(def));
  }

  ExprPtr external_definition() {
    expect("external");
    std::string name;
    if (accept("(")) {
      if (at_end()) fail({"operator"});
      name = advance().text;
      expect(")");
    } else {
      // `raise` is a keyword but is also defined as an ordinary function.
      if (!is_lower_ident() && !at("raise")) fail({"identifier"});
      name = advance().text;
    }
    expect(":");
    type_text(false);
    expect("=");
    if (!at_kind(TokenKind::String)) fail({"primitive name string"});
    const std::string key = unescape_string(advance());
    while (at_kind(TokenKind::String)) advance();
    return make(LetDef{false, {Binding{make_pattern(PVar{name}), make(Var{key})}}});
  }

  // -------------------------------------------------------------------------
  // Expressions, loosest first

  bool at_sequence_end() const {
    return at_end() || at("in") || at("done") || at("end") || at(")") ||
           at("]") || at("}") || at("|") || at("with") || at(";;") ||
           at("then") || at("else") || at("do") || at("and") ||
           at_item_boundary();
  }

  ExprPtr seq_expr() {
    auto first = assign_expr();
    if (at(";")) {
      advance();
      if (at_sequence_end()) return first;
      return make(Seq{first, seq_expr()});
    }
    return first;
  }

  ExprPtr assign_expr() {
    auto lhs = tuple_expr();
    if (accept(":=")) return make(FieldSet{lhs, "contents", assign_expr()});
    if (at("<-")) {
      const auto* get = as<FieldGet>(lhs);
      if (!get) fail({"record field before '<-'"});
      advance();
      return make(FieldSet{get->record, get->field, assign_expr()});
    }
    return lhs;
  }

  ExprPtr tuple_expr() {
    auto first = or_expr();
    if (!at(",")) return first;
    std::vector<ExprPtr> items{first};
    while (accept(",")) items.push_back(or_expr());
    return make(Tuple{std::move(items)});
  }

  ExprPtr or_expr() {
    auto lhs = and_expr();
    if (accept("||") || accept("or")) return make(Or{lhs, or_expr()});
    return lhs;
  }

  ExprPtr and_expr() {
    auto lhs = cmp_expr();
    if (accept("&&") || accept("&")) return make(And{lhs, and_expr()});
    return lhs;
  }

  std::optional<CmpOp> cmp_op() const {
    if (!at_kind(TokenKind::Operator)) return std::nullopt;
    const auto& t = peek()->text;
    if (t == "=" || t == "==") return CmpOp::Eq;
    if (t == "<>" || t == "!=") return CmpOp::Ne;
    if (t == "<") return CmpOp::Lt;
    if (t == ">") return CmpOp::Gt;
    if (t == "<=") return CmpOp::Le;
    if (t == ">=") return CmpOp::Ge;
    return std::nullopt;
  }

  ExprPtr cmp_expr() {
    auto lhs = append_expr();
    while (auto op = cmp_op()) {
      advance();
      lhs = make(Cmp{*op, lhs, append_expr()});
    }
    return lhs;
  }

  ExprPtr append_expr() {
    auto lhs = cons_expr();
    if (accept("@")) {
      auto rhs = append_expr();
      return make(App{make(App{make(Var{"@"}), lhs}), rhs});
    }
    if (accept("^")) return make(Op{ArithOp::Concat, lhs, append_expr()});
    return lhs;
  }

  ExprPtr cons_expr() {
    auto head = add_expr();
    if (accept("::")) return make(Cons{head, cons_expr()});
    return head;
  }

  ExprPtr add_expr() {
    auto lhs = mul_expr();
    while (true) {
      ArithOp op;
      if (at("+")) op = ArithOp::Add;
      else if (at("-")) op = ArithOp::Sub;
      else if (at("+.")) op = ArithOp::FAdd;
      else if (at("-.")) op = ArithOp::FSub;
      else return lhs;
      advance();
      lhs = make(Op{op, lhs, mul_expr()});
    }
  }

  ExprPtr mul_expr() {
    auto lhs = unary_expr();
    while (true) {
      ArithOp op;
      if (at("*")) op = ArithOp::Mul;
      else if (at("/")) op = ArithOp::Div;
      else if (at("*.")) op = ArithOp::FMul;
      else if (at("/.")) op = ArithOp::FDiv;
      else if (at("mod")) op = ArithOp::Mod;
      else return lhs;
      advance();
      lhs = make(Op{op, lhs, unary_expr()});
    }
  }

  ExprPtr unary_expr() {
    if (at("-") || at("-.")) {
      const bool is_float = at("-.");
      advance();
      if (!is_float && at_kind(TokenKind::Integer)) return int_literal(true);
      if (at_kind(TokenKind::Float)) return float_literal(true);
      auto operand = unary_expr();
      if (is_float) return make(Op{ArithOp::FSub, make(Float{0.0}), operand});
      return make(Op{ArithOp::Sub, make(Int{0}), operand});
    }
    return app_expr();
  }

  bool starts_argument() const {
    const Token* t = peek();
    if (!t) return false;
    switch (t->kind) {
      case TokenKind::Integer:
      case TokenKind::Float:
      case TokenKind::String:
        return true;
      case TokenKind::Identifier:
        return t->text[0] != '\'';
      case TokenKind::Keyword:
        return t->text == "true" || t->text == "false" || t->text == "begin";
      case TokenKind::Punctuation:
        return t->text == "(" || t->text == "[" || t->text == "{";
      case TokenKind::Operator:
        return t->text == "!";
    }
    return false;
  }

  ExprPtr app_expr() {
    if (at("let")) return let_expr();
    if (at("if")) return if_expr();
    if (at("match")) return match_expr();
    if (at("try")) return try_expr();
    if (at("fun")) return fun_expr();
    if (at("function")) return function_expr();
    if (at("raise")) {
      advance();
      if (!starts_argument()) fail({"exception"});
      auto arg = simple_expr();
      if (const auto* c = as<Constr>(arg)) return make(Raise{c->tag, c->payload});
      return make(App{make(Var{"raise"}), arg});
    }
    if (is_constructor()) {
      const std::string tag = advance().text;
      ExprPtr payload;
      if (starts_argument()) payload = simple_expr();
      return make(Constr{tag, payload});
    }
    auto head = simple_expr();
    while (starts_argument()) head = make(App{head, simple_expr()});
    return head;
  }

  ExprPtr simple_expr() {
    if (accept("!")) return make(FieldGet{simple_expr(), "contents"});
    auto e = atom();
    while (at(".") && is_lower_ident(1)) {
      advance();
      e = make(FieldGet{e, advance().text});
    }
    return e;
  }

  ExprPtr int_literal(bool negative) {
    const Token& tok = advance();
    std::string digits;
    for (char c : tok.text)
      if (c != '_') digits += c;
    if (negative) digits.insert(digits.begin(), '-');
    std::int64_t value = 0;
    auto [ptr, ec] =
        std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (ec != std::errc() || ptr != digits.data() + digits.size())
      throw ParseError(tok.position, {"integer in 64-bit range"}, tok.text);
    return make(Int{value});
  }

  ExprPtr float_literal(bool negative) {
    const Token& tok = advance();
    std::string digits;
    for (char c : tok.text)
      if (c != '_') digits += c;
    double value = std::strtod(digits.c_str(), nullptr);
    return make(Float{negative ? -value : value});
  }

  ExprPtr atom() {
    const Token* t = peek();
    if (!t) fail({"expression"});
    switch (t->kind) {
      case TokenKind::Integer:
        return int_literal(false);
      case TokenKind::Float:
        return float_literal(false);
      case TokenKind::String:
        return make(String{unescape_string(advance())});
      case TokenKind::Identifier:
        if (t->text == "_" || t->text[0] == '\'') fail({"expression"});
        if (is_constructor_name(t->text)) return make(Constr{advance().text, nullptr});
        return make(Var{advance().text});
      default:
        break;
    }
    if (accept("true")) return make(Bool{true});
    if (accept("false")) return make(Bool{false});
    if (at("(")) {
      advance();
      if (accept(")")) return make(Unit{});
      if (at_kind(TokenKind::Operator) && at(")", 1)) {
        const std::string op = advance().text;
        advance();
        return make(Var{op});
      }
      auto inner = seq_expr();
      expect(")");
      return inner;
    }
    if (at("begin")) {
      advance();
      if (accept("end")) return make(Unit{});
      auto inner = seq_expr();
      expect("end");
      return inner;
    }
    if (at("[")) {
      advance();
      std::vector<ExprPtr> items;
      while (!at("]")) {
        items.push_back(assign_expr());
        if (!accept(";")) break;
      }
      expect("]");
      return list_value(items);
    }
    if (at("{")) {
      advance();
      Record record;
      while (!at("}")) {
        if (!is_lower_ident()) fail({"field name"});
        std::string name = advance().text;
        expect("=");
        record.fields.push_back(
            Field{std::move(name), std::make_shared<Cell>(Cell{assign_expr()})});
        if (!accept(";")) break;
      }
      expect("}");
      if (record.fields.empty()) fail({"field name"});
      return make(std::move(record));
    }
    if (at("while")) {
      advance();
      auto cond = seq_expr();
      expect("do");
      auto body = at("done") ? make(Unit{}) : seq_expr();
      expect("done");
      return make(While{cond, body, cond, body});
    }
    if (at("for")) {
      advance();
      if (!is_lower_ident()) fail({"loop variable"});
      std::string var = advance().text;
      expect("=");
      auto from = seq_expr();
      ForDirection dir;
      if (accept("to")) dir = ForDirection::Up;
      else if (accept("downto")) dir = ForDirection::Down;
      else fail({"'to'", "'downto'"});
      auto to = seq_expr();
      expect("do");
      auto body = at("done") ? make(Unit{}) : seq_expr();
      expect("done");
      return make(For{std::move(var), from, dir, to, body, body});
    }
    fail({"expression"});
  }

  ExprPtr let_expr() {
    expect("let");
    const bool rec = accept("rec");
    auto bindings = let_bindings();
    check_recursive_bindings(rec, bindings);
    expect("in");
    return make(Let{rec, std::move(bindings), seq_expr()});
  }

  std::vector<Binding> let_bindings() {
    std::vector<Binding> bindings;
    do {
      bindings.push_back(let_binding());
    } while (accept("and"));
    return bindings;
  }

  Binding let_binding() {
    // Function sugar: `f x y = e` or `( op ) x y = e`.
    std::optional<std::string> fname;
    if (is_lower_ident() && !at("=", 1) && !at(",", 1) && !at("::", 1) &&
        !at(":", 1) && !at("|", 1)) {
      fname = advance().text;
    } else if (at("(") && at_kind(TokenKind::Operator, 1) && at(")", 2)) {
      advance();
      fname = advance().text;
      advance();
    }
    if (fname) {
      std::vector<PatternPtr> params;
      while (!at("=")) {
        if (at_end()) fail({"'='"});
        params.push_back(atom_pattern());
      }
      expect("=");
      auto body = seq_expr();
      return Binding{make_pattern(PVar{*fname}), curried(params, body)};
    }
    auto pattern = parse_pattern();
    expect("=");
    return Binding{pattern, seq_expr()};
  }

  static ExprPtr curried(const std::vector<PatternPtr>& params, ExprPtr body) {
    for (std::size_t i = params.size(); i-- > 0;)
      body = make(Fun{params[i], body, nullptr, i > 0, ""});
    return body;
  }

  ExprPtr if_expr() {
    expect("if");
    auto cond = seq_expr();
    expect("then");
    auto then_branch = assign_expr();
    ExprPtr else_branch;
    if (accept("else")) else_branch = assign_expr();
    return make(If{cond, then_branch, else_branch});
  }

  ExprPtr match_expr() {
    expect("match");
    auto scrutinee = seq_expr();
    expect("with");
    return make(Match{scrutinee, cases()});
  }

  ExprPtr try_expr() {
    expect("try");
    auto body = seq_expr();
    expect("with");
    return make(TryWith{body, cases()});
  }

  ExprPtr fun_expr() {
    expect("fun");
    std::vector<PatternPtr> params;
    while (!at("->")) {
      if (at_end()) fail({"'->'"});
      params.push_back(atom_pattern());
    }
    if (params.empty()) fail({"parameter"});
    expect("->");
    return curried(params, seq_expr());
  }

  ExprPtr function_expr() {
    expect("function");
    return make(Function{cases(), nullptr, ""});
  }

  std::vector<Case> cases() {
    std::vector<Case> out;
    accept("|");
    do {
      auto pattern = parse_pattern();
      ExprPtr guard;
      if (accept("when")) guard = seq_expr();
      expect("->");
      out.push_back(Case{pattern, guard, seq_expr()});
    } while (accept("|"));
    return out;
  }

  // -------------------------------------------------------------------------
  // Patterns

  PatternPtr parse_pattern() {
    const Position start = current_position();
    auto p = or_pattern();
    auto vars = pattern_vars(*p);
    std::sort(vars.begin(), vars.end());
    if (std::adjacent_find(vars.begin(), vars.end()) != vars.end())
      throw ParseError(start, {"linear pattern"}, "variable bound twice");
    return p;
  }

  PatternPtr or_pattern() {
    auto left = tuple_pattern();
    while (at("|") && !at("->", 1)) {
      const Position where = current_position();
      advance();
      auto right = tuple_pattern();
      auto lv = pattern_vars(*left);
      auto rv = pattern_vars(*right);
      std::sort(lv.begin(), lv.end());
      std::sort(rv.begin(), rv.end());
      if (lv != rv)
        throw ParseError(where, {"or-pattern arms binding the same variables"},
                         "|");
      left = make_pattern(POr{left, right});
    }
    return left;
  }

  PatternPtr tuple_pattern() {
    auto first = cons_pattern();
    if (!at(",")) return first;
    std::vector<PatternPtr> items{first};
    while (accept(",")) items.push_back(cons_pattern());
    return make_pattern(PTuple{std::move(items)});
  }

  PatternPtr cons_pattern() {
    auto head = constr_pattern();
    if (accept("::")) return make_pattern(PCons{head, cons_pattern()});
    return head;
  }

  bool starts_atom_pattern() const {
    const Token* t = peek();
    if (!t) return false;
    switch (t->kind) {
      case TokenKind::Integer:
      case TokenKind::String:
        return true;
      case TokenKind::Identifier:
        return t->text[0] != '\'';
      case TokenKind::Keyword:
        return t->text == "true" || t->text == "false";
      case TokenKind::Punctuation:
        return t->text == "(" || t->text == "[";
      case TokenKind::Operator:
        return t->text == "-";
      default:
        return false;
    }
  }

  PatternPtr constr_pattern() {
    if (is_constructor()) {
      std::string tag = advance().text;
      PatternPtr payload;
      if (starts_atom_pattern()) payload = atom_pattern();
      return make_pattern(PConstr{std::move(tag), payload});
    }
    return atom_pattern();
  }

  PatternPtr atom_pattern() {
    const Token* t = peek();
    if (!t) fail({"pattern"});
    if (t->kind == TokenKind::Integer) {
      auto e = int_literal(false);
      return make_pattern(PInt{as<Int>(e)->value});
    }
    if (at("-") && at_kind(TokenKind::Integer, 1)) {
      advance();
      auto e = int_literal(true);
      return make_pattern(PInt{as<Int>(e)->value});
    }
    if (t->kind == TokenKind::String)
      return make_pattern(PString{unescape_string(advance())});
    if (t->kind == TokenKind::Identifier) {
      if (t->text == "_") {
        advance();
        return make_pattern(PAny{});
      }
      if (is_constructor_name(t->text))
        return make_pattern(PConstr{advance().text, nullptr});
      if (t->text.find('.') != std::string::npos || t->text[0] == '\'')
        fail({"pattern"});
      return make_pattern(PVar{advance().text});
    }
    if (accept("true")) return make_pattern(PBool{true});
    if (accept("false")) return make_pattern(PBool{false});
    if (accept("(")) {
      if (accept(")")) return make_pattern(PUnit{});
      auto inner = or_pattern();
      if (accept(":")) type_text(false);
      expect(")");
      return inner;
    }
    if (accept("[")) {
      std::vector<PatternPtr> items;
      while (!at("]")) {
        items.push_back(or_pattern());
        if (!accept(";")) break;
      }
      expect("]");
      PatternPtr result = make_pattern(PNil{});
      for (auto it = items.rbegin(); it != items.rend(); ++it)
        result = make_pattern(PCons{*it, result});
      return result;
    }
    fail({"pattern"});
  }

  const std::vector<Token>& toks_;
  std::size_t pos_ = 0;
};

}  // namespace

ParseError::ParseError(Position pos, std::vector<std::string> expected_set,
                       const std::string& found)
    : std::runtime_error(describe_position(pos) + ": expected " +
                         join(expected_set, " or ") + " but found " + found),
      position(pos),
      expected(std::move(expected_set)) {}

std::vector<ExprPtr> parse_program(const std::vector<Token>& tokens) {
  return Parser(tokens).program();
}

std::vector<ExprPtr> parse_program(std::string_view source) {
  return parse_program(lex(source));
}

ExprPtr parse_expr(const std::vector<Token>& tokens) {
  return Parser(tokens).whole_expression();
}

ExprPtr parse_expr(std::string_view source) { return parse_expr(lex(source)); }

}  // namespace stepml
