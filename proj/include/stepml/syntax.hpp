#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "stepml/expr.hpp"

namespace stepml {

struct Position {
  int line = 1;
  int column = 1;
  std::size_t offset = 0;  // byte offset into the source
};

enum class TokenKind {
  Identifier,
  Integer,
  Float,
  String,
  Keyword,
  Operator,
  Punctuation,
};

struct Token {
  TokenKind kind;
  std::string text;  // exact source slice
  Position position;

  bool is(TokenKind k, std::string_view t) const { return kind == k && text == t; }
};

class LexError : public std::runtime_error {
 public:
  LexError(Position pos, const std::string& message);
  Position position;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(Position pos, std::vector<std::string> expected,
             const std::string& found);
  Position position;
  std::vector<std::string> expected;
};

std::vector<Token> lex(std::string_view source);

/// Structure items in order. A bare expression becomes `LetDef(false, [(_, e)])`.
std::vector<ExprPtr> parse_program(const std::vector<Token>& tokens);
std::vector<ExprPtr> parse_program(std::string_view source);

ExprPtr parse_expr(const std::vector<Token>& tokens);
ExprPtr parse_expr(std::string_view source);

bool is_keyword(std::string_view word);

}  // namespace stepml
