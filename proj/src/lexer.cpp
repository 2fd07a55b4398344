#include <algorithm>
#include <array>
#include <cctype>

#include "stepml/syntax.hpp"

namespace stepml {

namespace {

constexpr std::array kKeywords = {
    "and",  "as",       "begin",  "do",    "done",  "downto", "else",
    "end",  "exception", "external", "false", "for",   "fun",    "function",
    "if",   "in",       "let",    "match", "mod",   "of",     "raise",
    "rec",  "then",     "to",     "true",  "try",   "type",   "when",
    "while", "with"};

bool is_op_char(char c) {
  switch (c) {
    case '!': case '$': case '%': case '&': case '*': case '+': case '-':
    case '.': case '/': case ':': case '<': case '=': case '>': case '?':
    case '@': case '^': case '|': case '~':
      return true;
    default:
      return false;
  }
}

bool is_ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'';
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_trivia();
      if (at_end()) break;
      out.push_back(next_token());
    }
    return out;
  }

 private:
  bool at_end() const { return pos_.offset >= src_.size(); }
  char peek(std::size_t ahead = 0) const {
    const auto i = pos_.offset + ahead;
    return i < src_.size() ? src_[i] : '\0';
  }

  void advance() {
    if (src_[pos_.offset] == '\n') {
      ++pos_.line;
      pos_.column = 1;
    } else {
      ++pos_.column;
    }
    ++pos_.offset;
  }

  void skip_trivia() {
    while (!at_end()) {
      const char c = peek();
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        advance();
      } else if (c == '(' && peek(1) == '*' && peek(2) != ')') {
        skip_comment();
      } else {
        break;
      }
    }
  }

  void skip_comment() {
    const Position start = pos_;
    int depth = 0;
    do {
      if (at_end()) throw LexError(start, "unterminated comment");
      if (peek() == '(' && peek(1) == '*') {
        advance();
        advance();
        ++depth;
      } else if (peek() == '*' && peek(1) == ')') {
        advance();
        advance();
        --depth;
      } else if (peek() == '"') {
        skip_string();
      } else {
        advance();
      }
    } while (depth > 0);
  }

  void skip_string() {
    const Position start = pos_;
    advance();
    while (true) {
      if (at_end()) throw LexError(start, "unterminated string literal");
      const char c = peek();
      if (c == '\\') {
        advance();
        if (at_end()) throw LexError(start, "unterminated string literal");
        advance();
      } else if (c == '"') {
        advance();
        return;
      } else {
        advance();
      }
    }
  }

  Token make_token(TokenKind kind, Position start) const {
    return Token{kind,
                 std::string(src_.substr(start.offset, pos_.offset - start.offset)),
                 start};
  }

  Token next_token() {
    const Position start = pos_;
    const char c = peek();

    if (is_ident_start(c)) {
      while (is_ident_char(peek())) advance();
      // Qualified names such as List.map lex as one identifier.
      const bool capitalised = std::isupper(static_cast<unsigned char>(c));
      while (capitalised && peek() == '.' && is_ident_start(peek(1))) {
        advance();
        while (is_ident_char(peek())) advance();
      }
      auto tok = make_token(TokenKind::Identifier, start);
      if (std::find(kKeywords.begin(), kKeywords.end(), tok.text) !=
          kKeywords.end())
        tok.kind = TokenKind::Keyword;
      return tok;
    }

    if (std::isdigit(static_cast<unsigned char>(c))) {
      bool is_float = false;
      while (std::isdigit(static_cast<unsigned char>(peek())) || peek() == '_')
        advance();
      if (peek() == '.' && !is_op_char(peek(1))) {
        is_float = true;
        advance();
        while (std::isdigit(static_cast<unsigned char>(peek())) || peek() == '_')
          advance();
      }
      if (peek() == 'e' || peek() == 'E') {
        const char n1 = peek(1);
        const char n2 = peek(2);
        if (std::isdigit(static_cast<unsigned char>(n1)) ||
            ((n1 == '+' || n1 == '-') && std::isdigit(static_cast<unsigned char>(n2)))) {
          is_float = true;
          advance();
          if (peek() == '+' || peek() == '-') advance();
          while (std::isdigit(static_cast<unsigned char>(peek()))) advance();
        }
      }
      if (is_ident_start(peek()))
        throw LexError(pos_, "illegal character in number literal");
      return make_token(is_float ? TokenKind::Float : TokenKind::Integer, start);
    }

    if (c == '\'' && is_ident_start(peek(1))) {
      advance();  // type variable such as 'a
      while (is_ident_char(peek())) advance();
      return make_token(TokenKind::Identifier, start);
    }

    if (c == '"') {
      skip_string();
      return make_token(TokenKind::String, start);
    }

    switch (c) {
      case '(': case ')': case '[': case ']': case '{': case '}': case ',':
        advance();
        return make_token(TokenKind::Punctuation, start);
      case ';':
        advance();
        if (peek() == ';') advance();
        return make_token(TokenKind::Punctuation, start);
      default:
        break;
    }

    if (is_op_char(c)) {
      while (is_op_char(peek())) advance();
      auto tok = make_token(TokenKind::Operator, start);
      if (tok.text == "|") tok.kind = TokenKind::Punctuation;
      return tok;
    }

    throw LexError(start, std::string("illegal character '") + c + "'");
  }

  std::string_view src_;
  Position pos_;
};

std::string describe(Position pos) {
  return std::to_string(pos.line) + ":" + std::to_string(pos.column);
}

}  // namespace

LexError::LexError(Position pos, const std::string& message)
    : std::runtime_error(describe(pos) + ": " + message), position(pos) {}

std::vector<Token> lex(std::string_view source) { return Lexer(source).run(); }

bool is_keyword(std::string_view word) {
  return std::find(kKeywords.begin(), kKeywords.end(), word) != kKeywords.end();
}

}  // namespace stepml
