#include "stepml/search.hpp"

#include <cctype>

#include "stepml/syntax.hpp"

namespace stepml {

namespace {

// Any single token of the surface language.
const char* const kAnyToken =
    "(?:[A-Za-z_][A-Za-z0-9_']*(?:\\.[A-Za-z_][A-Za-z0-9_']*)*"
    "|[0-9][0-9_]*(?:\\.[0-9_]*)?(?:[eE][+-]?[0-9]+)?"
    "|\"(?:[^\"\\\\]|\\\\.)*\""
    "|[!$%&*+\\-./:<=>?@^|~]+"
    "|;;?|[()\\[\\]{},])";

bool is_word(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'';
}

std::string escape(const std::string& text) {
  static const std::string special = "\\^$.|?*+()[]{}/";
  std::string out;
  for (char c : text) {
    if (special.find(c) != std::string::npos) out += '\\';
    out += c;
  }
  return out;
}

bool is_paren(const Token& t) {
  return t.kind == TokenKind::Punctuation && (t.text == "(" || t.text == ")");
}

}  // namespace

CompiledPattern::CompiledPattern(const std::string& text, PatternFlags flags)
    : source_(text), flags_(flags) {
  if (flags.regexp) {
    regex_text_ = text;
  } else {
    std::vector<Token> tokens;
    try {
      tokens = lex(text);
    } catch (const LexError& e) {
      throw PatternError("cannot lex search pattern: " + std::string(e.what()));
    }
    bool first = true;
    for (const auto& t : tokens) {
      if (flags.no_parens && is_paren(t)) continue;
      if (!first) regex_text_ += "\\s*";
      first = false;
      if (t.kind == TokenKind::Identifier && t.text == "_") {
        regex_text_ += kAnyToken;
        continue;
      }
      if (is_word(t.text.front())) regex_text_ += "\\b";
      regex_text_ += escape(t.text);
      if (is_word(t.text.back())) regex_text_ += "\\b";
    }
    if (first) throw PatternError("empty search pattern");
  }
  try {
    regex_ = std::regex(regex_text_, std::regex::ECMAScript);
  } catch (const std::regex_error& e) {
    throw PatternError("bad regular expression '" + regex_text_ + "': " + e.what());
  }
}

std::string CompiledPattern::prepare(const std::string& line) const {
  if (!flags_.no_parens) return line;
  std::string out = line;
  for (char& c : out)
    if (c == '(' || c == ')') c = ' ';
  return out;
}

bool CompiledPattern::matches(const std::string& line) const {
  return std::regex_search(prepare(line), regex_);
}

std::vector<Span> CompiledPattern::find_all(const std::string& line) const {
  std::vector<Span> spans;
  const std::string target = prepare(line);
  for (auto it = std::sregex_iterator(target.begin(), target.end(), regex_);
       it != std::sregex_iterator(); ++it) {
    const auto begin = static_cast<std::size_t>(it->position());
    const auto length = static_cast<std::size_t>(it->length());
    if (length > 0) spans.push_back(Span{begin, begin + length});
  }
  return spans;
}

CompiledPattern compile_pattern(const std::string& text, PatternFlags flags) {
  return CompiledPattern(text, flags);
}

SearchFilter::SearchFilter(const SearchSpec& spec, std::function<void(const FilteredLine&)> out)
    : spec_(spec), out_(std::move(out)) {
  search_ = compile(spec.search);
  until_ = compile(spec.until);
  after_ = compile(spec.after);
  until_any_ = compile(spec.until_any);
  after_any_ = compile(spec.after_any);
  open_ = after_.empty() && after_any_.empty();
  if (spec.n == 0) stop_ = spec.stop;
}

std::vector<CompiledPattern> SearchFilter::compile(const std::vector<std::string>& texts) const {
  std::vector<CompiledPattern> out;
  for (const auto& t : texts) out.push_back(compile_pattern(t, {spec_.no_parens, spec_.regexp}));
  return out;
}

bool SearchFilter::any_match(const std::vector<CompiledPattern>& ps, const std::string& text) {
  for (const auto& p : ps)
    if (p.matches(text)) return true;
  return false;
}

bool SearchFilter::wants_shadow() const { return !until_any_.empty() || !after_any_.empty(); }

void SearchFilter::open_window() {
  if (!finished_) open_ = true;
}

void SearchFilter::close_window() {
  if (!open_) return;
  open_ = false;
  context_.clear();
  if (!spec_.repeat || (after_.empty() && after_any_.empty())) {
    finished_ = true;
    if (spec_.stop) stop_ = true;
  }
}

void SearchFilter::shadow(const TraceLine& line) {
  if (close_pending_) {
    close_pending_ = false;
    close_window();
  }
  const std::string text = plain_line(line, 0);
  if (!open_ && !after_any_.empty() && any_match(after_any_, text) != spec_.invert_after)
    open_window();
  if (open_ && !until_any_.empty() && any_match(until_any_, text) != spec_.invert_until) {
    close_pending_ = true;
    close_step_ = line.step_index;
  }
}

void SearchFilter::line(const TraceLine& line) {
  gutter_width_ = std::max(gutter_width_, line.gutter.empty() ? 0 : line.gutter.size() + 1);
  const std::string text = plain_line(line, gutter_width_);

  if (!open_ && !after_.empty() && any_match(after_, text) != spec_.invert_after) open_window();

  if (open_ && !finished_) {
    FilteredLine out{line, gutter_width_, {}, false};
    bool selected = true;
    if (!search_.empty()) selected = any_match(search_, text) != spec_.invert_search;
    const bool limited = spec_.n >= 0 && results_ >= spec_.n;
    if (selected && !limited) {
      if (spec_.highlight && !spec_.invert_search) {
        for (const auto& p : search_) {
          auto spans = p.find_all(text);
          out.highlights.insert(out.highlights.end(), spans.begin(), spans.end());
        }
      }
      for (const auto& c : context_) out_(c);
      context_.clear();
      emit(out);
    } else if (!limited && spec_.upto > 0) {
      out.context = true;
      context_.push_back(out);
      if (context_.size() > static_cast<std::size_t>(spec_.upto)) context_.erase(context_.begin());
    }
    if (!until_.empty() && any_match(until_, text) != spec_.invert_until) close_window();
  }

  if (close_pending_ && close_step_ == line.step_index) {
    close_pending_ = false;
    close_window();
  }
}

void SearchFilter::emit(const FilteredLine& line) {
  out_(line);
  ++results_;
  if (spec_.stop && spec_.n >= 0 && results_ >= spec_.n) stop_ = true;
}

}  // namespace stepml
