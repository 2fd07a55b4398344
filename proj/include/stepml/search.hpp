#pragma once

#include <functional>
#include <regex>
#include <stdexcept>
#include <string>
#include <vector>

#include "stepml/render.hpp"

namespace stepml {

class PatternError : public std::runtime_error {
 public:
  explicit PatternError(const std::string& message) : std::runtime_error(message) {}
};

struct PatternFlags {
  bool no_parens = false;
  bool regexp = false;
};

/// A search pattern turned into a regular expression over rendered lines.
class CompiledPattern {
 public:
  CompiledPattern(const std::string& text, PatternFlags flags);

  const std::string& source() const { return source_; }
  const std::string& regex_text() const { return regex_text_; }

  bool matches(const std::string& line) const;
  /// Every non-overlapping occurrence, as byte ranges into `line`.
  std::vector<Span> find_all(const std::string& line) const;

 private:
  std::string prepare(const std::string& line) const;

  std::string source_;
  std::string regex_text_;
  std::regex regex_;
  PatternFlags flags_;
};

CompiledPattern compile_pattern(const std::string& text, PatternFlags flags = {});

struct SearchSpec {
  std::vector<std::string> search;
  std::vector<std::string> until;
  std::vector<std::string> after;
  std::vector<std::string> until_any;
  std::vector<std::string> after_any;
  bool highlight = false;
  bool no_parens = false;
  bool regexp = false;
  bool invert_search = false;
  bool invert_after = false;
  bool invert_until = false;
  bool stop = false;
  bool repeat = false;
  long n = -1;     // negative means unlimited
  int upto = 0;
};

/// One line leaving the filter.
struct FilteredLine {
  TraceLine line;
  std::size_t gutter_width = 0;
  std::vector<Span> highlights;  // offsets into plain_line(line, gutter_width)
  bool context = false;          // emitted because of -upto
};

/// A trace sink that applies search, windows, limits and highlighting, and
/// forwards surviving lines to `out`. With an empty spec everything passes.
class SearchFilter : public TraceSink {
 public:
  SearchFilter(const SearchSpec& spec, std::function<void(const FilteredLine&)> out);

  void line(const TraceLine& line) override;
  void shadow(const TraceLine& line) override;
  bool wants_shadow() const override;
  bool stop_requested() const override { return stop_; }

  long results() const { return results_; }

 private:
  std::vector<CompiledPattern> compile(const std::vector<std::string>& texts) const;
  static bool any_match(const std::vector<CompiledPattern>& ps, const std::string& text);
  void open_window();
  void close_window();
  void emit(const FilteredLine& line);

  SearchSpec spec_;
  std::function<void(const FilteredLine&)> out_;
  std::vector<CompiledPattern> search_, until_, after_, until_any_, after_any_;
  std::size_t gutter_width_ = 0;
  bool open_ = true;
  bool finished_ = false;   // window closed for good
  bool close_pending_ = false;
  std::uint64_t close_step_ = 0;
  long results_ = 0;
  bool stop_ = false;
  std::vector<FilteredLine> context_;
};

}  // namespace stepml
