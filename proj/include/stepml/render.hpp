#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "stepml/eval.hpp"

namespace stepml {

struct RenderOptions {
  bool show_all = false;  // print every state regardless of elision
  bool fast_curry = false;
  bool side_lets = false;
  bool elide_arith = true;
  bool elide_var_lookup = true;
  bool elide_if_bool = true;
  bool elide_comparison = true;
  bool elide_boolean = true;
  bool underline_redex = true;
  bool ansi = false;
  int width = 0;  // 0 disables wrapping
  bool hide_rec_defs = true;  // print `let rec f = ... in e` as `e`
  bool show_all_items = false;
  bool arrows = true;  // `=>` prefixes; off gives bare states
};

/// Half-open byte range.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool empty() const { return begin >= end; }
  bool operator==(const Span&) const = default;
};

struct TraceLine {
  std::string text;
  Span redex_span;         // empty for values
  std::string gutter;      // side-let bindings, space separated
  std::uint64_t step_index = 0;
  LastOp last_op = LastOp::Other;  // op of the step that produced this state
  bool is_value = false;
  std::string arrow;       // "", "   ", "=> " or "=>* "
  bool is_exception = false;
};

/// Renders a state. `redex` locates the sub-expression to mark, if any.
TraceLine render(const ExprPtr& e, const Path* redex, const RenderOptions& opts);

/// Plain source text with no display transformations. Re-parses to `e`.
std::string render_plain(const ExprPtr& e);
std::string render_pattern(const Pattern& p);

/// The elision decision for one state.
bool should_print(std::optional<LastOp> prev, bool current_is_value, std::optional<LastOp> next,
                  bool next_is_value, const RenderOptions& opts);

/// True when `op` belongs to an enabled elision kind.
bool elidable(LastOp op, const RenderOptions& opts);

/// Final line text for an uncaught exception, e.g. "Exception: Division_by_zero."
std::string exception_line(const std::string& name, const ExprPtr& payload);

/// Gutter plus arrow plus text, plain.
std::string plain_line(const TraceLine& line, std::size_t gutter_width);

/// Full output for one line: gutter, arrow, text with ANSI underline for the
/// redex and reverse video for `highlights` (offsets into `plain_line`),
/// wrapped at `opts.width`.
std::string format_line(const TraceLine& line, std::size_t gutter_width,
                        const std::vector<Span>& highlights, const RenderOptions& opts);

/// Removes SGR escape sequences.
std::string strip_ansi(const std::string& s);

/// Receives the trace as it is produced.
class TraceSink {
 public:
  virtual ~TraceSink() = default;
  /// A state that survived elision.
  virtual void line(const TraceLine& line) = 0;
  /// Every state, printed or not. Only called when `wants_shadow` is true.
  virtual void shadow(const TraceLine&) {}
  virtual bool wants_shadow() const { return false; }
  /// Checked after each line; true halts evaluation.
  virtual bool stop_requested() const { return false; }
};

struct TraceResult {
  StepOutcome::Kind kind = StepOutcome::Kind::AlreadyValue;
  ExprPtr value;          // final state of the last item
  std::string exception;  // when uncaught
  ExprPtr payload;
  bool stopped = false;   // halted by the sink
  std::uint64_t steps = 0;
};

/// Drives the engine over the program's items, printing through `sink`.
TraceResult emit_trace(Engine& engine, const std::vector<ExprPtr>& items,
                       const RenderOptions& opts, TraceSink& sink);

/// Collects printed lines; handy for tests.
class CollectingSink : public TraceSink {
 public:
  void line(const TraceLine& l) override { lines.push_back(l); }
  std::vector<TraceLine> lines;
  std::vector<std::string> texts() const;
};

}  // namespace stepml
