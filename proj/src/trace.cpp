#include "stepml/render.hpp"

namespace stepml {

namespace {

class ItemTracer {
 public:
  ItemTracer(Engine& engine, const RenderOptions& opts, TraceSink& sink, std::string prefix,
             bool print)
      : engine_(engine), opts_(opts), sink_(sink), prefix_(std::move(prefix)), print_(print) {}

  // Returns the final value, or null when an exception escaped or the sink stopped.
  ExprPtr run(ExprPtr e, TraceResult& result) {
    std::optional<LastOp> prev;
    bool first = true;
    while (true) {
      auto loc = engine_.locate(e);
      TraceLine line = render(e, loc ? &loc->path : nullptr, opts_);
      line.step_index = engine_.steps_taken();
      line.last_op = prev.value_or(LastOp::Other);
      add_prefix(line);

      const std::optional<LastOp> next = loc ? std::optional<LastOp>(loc->op) : std::nullopt;
      const bool wanted =
          first || line.is_value || should_print(prev, line.is_value, next, false, opts_);
      if (sink_.wants_shadow()) sink_.shadow(line);
      if (print_ && wanted) {
        if (emit(line, line.is_value)) {
          result.stopped = true;
          return nullptr;
        }
      }
      if (!loc) return e;

      StepOutcome o = engine_.step(e);
      ++pending_;
      if (o.kind == StepOutcome::Kind::Uncaught) {
        result.kind = StepOutcome::Kind::Uncaught;
        result.exception = o.exception;
        result.payload = o.payload;
        if (print_) {
          TraceLine ex;
          ex.text = exception_line(o.exception, o.payload);
          ex.is_exception = true;
          ex.step_index = engine_.steps_taken();
          sink_.line(ex);
        }
        return nullptr;
      }
      result.kind = StepOutcome::Kind::Next;
      e = o.expr;
      prev = o.op;
      first = false;
    }
  }

  std::uint64_t pending_ = 0;  // steps since the last printed line

 private:
  void add_prefix(TraceLine& line) const {
    if (prefix_.empty()) return;
    line.text = prefix_ + line.text;
    if (!line.redex_span.empty()) {
      line.redex_span.begin += prefix_.size();
      line.redex_span.end += prefix_.size();
    }
  }

  // Returns true when the sink asks to stop.
  bool emit(TraceLine& line, bool final_state) {
    const std::string key = line.gutter + "\n" + line.text;
    if (!opts_.show_all && !final_state && printed_any_ && key == last_key_) return false;
    if (!opts_.arrows) {
      line.arrow.clear();
    } else if (!printed_any_) {
      line.arrow = "   ";
    } else {
      line.arrow = pending_ > 1 ? "=>* " : "=> ";
    }
    printed_any_ = true;
    last_key_ = key;
    pending_ = 0;
    sink_.line(line);
    return sink_.stop_requested();
  }

  Engine& engine_;
  const RenderOptions& opts_;
  TraceSink& sink_;
  std::string prefix_;
  bool print_;
  bool printed_any_ = false;
  std::string last_key_;
};

}  // namespace

TraceResult emit_trace(Engine& engine, const std::vector<ExprPtr>& items,
                       const RenderOptions& opts, TraceSink& sink) {
  TraceResult result;
  const std::uint64_t start = engine.steps_taken();
  std::string prefix;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const bool last = i + 1 == items.size();
    const bool print = last || opts.show_all_items || !is_value(items[i]);
    ItemTracer tracer(engine, opts, sink, opts.show_all_items ? prefix : std::string(), print);
    ExprPtr value = tracer.run(items[i], result);
    result.steps = engine.steps_taken() - start;
    if (!value) return result;
    if (auto failure = engine.install(value)) {
      result.kind = StepOutcome::Kind::Uncaught;
      result.exception = *failure;
      TraceLine ex;
      ex.text = exception_line(*failure, nullptr);
      ex.is_exception = true;
      sink.line(ex);
      return result;
    }
    result.value = value;
    if (opts.show_all_items) prefix += render(value, nullptr, opts).text + " ;; ";
  }
  return result;
}

}  // namespace stepml
