#include "stepml/cli.hpp"

#include <unistd.h>

#include <CLI11.hpp>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "stepml/builtins.hpp"
#include "stepml/eval.hpp"
#include "stepml/prelude.hpp"
#include "stepml/render.hpp"
#include "stepml/search.hpp"
#include "stepml/syntax.hpp"

namespace stepml {

namespace {

// Options that consume the following argument.
const std::set<std::string> kTakesValue = {
    "-e", "-n", "-search", "-until", "-after", "-until-any", "-after-any",
    "-upto", "-step-budget", "-width",
};

// The driver accepts single-dash long flags; the option parser wants two.
std::vector<std::string> normalise(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  bool value_next = false;
  bool rest_positional = false;
  for (const auto& a : args) {
    if (value_next || rest_positional) {
      out.push_back(a);
      value_next = false;
      continue;
    }
    if (a == "--") rest_positional = true;
    const bool single_dash_long =
        a.size() > 2 && a[0] == '-' && a[1] != '-' && std::isalpha(static_cast<unsigned char>(a[1]));
    value_next = kTakesValue.count(a.rfind("--", 0) == 0 ? a.substr(1) : a) > 0;
    out.push_back(single_dash_long ? "-" + a : a);
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string module_name(const std::string& path) {
  std::string stem = std::filesystem::path(path).stem().string();
  if (!stem.empty()) stem[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(stem[0])));
  return stem;
}

struct Invocation {
  bool show = false;
  bool show_all = false;
  std::string expr;
  bool has_expr = false;
  std::vector<std::string> files;
  bool fast_curry = false;
  bool side_lets = false;
  bool elide = false;
  bool no_elide = false;
  bool arrows = false;
  bool no_arrows = false;
  bool plain = false;
  bool ansi = false;
  bool show_all_items = false;
  bool show_rec_defs = false;
  bool no_prelude = false;
  std::uint64_t step_budget = 10'000'000;
  int width = -1;
  SearchSpec search;
};

class StreamSink {
 public:
  StreamSink(std::ostream& err, const RenderOptions& opts) : err_(err), opts_(opts) {}
  void operator()(const FilteredLine& l) {
    err_ << format_line(l.line, l.gutter_width, l.highlights, opts_) << '\n';
    err_.flush();
  }

 private:
  std::ostream& err_;
  const RenderOptions& opts_;
};

}  // namespace

int run_cli(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err,
            bool err_is_terminal) {
  Invocation inv;
  CLI::App app{"stepml: a tracing interpreter that prints every reduction step"};
  app.name("stepml");
  app.set_help_flag("--help,-h", "Print this help");
  app.add_flag("--show", inv.show, "Print the final value");
  app.add_flag("--show-all", inv.show_all, "Print the evaluation trace");
  app.add_option("-e", inv.expr, "Program text to run after loading the files");
  app.add_flag("--fast-curry", inv.fast_curry, "Apply all arguments of a curried function at once");
  app.add_flag("--side-lets", inv.side_lets, "Move let bindings into a left-hand gutter");
  app.add_flag("--elide", inv.elide, "Hide intermediate arithmetic, lookup and test steps");
  app.add_flag("--no-elide", inv.no_elide, "Print every step");
  app.add_flag("--arrows", inv.arrows, "Prefix successor lines with => and =>*");
  app.add_flag("--no-arrows", inv.no_arrows, "Print bare states");
  app.add_flag("--plain", inv.plain, "No escape codes");
  app.add_flag("--ansi", inv.ansi, "Underline the redex with escape codes");
  app.add_flag("--show-all-items", inv.show_all_items, "Show finished structure items too");
  app.add_flag("--show-rec-defs", inv.show_rec_defs, "Print enclosing let rec definitions");
  app.add_flag("--no-prelude", inv.no_prelude, "Do not load the bundled prelude");
  app.add_option("--step-budget", inv.step_budget, "Abort after this many steps");
  app.add_option("--width", inv.width, "Wrap trace lines at this many columns");
  auto& s = inv.search;
  // Patterns such as "[_; _]" must not be read as bracketed lists of values.
  app.add_option("--search", s.search, "Show only steps matching the pattern")
      ->allow_extra_args(false);
  app.add_flag("--highlight", s.highlight, "Highlight search matches");
  app.add_flag("--no-parens", s.no_parens, "Ignore parentheses when matching");
  app.add_flag("--regexp", s.regexp, "Patterns are regular expressions");
  app.add_option("--upto", s.upto, "Show this many lines of context before each match");
  app.add_flag("--invert-search", s.invert_search, "Show steps that do not match");
  app.add_option("-n", s.n, "Show at most this many results");
  app.add_option("--until", s.until, "Show only until this matches a printed step")
      ->allow_extra_args(false);
  app.add_option("--after", s.after, "Show only after this matches a printed step")
      ->allow_extra_args(false);
  app.add_option("--until-any", s.until_any, "Show only until this matches any step")
      ->allow_extra_args(false);
  app.add_option("--after-any", s.after_any, "Show only after this matches any step")
      ->allow_extra_args(false);
  app.add_flag("--invert-after", s.invert_after, "Invert the -after condition");
  app.add_flag("--invert-until", s.invert_until, "Invert the -until condition");
  app.add_flag("--stop", s.stop, "Stop evaluation after the final search result");
  app.add_flag("--repeat", s.repeat, "Allow -after/-until windows to reopen");
  app.add_option("files", inv.files, "Source files; all but the last are modules");

  std::vector<std::string> args = normalise(raw_args);
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "stepml: " << e.what() << "\n" << app.help();
    return 1;
  }
  inv.has_expr = app.count("-e") > 0;
  if (!inv.has_expr && inv.files.empty()) {
    err << "stepml: no program given\n" << app.help();
    return 1;
  }

  const bool elide = !inv.no_elide && (inv.elide || inv.side_lets);
  RenderOptions opts;
  opts.show_all = !elide;
  opts.fast_curry = inv.fast_curry;
  opts.side_lets = inv.side_lets;
  opts.hide_rec_defs = !inv.show_rec_defs;
  opts.show_all_items = inv.show_all_items;
  opts.arrows = !inv.no_arrows && (inv.arrows || elide || inv.side_lets);
  opts.ansi = inv.ansi || (err_is_terminal && !inv.plain);
  if (inv.plain) opts.ansi = false;
  opts.width = 0;
  if (const char* w = std::getenv("STEPML_WIDTH")) opts.width = std::atoi(w);
  if (inv.width >= 0) opts.width = inv.width;

  EngineOptions engine_opts;
  engine_opts.fast_curry = inv.fast_curry;
  engine_opts.step_budget = inv.step_budget;
  engine_opts.out = &out;
  Engine engine(engine_opts);

  std::string current_source = "<prelude>";
  try {
    if (inv.no_prelude) {
      install_standard_builtins(engine);
    } else {
      load_prelude(engine);
    }
    std::vector<std::string> modules = inv.files;
    std::string program_text;
    if (inv.has_expr) {
      program_text = inv.expr;
      current_source = "-e";
    } else {
      current_source = modules.back();
      program_text = read_file(modules.back());
      modules.pop_back();
    }
    for (const auto& path : modules) {
      current_source = path;
      engine.load_module(module_name(path), parse_program(read_file(path)));
    }
    current_source = inv.has_expr ? "-e" : inv.files.back();
    const auto items = parse_program(program_text);
    engine.set_step_budget(engine.steps_taken() + inv.step_budget);

    TraceResult result;
    if (inv.show_all) {
      StreamSink printer(err, opts);
      SearchFilter filter(inv.search, std::ref(printer));
      result = emit_trace(engine, items, opts, filter);
    } else {
      RunResult r = engine.run_program(items);
      result.kind = r.uncaught() ? StepOutcome::Kind::Uncaught : StepOutcome::Kind::Next;
      result.value = r.value;
      result.exception = r.exception;
      result.payload = r.payload;
      if (r.uncaught()) err << exception_line(r.exception, r.payload) << '\n';
    }
    out.flush();
    if (result.stopped) return 0;
    if (result.kind == StepOutcome::Kind::Uncaught) return 2;
    if (inv.show && result.value) {
      RenderOptions value_opts;
      out << render(result.value, nullptr, value_opts).text << '\n';
    }
    return 0;
  } catch (const LexError& e) {
    err << current_source << ":" << e.what() << '\n';
  } catch (const ParseError& e) {
    err << current_source << ":" << e.what() << '\n';
  } catch (const PatternError& e) {
    err << "stepml: " << e.what() << '\n';
  } catch (const StepBudgetExceeded& e) {
    err << "stepml: " << e.what() << '\n';
  } catch (const RuntimeError& e) {
    err << "Error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "stepml: " << e.what() << '\n';
  }
  out.flush();
  return 1;
}

int main_entry(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr, isatty(STDERR_FILENO) != 0);
}

}  // namespace stepml
