#include "stepml/builtins.hpp"

#include <ostream>

namespace stepml {

namespace {

std::int64_t int_arg(const std::vector<ExprPtr>& args, std::size_t i, const char* who) {
  const auto* v = as<Int>(args.at(i));
  if (!v) throw RuntimeError(std::string(who) + " expects an integer");
  return v->value;
}

const std::string& string_arg(const std::vector<ExprPtr>& args, std::size_t i, const char* who) {
  const auto* v = as<String>(args.at(i));
  if (!v) throw RuntimeError(std::string(who) + " expects a string");
  return v->value;
}

}  // namespace

void install_standard_builtins(Engine& engine) {
  engine.register_builtin("%print_int", 1, "print_int", [](Engine& e, const auto& args) {
    e.out() << int_arg(args, 0, "print_int") << std::flush;
    return unit_value();
  });
  engine.register_builtin("%print_string", 1, "print_string", [](Engine& e, const auto& args) {
    e.out() << string_arg(args, 0, "print_string") << std::flush;
    return unit_value();
  });
  engine.register_builtin("%print_endline", 1, "print_endline", [](Engine& e, const auto& args) {
    e.out() << string_arg(args, 0, "print_endline") << '\n' << std::flush;
    return unit_value();
  });
  engine.register_builtin("%print_newline", 1, "print_newline", [](Engine& e, const auto& args) {
    if (!is<Unit>(args.at(0))) throw RuntimeError("print_newline expects ()");
    e.out() << '\n' << std::flush;
    return unit_value();
  });
  engine.register_builtin("%string_of_int", 1, "string_of_int", [](Engine&, const auto& args) {
    return string_value(std::to_string(int_arg(args, 0, "string_of_int")));
  });
  engine.register_builtin("%word_size", 1, "word_size", [](Engine&, const auto&) {
    return int_value(64);
  });
  engine.register_builtin("%not", 1, "not", [](Engine&, const auto& args) {
    const auto* b = as<Bool>(args.at(0));
    if (!b) throw RuntimeError("not expects a boolean");
    return bool_value(!b->value);
  });
  engine.register_builtin("%failwith", 1, "failwith", [](Engine&, const auto& args) -> ExprPtr {
    throw HostException{"Failure", string_value(string_arg(args, 0, "failwith"))};
  });
  engine.register_builtin("%raise", 1, "raise", [](Engine&, const auto& args) -> ExprPtr {
    const auto* c = as<Constr>(args.at(0));
    if (!c) throw RuntimeError("raise expects an exception");
    throw HostException{c->tag, c->payload};
  });
  engine.register_builtin("%ref", 1, "ref", [](Engine&, const auto& args) {
    Record r;
    r.allocated = true;
    r.fields.push_back(Field{"contents", std::make_shared<Cell>(Cell{args.at(0)})});
    return make(std::move(r));
  });
  engine.register_builtin("%fst", 1, "fst", [](Engine&, const auto& args) {
    const auto* t = as<Tuple>(args.at(0));
    if (!t || t->items.size() != 2) throw RuntimeError("fst expects a pair");
    return t->items[0];
  });
  engine.register_builtin("%snd", 1, "snd", [](Engine&, const auto& args) {
    const auto* t = as<Tuple>(args.at(0));
    if (!t || t->items.size() != 2) throw RuntimeError("snd expects a pair");
    return t->items[1];
  });
}

}  // namespace stepml
