#include "stepml/prelude.hpp"

#include "stepml/builtins.hpp"
#include "stepml/syntax.hpp"

namespace stepml {

std::string_view prelude_externals() {
  return R"(external print_int : int -> unit = "%print_int"
external print_string : string -> unit = "%print_string"
external print_endline : string -> unit = "%print_endline"
external print_newline : unit -> unit = "%print_newline"
external string_of_int : int -> string = "%string_of_int"
external word_size : unit -> int = "%word_size"
external not : bool -> bool = "%not"
external failwith : string -> 'a = "%failwith"
external raise : exn -> 'a = "%raise"
external ref : 'a -> 'a ref = "%ref"
external fst : 'a * 'b -> 'a = "%fst"
external snd : 'a * 'b -> 'b = "%snd"
)";
}

std::string_view prelude_list_module() {
  return R"(let rec map f = function [] -> [] | a :: l -> let r = f a in r :: map f l

let rec rev_append l1 l2 = match l1 with [] -> l2 | a :: l -> rev_append l (a :: l2)

let rev l = rev_append l []

let rec length_aux len = function [] -> len | _ :: l -> length_aux (len + 1) l

let length l = length_aux 0 l

let rec append l1 l2 = match l1 with [] -> l2 | a :: l -> a :: append l l2
)";
}

void load_prelude(Engine& engine) {
  install_standard_builtins(engine);
  engine.run_program(parse_program(prelude_externals()));
  engine.load_module("List", parse_program(prelude_list_module()));
  for (const char* name : {"map", "rev", "length", "append"})
    engine.define_global(name, *engine.lookup_global(std::string("List.") + name));
  engine.define_global("@", *engine.lookup_global("List.append"));
}

}  // namespace stepml
