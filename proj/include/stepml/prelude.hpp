#pragma once

#include <string_view>

#include "stepml/eval.hpp"

namespace stepml {

/// Top-level externals bridging to the native primitives.
std::string_view prelude_externals();
/// Source of the `List` module, written in the interpreted language.
std::string_view prelude_list_module();

/// Installs builtins, externals, the `List` module and its unqualified aliases.
void load_prelude(Engine& engine);

}  // namespace stepml
