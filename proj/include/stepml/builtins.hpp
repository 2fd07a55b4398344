#pragma once

#include "stepml/eval.hpp"

namespace stepml {

/// Registers the native primitives (`%print_int`, `%ref`, `%failwith`, ...).
void install_standard_builtins(Engine& engine);

}  // namespace stepml
