#pragma once

#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "stepml/eval.hpp"
#include "stepml/render.hpp"

namespace props {

struct SuiteResult {
  bool ok = true;
  int cases = 0;
  double seconds = 0;
  std::string detail;  // first failure
};

/// An engine with the builtins and prelude loaded, printing into `out`.
std::unique_ptr<stepml::Engine> make_engine(std::ostream& out);

/// The value of a program's last item, rendered as source.
std::string final_value(const std::string& source, std::string* exception = nullptr);

/// Printed trace lines for `source` (gutter and text, no arrows).
std::vector<std::string> trace_lines(const std::string& source, stepml::RenderOptions opts);

/// Programs with side effects: printing, references, loops.
const std::vector<std::string>& io_corpus();
/// Assorted pure programs covering the surface syntax.
const std::vector<std::string>& pure_corpus();

SuiteResult oracle_agreement(int count, int max_depth, unsigned seed);
SuiteResult peek_purity();
SuiteResult elision_conservativity(int generated, unsigned seed);
SuiteResult round_trip(int generated, unsigned seed);

bool is_subsequence(const std::vector<std::string>& small, const std::vector<std::string>& big);

}  // namespace props
