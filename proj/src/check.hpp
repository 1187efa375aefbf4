#pragma once

#include <string>
#include <vector>

namespace fplo {

struct CheckResult {
  std::string name;
  bool passed;
  std::string detail;
};

/// Fast property and diagnostic suite: operator oracles against refined
/// quadrature, algebraic identities of the moment matrices, the skew
/// cancellation of the step operator, solver path agreement and the
/// stability diagnostic on a coarse instance.
std::vector<CheckResult> run_checks(int order = 5);

}  // namespace fplo
