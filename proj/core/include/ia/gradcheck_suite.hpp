#pragma once

#include <functional>
#include <string>
#include <vector>

namespace ia {

struct GradcheckCase {
  std::string name;
  double threshold;               // max acceptable relative error
  std::function<double()> run;    // returns the measured max relative error
};

// Every differentiable op once in isolation (threshold 1e-6) plus the deep
// composites (threshold 1e-4), ending with the full
// SIA -> CIA -> BN -> pool -> cross-entropy chain.
std::vector<GradcheckCase> canonical_gradcheck_suite(uint64_t seed);

struct GradcheckOutcome {
  bool ok = true;
  std::string report;      // one line per case
  std::string first_fail;  // empty when ok
};

GradcheckOutcome run_gradcheck_suite(uint64_t seed);

}  // namespace ia
