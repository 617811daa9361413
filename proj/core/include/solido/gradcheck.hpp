#pragma once

#include <string>
#include <vector>

#include "solido/common.hpp"

namespace solido {

struct GradCheckCase {
  std::string name;
  double rel_err = 0.0;
  double tol = 1e-4;

  bool pass() const { return rel_err < tol; }
};

// Finite-difference checks for every differentiable op plus three composite
// graphs (the full encode->inject->sample->decode->BCE chain among them).
// Deterministic in the seed; composites run at toy sizes.
std::vector<GradCheckCase> gradient_check_suite(std::uint64_t seed);

// Throws NumericError naming the first failing case.
void assert_gradients_ok(std::uint64_t seed);

}  // namespace solido
