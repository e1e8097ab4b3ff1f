#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vv::exp {

struct GradCheckCase {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  double seconds = 0.0;
};

/// Finite-difference checks of every differentiable building block and of the
/// full joint network (widths <= 16, 8x8x16 chunk) at each fusion point.
std::vector<GradCheckCase> run_gradcheck_suite(std::uint64_t seed);

}  // namespace vv::exp
