#pragma once

#include <string>
#include <vector>

#include "rtrack/tape.hpp"

namespace rtrack {

struct GradCheckCase {
  std::string name;
  GradCheckResult result;
  double tolerance = 0.0;
  bool passed() const { return result.max_rel_error < tolerance; }
};

inline constexpr double kLossGradTolerance = 1e-4;
inline constexpr double kModelGradTolerance = 1e-3;

/// Central-difference checks of every loss and of a small end-to-end model.
std::vector<GradCheckCase> run_gradcheck_suite();

}  // namespace rtrack
