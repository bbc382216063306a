#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "frameflow/geometry.hpp"

namespace frameflow {

/// A registered problem: the driving fields and the default start point.
struct Problem {
  VectorFieldSystem system;
  Vec start;
  std::string description;
};

/// Names of the compiled-in problems: flat, diag-commuting, noncomm2d, gbm1d.
std::vector<std::string> problem_names();

/// Throws InvalidArgument listing the valid names on a miss.
Problem make_problem(std::string_view name);

/// A_1 = (1, 0), A_2 = (0, phi(x^1)) with phi a smooth floor of the identity:
/// phi(s) = floor + softness * log(1 + exp((s - floor) / softness)).
/// phi(s) = s up to 1e-4 on [0.5, 2] for the preset parameters. floor <= 0 gives phi(s) = s.
VectorFieldSystem make_noncomm2d(double floor, double softness);

}  // namespace frameflow
