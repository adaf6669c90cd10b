// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "xmodal/graph.hpp"

namespace xmodal {

struct FdCoordinate {
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct FdReport {
  bool pass = false;
  double max_rel_err = 0.0;
  std::size_t worst_coord = 0;
  std::vector<FdCoordinate> coords;
};

// Central finite differences against a supplied analytic gradient:
// rel_err = |a - n| / max(1, |a|, |n|); pass iff max rel_err <= tolerance.
// Re-runs the graph forward at perturbed leaf values and restores them.
FdReport finite_difference_report(Graph& g, NodeId output, NodeId param, const Tensor& analytic,
                                  double step, double tolerance);

// Backprops once to obtain the analytic gradient, then compares.
FdReport finite_difference_check(Graph& g, NodeId output, NodeId param, double step,
                                 double tolerance);

// Checks every named parameter of the graph; reports the worst coordinate.
FdReport finite_difference_check_all(Graph& g, NodeId output, double step, double tolerance);

}  // namespace xmodal
