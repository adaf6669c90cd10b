// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "xmodal/errors.hpp"

namespace xmodal {

FdReport finite_difference_report(Graph& g, NodeId output, NodeId param, const Tensor& analytic,
                                  double step, double tolerance) {
  if (step <= 0) throw ConfigError("finite_difference: step must be positive");
  Tensor& leaf = g.leaf_value(param);
  if (!leaf.same_dims(analytic)) throw DataError("finite_difference: analytic dims mismatch");

  FdReport report;
  report.coords.resize(leaf.size());
  for (std::size_t i = 0; i < leaf.size(); ++i) {
    const double saved = leaf[i];
    leaf[i] = saved + step;
    g.forward();
    const double fp = g.value(output).scalar_value();
    leaf[i] = saved - step;
    g.forward();
    const double fm = g.value(output).scalar_value();
    leaf[i] = saved;

    FdCoordinate& c = report.coords[i];
    c.analytic = analytic[i];
    c.numeric = (fp - fm) / (2.0 * step);
    c.rel_err = std::fabs(c.analytic - c.numeric) /
                std::max({1.0, std::fabs(c.analytic), std::fabs(c.numeric)});
    if (c.rel_err >= report.max_rel_err) {
      report.max_rel_err = c.rel_err;
      report.worst_coord = i;
    }
  }
  g.forward();  // leave values consistent
  report.pass = report.max_rel_err <= tolerance;
  return report;
}

FdReport finite_difference_check(Graph& g, NodeId output, NodeId param, double step,
                                 double tolerance) {
  g.forward();
  g.backward(output);
  const Tensor analytic = g.grad(param);
  return finite_difference_report(g, output, param, analytic, step, tolerance);
}

FdReport finite_difference_check_all(Graph& g, NodeId output, double step, double tolerance) {
  g.forward();
  g.backward(output);
  std::map<std::string, Tensor> analytic = g.grads_by_name();

  FdReport worst;
  worst.pass = true;
  for (const auto& [name, grad] : analytic) {
    FdReport r = finite_difference_report(g, output, g.param_id(name), grad, step, tolerance);
    if (!r.pass) worst.pass = false;
    if (r.max_rel_err >= worst.max_rel_err) {
      worst.max_rel_err = r.max_rel_err;
      worst.worst_coord = r.worst_coord;
    }
  }
  return worst;
}

}  // namespace xmodal
