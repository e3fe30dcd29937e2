#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ramen/tensor.hpp"

namespace ramen {

using ParamList = std::vector<std::pair<std::string, Tensor>>;

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  bool ok = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;
  bool all_ok = true;

  const GradCheckEntry* worst() const;
};

/// Compares analytic gradients of a scalar-valued function against central
/// differences, parameter by parameter. f must be deterministic in the
/// parameter values. Failures are reported in the result, never thrown.
/// Relative error: |analytic - numeric| / max(1, |analytic|, |numeric|).
GradCheckReport grad_check(const std::function<Tensor()>& f, const ParamList& params,
                           double eps = 1e-5, double tol = 1e-4);

}  // namespace ramen
