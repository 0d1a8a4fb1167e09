#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pointcpr/nn.hpp"
#include "pointcpr/tensor.hpp"

namespace pointcpr {

struct GradCheckEntry {
  std::string name;
  /// max_i e_i / max(max_i |analytic_i|, max_i |numeric_i|, floor), where e_i is
  /// |analytic_i - numeric_i| less the floating-point cancellation bound of the
  /// central difference, 4 eps max(|f(x+h)|, |f(x-h)|) / h.
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t elements = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0.0;
  double max_rel_error = 0.0;
  std::string worst;

  bool passed() const { return max_rel_error < tolerance; }
};

struct GradCheckOptions {
  double step = 1e-5;
  /// Gradients whose magnitude is below this are compared in absolute terms.
  double floor = 1e-6;
};

/// Compares the tape gradient of scalar `f` against central finite
/// differences for every element of every parameter in `params`.
/// `f` must rebuild its graph on every call and be deterministic.
/// Throws NumericError naming the parameter if any evaluation is non-finite.
GradCheckReport grad_check(const std::function<Tensor()>& f, std::span<const Parameter> params,
                           double tol, GradCheckOptions options = {});

}  // namespace pointcpr
