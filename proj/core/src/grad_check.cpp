#include "pointcpr/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pointcpr/errors.hpp"

namespace pointcpr {

namespace {

double evaluate(const std::function<Tensor()>& f, const std::string& name) {
  const double v = f().item();
  if (!std::isfinite(v)) throw NumericError("grad_check: non-finite objective while probing '" + name + "'");
  return v;
}

}  // namespace

GradCheckReport grad_check(const std::function<Tensor()>& f, std::span<const Parameter> params,
                           double tol, GradCheckOptions options) {
  std::vector<Tensor> handles;
  std::vector<bool> previous;
  for (const Parameter& p : params) {
    Tensor t = p.tensor;
    previous.push_back(t.requires_grad());
    t.set_requires_grad(true);
    t.zero_grad();
    handles.push_back(t);
  }

  std::vector<std::vector<double>> analytic;
  {
    GradTape tape;
    Tensor out = f();
    if (!std::isfinite(out.item())) throw NumericError("grad_check: non-finite objective at base point");
    tape.backward(out);
  }
  for (std::size_t i = 0; i < handles.size(); ++i) {
    if (!handles[i].has_grad()) {
      analytic.emplace_back(handles[i].numel(), 0.0);
      continue;
    }
    auto g = handles[i].grad();
    for (double v : g) {
      if (!std::isfinite(v)) {
        throw NumericError("grad_check: non-finite analytic gradient for '" + params[i].name + "'");
      }
    }
    analytic.emplace_back(g.begin(), g.end());
  }

  GradCheckReport report;
  report.tolerance = tol;
  for (std::size_t i = 0; i < handles.size(); ++i) {
    const std::string& name = params[i].name;
    auto values = handles[i].mutable_data();
    std::vector<double> numeric(values.size());
    std::vector<double> roundoff(values.size());
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double saved = values[j];
      values[j] = saved + options.step;
      const double plus = evaluate(f, name);
      values[j] = saved - options.step;
      const double minus = evaluate(f, name);
      values[j] = saved;
      numeric[j] = (plus - minus) / (2.0 * options.step);
      // Cancellation error of the difference quotient itself.
      roundoff[j] = 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(plus), std::abs(minus)) /
                    options.step;
    }

    GradCheckEntry entry;
    entry.name = name;
    entry.elements = values.size();
    double scale = options.floor;
    for (std::size_t j = 0; j < values.size(); ++j) {
      scale = std::max({scale, std::abs(analytic[i][j]), std::abs(numeric[j])});
      const double excess = std::abs(analytic[i][j] - numeric[j]) - roundoff[j];
      entry.max_abs_error = std::max(entry.max_abs_error, excess);
    }
    entry.max_rel_error = entry.max_abs_error / scale;
    if (report.worst.empty() || entry.max_rel_error > report.max_rel_error) {
      report.max_rel_error = entry.max_rel_error;
      report.worst = name;
    }
    report.entries.push_back(std::move(entry));
  }

  for (std::size_t i = 0; i < handles.size(); ++i) {
    handles[i].zero_grad();
    handles[i].set_requires_grad(previous[i]);
  }
  return report;
}

}  // namespace pointcpr
