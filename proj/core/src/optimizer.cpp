#include "pointcpr/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "pointcpr/errors.hpp"

namespace pointcpr {

double cosine_lr(std::size_t step, const OptimizerConfig& optim) {
  const double peak = optim.lr;
  const double floor = std::min(optim.min_lr, peak);
  if (step < optim.warmup_steps) {
    return peak * static_cast<double>(step + 1) / static_cast<double>(optim.warmup_steps);
  }
  if (optim.schedule_steps <= optim.warmup_steps) return peak;
  const double span = static_cast<double>(optim.schedule_steps - optim.warmup_steps);
  const double t = std::min(1.0, static_cast<double>(step - optim.warmup_steps) / span);
  return floor + 0.5 * (peak - floor) * (1.0 + std::cos(std::numbers::pi * t));
}

AdamW::AdamW(const ParameterSet& params, const OptimizerConfig& config) : config_(config) {
  for (const auto& p : params.items()) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

void AdamW::step(ParameterSet& params, double lr) {
  if (params.size() != m_.size()) {
    throw ConfigError("AdamW: optimizer tracks " + std::to_string(m_.size()) + " parameters but the set has " +
                      std::to_string(params.size()));
  }
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  auto& items = params.items();
  for (std::size_t i = 0; i < items.size(); ++i) {
    Parameter& p = items[i];
    if (!p.trainable || !p.tensor.has_grad()) continue;
    const bool decay = p.tensor.rank() > 1;
    auto w = p.tensor.mutable_data();
    auto g = p.tensor.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const double update = (m[j] / c1) / (std::sqrt(v[j] / c2) + config_.eps);
      if (decay) w[j] -= lr * config_.weight_decay * w[j];
      w[j] -= lr * update;
    }
  }
}

void AdamW::restore(std::size_t steps_taken, std::vector<std::vector<double>> m,
                    std::vector<std::vector<double>> v) {
  if (m.size() != m_.size() || v.size() != v_.size()) {
    throw ConfigError("AdamW: restored moments do not match the parameter set");
  }
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i].size() != m_[i].size() || v[i].size() != v_[i].size()) {
      throw ConfigError("AdamW: restored moment " + std::to_string(i) + " has the wrong size");
    }
  }
  t_ = steps_taken;
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace pointcpr
