#pragma once

#include <cstddef>
#include <vector>

#include "pointcpr/config.hpp"
#include "pointcpr/nn.hpp"

namespace pointcpr {

/// Cosine decay from optim.lr to min(optim.min_lr, optim.lr) over
/// schedule_steps, after a linear warmup. `step` counts from 0.
double cosine_lr(std::size_t step, const OptimizerConfig& optim);

/// AdamW with decoupled weight decay. Rank-1 parameters (biases, norm
/// scales) are not decayed.
class AdamW {
 public:
  AdamW() = default;
  AdamW(const ParameterSet& params, const OptimizerConfig& config);

  /// Applies one update using the gradients currently held by `params`.
  /// Parameters without a gradient buffer are left untouched.
  void step(ParameterSet& params, double lr);

  std::size_t steps_taken() const { return t_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }
  /// Restores moments; shapes must match the parameter set used at construction.
  void restore(std::size_t steps_taken, std::vector<std::vector<double>> m, std::vector<std::vector<double>> v);

 private:
  OptimizerConfig config_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace pointcpr
