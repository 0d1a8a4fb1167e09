#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pointcpr/model.hpp"

namespace pointcpr {

struct ModuleCost {
  std::string module;  // embedding, encoder, decoder, heads, classifier
  std::size_t params = 0;
};

/// Forward FLOPs for one cloud. A multiply-accumulate counts 2; norms,
/// activations and biases are not counted.
struct FlopBreakdown {
  double matmul = 0.0;     // dense layers outside attention
  double attention = 0.0;  // q/k/v/out projections, scores, weighted sum
  double knn = 0.0;        // FPS, patch grouping and LAM neighbour search, 6 per distance
  double pooling = 0.0;    // one per max comparison or mean addition

  double total() const { return matmul + attention + knn + pooling; }
};

struct CostReport {
  ModelConfig config;
  ModelTarget target = ModelTarget::classifier;
  std::vector<ModuleCost> modules;
  std::size_t total_params = 0;
  /// Parameter count of an instantiated model, when enumeration was requested.
  std::optional<std::size_t> enumerated_params;
  FlopBreakdown flops;
};

/// Analytic parameter and FLOP counts. With `enumerate`, also builds the
/// model and counts its parameters for cross-checking.
CostReport count_costs(const ModelConfig& config, ModelTarget target, bool enumerate = true);

/// Parameter count of one compact encoder layer.
std::size_t compact_layer_params(const ModelConfig& config);

std::string format_cost_table(const CostReport& report);
/// CSV with header "section,name,value".
void write_cost_csv(std::ostream& out, const CostReport& report);

}  // namespace pointcpr
