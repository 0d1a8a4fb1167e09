#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pointcpr/model.hpp"
#include "pointcpr/synth.hpp"

namespace pointcpr {

/// Rows A-D: no pretraining, vanilla decoder without masked positions,
/// vanilla decoder with masked positions, partial-aware decoder.
enum class AblationVariant { scratch, vanilla_nopos, vanilla, partial };

std::string to_string(AblationVariant v);
/// "scratch", "vanilla-no-pos", "vanilla", "partial-aware".
AblationVariant parse_variant(std::string_view name);
std::vector<AblationVariant> all_variants();

/// True when perturbing masked-patch centres and relative coordinates
/// leaves the decoder output bit-identical.
bool decoder_isolated(const PointCprModel& model, const PatchSet& patches, const MaskPartition& mask,
                      std::uint64_t perturb_seed);

/// Copy of `patches` with masked centres and relative coordinates replaced
/// by random values. Visible patches are untouched.
PatchSet perturb_masked(const PatchSet& patches, const MaskPartition& mask, std::uint64_t seed);

struct AblationOptions {
  std::vector<ShapeKind> classes{ShapeKind::sphere, ShapeKind::cube, ShapeKind::cylinder, ShapeKind::plane};
  std::size_t train_per_class = 20;
  std::size_t val_per_class = 10;
  double noise = 0.01;
  /// Pretraining steps per variant; 0 means config.steps.
  std::size_t pretrain_steps = 0;
};

struct AblationRow {
  AblationVariant variant = AblationVariant::scratch;
  std::vector<double> accuracies;  // one per completed seed
  double mean = 0.0;
  double stddev = 0.0;             // population standard deviation
  std::optional<bool> isolated;    // unset for the variant without a decoder
  std::string error;               // first failure, if any seed failed
};

struct AblationReport {
  std::vector<std::uint64_t> seeds;
  std::vector<AblationRow> rows;
};

/// For each variant and seed: pretrain on unlabeled synthetic clouds
/// (skipped for scratch), fine-tune a classifier, record validation
/// accuracy. A failing variant records its error and the others continue.
AblationReport run_ablation(const ModelConfig& config, std::span<const AblationVariant> variants,
                            std::span<const std::uint64_t> seeds, const AblationOptions& options = {});

std::string format_ablation_table(const AblationReport& report);
/// CSV header "variant,mean,std,seeds,isolated,error".
void write_ablation_csv(std::ostream& out, const AblationReport& report);

}  // namespace pointcpr
