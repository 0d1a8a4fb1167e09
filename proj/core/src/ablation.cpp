#include "pointcpr/ablation.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>

#include "pointcpr/downstream.hpp"
#include "pointcpr/errors.hpp"
#include "pointcpr/pretrain.hpp"

namespace pointcpr {

std::string to_string(AblationVariant v) {
  switch (v) {
    case AblationVariant::scratch: return "scratch";
    case AblationVariant::vanilla_nopos: return "vanilla-no-pos";
    case AblationVariant::vanilla: return "vanilla";
    case AblationVariant::partial: return "partial-aware";
  }
  return "?";
}

AblationVariant parse_variant(std::string_view name) {
  for (AblationVariant v : all_variants()) {
    if (name == to_string(v)) return v;
  }
  throw ArgumentError("unknown ablation variant '" + std::string(name) +
                      "' (expected scratch, vanilla-no-pos, vanilla or partial-aware)");
}

std::vector<AblationVariant> all_variants() {
  return {AblationVariant::scratch, AblationVariant::vanilla_nopos, AblationVariant::vanilla,
          AblationVariant::partial};
}

PatchSet perturb_masked(const PatchSet& patches, const MaskPartition& mask, std::uint64_t seed) {
  PatchSet out = patches;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t i : mask.masked) {
    for (double& c : out.centers.at(i)) c += u(rng);
    for (std::size_t j = 0; j < out.patch_size; ++j) {
      for (double& c : out.relcoords[i * out.patch_size + j]) c = 0.5 * u(rng);
    }
  }
  return out;
}

bool decoder_isolated(const PointCprModel& model, const PatchSet& patches, const MaskPartition& mask,
                      std::uint64_t perturb_seed) {
  const Tensor before = decode_masked(model, patches, mask);
  const Tensor after = decode_masked(model, perturb_masked(patches, mask, perturb_seed), mask);
  const auto a = before.data();
  const auto b = after.data();
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin());
}

namespace {

std::optional<DecoderKind> decoder_for(AblationVariant v) {
  switch (v) {
    case AblationVariant::scratch: return std::nullopt;
    case AblationVariant::vanilla_nopos: return DecoderKind::vanilla_nopos;
    case AblationVariant::vanilla: return DecoderKind::vanilla;
    case AblationVariant::partial: return DecoderKind::partial;
  }
  return std::nullopt;
}

void summarize(AblationRow& row) {
  if (row.accuracies.empty()) return;
  double s = 0.0;
  for (double a : row.accuracies) s += a;
  row.mean = s / static_cast<double>(row.accuracies.size());
  double var = 0.0;
  for (double a : row.accuracies) var += (a - row.mean) * (a - row.mean);
  row.stddev = std::sqrt(var / static_cast<double>(row.accuracies.size()));
}

}  // namespace

AblationReport run_ablation(const ModelConfig& config, std::span<const AblationVariant> variants,
                            std::span<const std::uint64_t> seeds, const AblationOptions& options) {
  if (seeds.empty()) throw ArgumentError("run_ablation: at least one seed is required");
  config.validate();
  AblationReport report;
  report.seeds.assign(seeds.begin(), seeds.end());
  for (AblationVariant v : variants) report.rows.push_back(AblationRow{v, {}, 0.0, 0.0, std::nullopt, {}});

  for (std::uint64_t seed : seeds) {
    SynthSpec labeled{options.classes, options.train_per_class + options.val_per_class, config.num_points,
                      options.noise, true, seed * 2 + 1};
    const auto data = synth_dataset(labeled);
    const double fraction = static_cast<double>(options.val_per_class) /
                            static_cast<double>(options.train_per_class + options.val_per_class);
    const auto [train, val] = split_dataset(data, fraction, seed);

    SynthSpec unlabeled = labeled;
    unlabeled.per_class = (config.pretrain_clouds + options.classes.size() - 1) / options.classes.size();
    unlabeled.seed = seed * 2 + 2;
    std::vector<PatchSet> pretrain_set;
    for (const auto& c : synth_dataset(unlabeled)) pretrain_set.push_back(prepare_patches(c.cloud, config));

    ModelConfig cls_config = config;
    cls_config.classes = options.classes.size();

    for (auto& row : report.rows) {
      try {
        std::optional<TrainState> state;
        if (auto dec = decoder_for(row.variant)) {
          ModelConfig pre = config;
          pre.decoder = *dec;
          state.emplace(make_train_state(pre, seed));
          pretrain(*state, pretrain_set, options.pretrain_steps ? options.pretrain_steps : config.steps);
          const MaskPartition mask = make_mask(pre.num_patches, pre.mask_ratio, mask_seed_for(seed, 0, 0));
          const bool iso = decoder_isolated(state->model, pretrain_set.front(), mask, seed);
          row.isolated = row.isolated.value_or(true) && iso;
        }
        const AccuracyReport acc =
            finetune_classify(train, val, state ? &state->model.params : nullptr, cls_config, seed);
        row.accuracies.push_back(acc.val_accuracy);
      } catch (const std::exception& e) {
        if (row.error.empty()) row.error = "seed " + std::to_string(seed) + ": " + e.what();
      }
    }
  }
  for (auto& row : report.rows) summarize(row);
  return report;
}

namespace {

const char* isolation_label(const AblationRow& row) {
  if (!row.isolated) return "n/a";
  return *row.isolated ? "yes" : "no";
}

}  // namespace

std::string format_ablation_table(const AblationReport& report) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-3s %-16s %8s %8s %6s %9s  %s\n", "row", "variant", "mean", "std", "seeds",
                "isolated", "error");
  out += line;
  char tag = 'A';
  for (const auto& row : report.rows) {
    std::snprintf(line, sizeof line, "%-3c %-16s %8.4f %8.4f %6zu %9s  %s\n", tag++, to_string(row.variant).c_str(),
                  row.mean, row.stddev, row.accuracies.size(), isolation_label(row), row.error.c_str());
    out += line;
  }
  return out;
}

void write_ablation_csv(std::ostream& out, const AblationReport& report) {
  out << "variant,mean,std,seeds,isolated,error\n";
  for (const auto& row : report.rows) {
    std::string err = row.error;
    for (char& c : err) {
      if (c == ',' || c == '\n') c = ';';
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f,%.6f", row.mean, row.stddev);
    out << to_string(row.variant) << "," << buf << "," << row.accuracies.size() << "," << isolation_label(row) << ","
        << err << "\n";
  }
}

}  // namespace pointcpr
