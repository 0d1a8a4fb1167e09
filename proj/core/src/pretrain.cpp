#include "pointcpr/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "pointcpr/errors.hpp"
#include "pointcpr/ops.hpp"

namespace pointcpr {

Tensor semantic_term(const Tensor& r_s, const Tensor& p_m) { return chamfer_l2_mean(r_s, p_m); }

Tensor position_term(const Tensor& r_p, const Tensor& c_m) { return chamfer_l2(r_p, c_m); }

LossTerms reconstruction_loss(const Tensor& r_s, const Tensor& r_p, const Tensor& p_m, const Tensor& c_m) {
  LossTerms t;
  t.semantic = semantic_term(r_s, p_m);
  t.position = position_term(r_p, c_m);
  t.total = add(t.semantic, t.position);
  return t;
}

HeadOutputs apply_heads(const Tensor& r, const ReconHeads& heads, std::size_t patch_size) {
  const std::size_t masked = r.dim(0);
  HeadOutputs out;
  out.semantic = reshape(mlp_forward(r, heads.semantic), {masked, patch_size, 3});
  out.position = mlp_forward(r, heads.position);
  return out;
}

Tensor decode_masked(const PointCprModel& model, const PatchSet& patches, const MaskPartition& mask) {
  if (!model.has_decoder()) throw ConfigError("model was built without a decoder");
  const Tensor en = encode_visible(model, patches, mask);
  const Tensor tp = embed_position(gather_centers(patches, mask.visible), model.embedding, PositionTable::decoder);
  const std::size_t masked = mask.masked.size();
  switch (model.config.decoder) {
    case DecoderKind::partial:
      return decode(en, tp, masked, model.decoder, model.embedding.mask_query);
    case DecoderKind::vanilla: {
      const Tensor centers = gather_centers(patches, mask.masked);
      return decode_vanilla(en, tp, masked, model.vanilla_decoder, model.embedding.mask_query, &centers, true);
    }
    case DecoderKind::vanilla_nopos:
      return decode_vanilla(en, tp, masked, model.vanilla_decoder, model.embedding.mask_query, nullptr, false);
  }
  throw ConfigError("unknown decoder kind");
}

PretrainForward pretrain_forward(const PatchSet& patches, const MaskPartition& mask, const PointCprModel& model) {
  if (mask.masked.empty()) throw ArgumentError("pretrain_forward: mask has no masked patches");
  PretrainForward out;
  out.prediction = apply_heads(decode_masked(model, patches, mask), model.heads, patches.patch_size);
  out.loss = reconstruction_loss(out.prediction.semantic, out.prediction.position,
                                 gather_relcoords(patches, mask.masked), gather_centers(patches, mask.masked));
  return out;
}

LossTerms pretrain_loss(const PointCloud& cloud, const PointCprModel& model, std::uint64_t mask_seed) {
  const PatchSet patches = prepare_patches(cloud, model.config);
  const MaskPartition mask = make_mask(patches.num_patches, model.config.mask_ratio, mask_seed);
  return pretrain_forward(patches, mask, model).loss;
}

TrainState make_train_state(const ModelConfig& config, std::uint64_t seed) {
  TrainState state{build_model(config, ModelTarget::full_pretrain, seed), AdamW{}, 0, seed, {}};
  state.optimizer = AdamW(state.model.params, config.optim);
  return state;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string diagnostics(const TrainState& state, std::size_t index, double total, double semantic,
                        double position, double lr) {
  double norm = 0.0;
  bool finite_params = true;
  for (const auto& p : state.model.params.items()) {
    for (double v : p.tensor.data()) {
      norm += v * v;
      finite_params = finite_params && std::isfinite(v);
    }
  }
  std::ostringstream os;
  os << "non-finite pretraining loss at step " << state.step << " (batch item " << index << "): total=" << total
     << " semantic=" << semantic << " position=" << position << " lr=" << lr
     << " param_norm=" << std::sqrt(norm) << " params_finite=" << (finite_params ? "yes" : "no");
  return os.str();
}

}  // namespace

std::uint64_t mask_seed_for(std::uint64_t seed, std::size_t step, std::size_t index) {
  return splitmix64(splitmix64(splitmix64(seed) ^ step) ^ index);
}

LossRecord train_step(TrainState& state, std::span<const PatchSet> batch) {
  if (batch.empty()) throw ArgumentError("train_step: empty batch");
  const ModelConfig& cfg = state.model.config;
  const double lr = cosine_lr(state.step, cfg.optim);
  const double inv = 1.0 / static_cast<double>(batch.size());

  state.model.params.zero_grad();
  LossRecord rec;
  rec.step = state.step + 1;
  rec.lr = lr;
  {
    GradTape tape;
    Tensor total;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const MaskPartition mask =
          make_mask(batch[i].num_patches, cfg.mask_ratio, mask_seed_for(state.seed, state.step, i));
      const LossTerms t = pretrain_forward(batch[i], mask, state.model).loss;
      const double tv = t.total.item();
      if (!std::isfinite(tv)) {
        throw NumericError(diagnostics(state, i, tv, t.semantic.item(), t.position.item(), lr));
      }
      rec.total += tv * inv;
      rec.semantic += t.semantic.item() * inv;
      rec.position += t.position.item() * inv;
      total = total.defined() ? add(total, t.total) : t.total;
    }
    tape.backward(scale(total, inv));
  }
  state.optimizer.step(state.model.params, lr);
  ++state.step;
  state.history.push_back(rec);
  return rec;
}

LossRecord train_step(TrainState& state, std::span<const PointCloud> batch) {
  std::vector<PatchSet> patches;
  patches.reserve(batch.size());
  for (const auto& c : batch) patches.push_back(prepare_patches(c, state.model.config));
  return train_step(state, std::span<const PatchSet>(patches));
}

void pretrain(TrainState& state, std::span<const PatchSet> data, std::size_t steps) {
  if (data.empty()) throw ArgumentError("pretrain: no training clouds");
  const std::size_t b = std::min(state.model.config.batch_size, data.size());
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(splitmix64(state.seed ^ 0x5eedULL));
  std::size_t cursor = order.size();
  std::vector<PatchSet> batch;
  for (std::size_t s = 0; s < steps; ++s) {
    batch.clear();
    while (batch.size() < b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(data[order[cursor++]]);
    }
    train_step(state, std::span<const PatchSet>(batch));
  }
}

void write_loss_log(std::ostream& out, std::span<const LossRecord> records) {
  out << "step,total,semantic,position,lr\n";
  char line[160];
  for (const auto& r : records) {
    std::snprintf(line, sizeof line, "%zu,%.10g,%.10g,%.10g,%.6g\n", r.step, r.total, r.semantic, r.position,
                  r.lr);
    out << line;
  }
}

}  // namespace pointcpr
