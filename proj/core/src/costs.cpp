#include "pointcpr/costs.hpp"

#include <cstdio>
#include <ostream>

namespace pointcpr {

namespace {

using Widths = std::vector<std::size_t>;

std::size_t linear_params(std::size_t in, std::size_t out) { return in * out + out; }

std::size_t mlp_params(const Widths& w) {
  std::size_t n = 0;
  for (std::size_t i = 0; i + 1 < w.size(); ++i) n += linear_params(w[i], w[i + 1]);
  return n;
}

double mlp_macs(const Widths& w) {
  double n = 0.0;
  for (std::size_t i = 0; i + 1 < w.size(); ++i) n += static_cast<double>(w[i]) * static_cast<double>(w[i + 1]);
  return n;
}

std::size_t norm_params(std::size_t d) { return 2 * d; }
std::size_t attention_params(std::size_t d) { return 4 * linear_params(d, d); }
Widths ffn_widths(const ModelConfig& c) { return {c.dim, c.dim * c.ffn_ratio, c.dim}; }

std::size_t transformer_layer_params(const ModelConfig& c) {
  return 2 * norm_params(c.dim) + attention_params(c.dim) + mlp_params(ffn_widths(c));
}

Widths lam_widths(const ModelConfig& c) {
  Widths w{2 * c.dim};
  w.insert(w.end(), c.lam_hidden.begin(), c.lam_hidden.end());
  w.push_back(c.dim);
  return w;
}

/// Attention FLOPs for `lq` queries over `lk` keys.
double attention_flops(double lq, double lk, double d) {
  const double proj = 2.0 * d * d * (2.0 * lq + 2.0 * lk);
  return proj + 2.0 * lq * lk * d + 2.0 * lq * lk * d;
}

double d(std::size_t v) { return static_cast<double>(v); }

}  // namespace

std::size_t compact_layer_params(const ModelConfig& c) {
  return 2 * norm_params(c.dim) + mlp_params(lam_widths(c)) + linear_params(c.dim, c.dim) + mlp_params(ffn_widths(c));
}

CostReport count_costs(const ModelConfig& config, ModelTarget target, bool enumerate) {
  config.validate();
  const ModelConfig& c = config;
  CostReport rep;
  rep.config = config;
  rep.target = target;
  const bool pretrain = target == ModelTarget::full_pretrain;

  std::size_t embed = mlp_params({3, c.embed_hidden1, c.embed_hidden2}) + linear_params(c.embed_hidden2, c.dim) +
                      mlp_params({3, c.pos_hidden, c.dim});
  if (pretrain) {
    const bool per_slot = c.decoder == DecoderKind::partial && c.mask_query == MaskQueryMode::per_slot;
    embed += mlp_params({3, c.pos_hidden, c.dim}) + (per_slot ? c.num_patches : 1) * c.dim;
  }
  const std::size_t encoder = c.encoder_depth * (c.encoder == EncoderKind::compact ? compact_layer_params(c)
                                                                                    : transformer_layer_params(c));
  rep.modules.push_back({"embedding", embed});
  rep.modules.push_back({"encoder", encoder});
  if (pretrain) {
    std::size_t dec = norm_params(c.dim);
    if (c.decoder == DecoderKind::partial) {
      const std::size_t ppm = 3 * norm_params(c.dim) + 2 * attention_params(c.dim) + mlp_params(ffn_widths(c));
      dec += c.decoder_depth * (ppm + transformer_layer_params(c));
    } else {
      dec += c.decoder_depth * transformer_layer_params(c);
      if (c.decoder == DecoderKind::vanilla) dec += mlp_params({3, c.pos_hidden, c.dim});
    }
    rep.modules.push_back({"decoder", dec});
    rep.modules.push_back({"heads", mlp_params({c.dim, c.recon_hidden, 3 * c.patch_size}) +
                                        mlp_params({c.dim, c.recon_hidden, 3})});
  }
  if (target == ModelTarget::classifier) {
    rep.modules.push_back({"classifier", mlp_params({2 * c.dim, c.cls_hidden, c.cls_hidden, c.classes})});
  }
  for (const auto& m : rep.modules) rep.total_params += m.params;

  // FLOPs for one cloud.
  const double dim = d(c.dim);
  const double m_all = d(c.num_patches);
  const double v = pretrain ? d(c.visible_count()) : m_all;
  const double masked = pretrain ? d(c.masked_count()) : 0.0;
  const double k = d(c.patch_size);
  FlopBreakdown& f = rep.flops;

  f.knn += 6.0 * m_all * d(c.num_points);  // FPS distance updates
  f.knn += 6.0 * m_all * d(c.num_points);  // patch grouping
  f.matmul += 2.0 * v * k * mlp_macs({3, c.embed_hidden1, c.embed_hidden2});
  f.pooling += v * d(c.embed_hidden2) * (k - 1.0);
  f.matmul += 2.0 * v * mlp_macs({c.embed_hidden2, c.dim});
  f.matmul += 2.0 * v * mlp_macs({3, c.pos_hidden, c.dim});

  const double ffn = mlp_macs(ffn_widths(c));
  if (c.encoder == EncoderKind::compact) {
    const double lk = d(c.lam_k);
    f.knn += 6.0 * v * v;
    for (std::size_t i = 0; i < c.encoder_depth; ++i) {
      f.matmul += 2.0 * v * lk * mlp_macs(lam_widths(c));
      f.pooling += v * dim * (lk - 1.0);
      f.matmul += 2.0 * v * dim * dim;
      f.matmul += 2.0 * v * ffn;
    }
  } else {
    for (std::size_t i = 0; i < c.encoder_depth; ++i) {
      f.attention += attention_flops(v, v, dim);
      f.matmul += 2.0 * v * ffn;
    }
  }

  if (pretrain) {
    const double all = v + masked;
    f.matmul += 2.0 * v * mlp_macs({3, c.pos_hidden, c.dim});
    if (c.decoder == DecoderKind::partial) {
      for (std::size_t i = 0; i < c.decoder_depth; ++i) {
        f.attention += attention_flops(masked, masked, dim) + attention_flops(masked, v, dim);
        f.matmul += 2.0 * masked * ffn;
        f.attention += attention_flops(all, all, dim);
        f.matmul += 2.0 * all * ffn;
      }
    } else {
      if (c.decoder == DecoderKind::vanilla) f.matmul += 2.0 * masked * mlp_macs({3, c.pos_hidden, c.dim});
      for (std::size_t i = 0; i < c.decoder_depth; ++i) {
        f.attention += attention_flops(all, all, dim);
        f.matmul += 2.0 * all * ffn;
      }
    }
    f.matmul += 2.0 * masked * (mlp_macs({c.dim, c.recon_hidden, 3 * c.patch_size}) + mlp_macs({c.dim, c.recon_hidden, 3}));
  }
  if (target == ModelTarget::classifier) {
    f.pooling += 2.0 * dim * (v - 1.0);
    f.matmul += 2.0 * mlp_macs({2 * c.dim, c.cls_hidden, c.cls_hidden, c.classes});
  }

  if (enumerate) rep.enumerated_params = build_model(config, target, 0).params.count();
  return rep;
}

std::string format_cost_table(const CostReport& r) {
  std::string out;
  char line[128];
  std::snprintf(line, sizeof line, "target: %s\n", to_string(r.target).c_str());
  out += line;
  std::snprintf(line, sizeof line, "%-14s %14s\n", "module", "params");
  out += line;
  for (const auto& m : r.modules) {
    std::snprintf(line, sizeof line, "%-14s %14zu\n", m.module.c_str(), m.params);
    out += line;
  }
  std::snprintf(line, sizeof line, "%-14s %14zu  (%.3f M)\n", "total", r.total_params, r.total_params / 1e6);
  out += line;
  if (r.enumerated_params) {
    std::snprintf(line, sizeof line, "%-14s %14zu  %s\n", "enumerated", *r.enumerated_params,
                  *r.enumerated_params == r.total_params ? "match" : "MISMATCH");
    out += line;
  }
  std::snprintf(line, sizeof line, "%-14s %14s\n", "flops", "GFLOPs");
  out += line;
  const std::pair<const char*, double> rows[] = {{"matmul", r.flops.matmul},
                                                 {"attention", r.flops.attention},
                                                 {"knn", r.flops.knn},
                                                 {"pooling", r.flops.pooling},
                                                 {"total", r.flops.total()}};
  for (const auto& [name, value] : rows) {
    std::snprintf(line, sizeof line, "%-14s %14.6f\n", name, value / 1e9);
    out += line;
  }
  return out;
}

void write_cost_csv(std::ostream& out, const CostReport& r) {
  out << "section,name,value\n";
  for (const auto& m : r.modules) out << "params," << m.module << "," << m.params << "\n";
  out << "params,total," << r.total_params << "\n";
  if (r.enumerated_params) out << "params,enumerated," << *r.enumerated_params << "\n";
  char buf[64];
  const std::pair<const char*, double> rows[] = {{"matmul", r.flops.matmul},
                                                 {"attention", r.flops.attention},
                                                 {"knn", r.flops.knn},
                                                 {"pooling", r.flops.pooling},
                                                 {"total", r.flops.total()}};
  for (const auto& [name, value] : rows) {
    std::snprintf(buf, sizeof buf, "%.0f", value);
    out << "flops," << name << "," << buf << "\n";
  }
}

}  // namespace pointcpr
