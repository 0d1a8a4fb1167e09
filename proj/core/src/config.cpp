#include "pointcpr/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "pointcpr/errors.hpp"

namespace pointcpr {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::size_t parse_size(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ConfigError("key '" + std::string(key) + "': expected a non-negative integer, got '" +
                      std::string(v) + "'");
  }
  return out;
}

std::uint64_t parse_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ConfigError("key '" + std::string(key) + "': expected an unsigned integer, got '" +
                      std::string(v) + "'");
  }
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  std::string s(v);
  char* end = nullptr;
  const double out = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(out)) {
    throw ConfigError("key '" + std::string(key) + "': expected a finite number, got '" + s + "'");
  }
  return out;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::size_t> parse_size_list(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  if (v.empty() || v == "none") return out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const auto comma = v.find(',', start);
    const auto piece = trim(v.substr(start, comma == std::string_view::npos ? v.npos : comma - start));
    out.push_back(parse_size(key, piece));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string format_size_list(const std::vector<std::size_t>& v) {
  if (v.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

template <typename Enum>
Enum parse_enum(std::string_view key, std::string_view v,
                std::initializer_list<std::pair<std::string_view, Enum>> options) {
  for (const auto& [name, value] : options) {
    if (name == v) return value;
  }
  std::string allowed;
  for (const auto& [name, value] : options) {
    if (!allowed.empty()) allowed += '|';
    allowed += name;
  }
  throw ConfigError("key '" + std::string(key) + "': expected one of " + allowed + ", got '" +
                    std::string(v) + "'");
}

struct Field {
  std::string_view key;
  std::function<void(ModelConfig&, std::string_view)> set;
  std::function<std::string(const ModelConfig&)> get;
};

#define POINTCPR_SIZE_FIELD(name, member)                                                      \
  Field {                                                                                      \
    name, [](ModelConfig& c, std::string_view v) { c.member = parse_size(name, v); },          \
        [](const ModelConfig& c) { return std::to_string(c.member); }                          \
  }
#define POINTCPR_DOUBLE_FIELD(name, member)                                                    \
  Field {                                                                                      \
    name, [](ModelConfig& c, std::string_view v) { c.member = parse_double(name, v); },        \
        [](const ModelConfig& c) { return format_double(c.member); }                           \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"format_version",
            [](ModelConfig& c, std::string_view v) {
              c.format_version = static_cast<int>(parse_size("format_version", v));
            },
            [](const ModelConfig& c) { return std::to_string(c.format_version); }},
      POINTCPR_SIZE_FIELD("num_points", num_points),
      POINTCPR_SIZE_FIELD("num_patches", num_patches),
      POINTCPR_SIZE_FIELD("patch_size", patch_size),
      POINTCPR_DOUBLE_FIELD("mask_ratio", mask_ratio),
      POINTCPR_SIZE_FIELD("dim", dim),
      POINTCPR_SIZE_FIELD("encoder_depth", encoder_depth),
      POINTCPR_SIZE_FIELD("decoder_depth", decoder_depth),
      POINTCPR_SIZE_FIELD("lam_k", lam_k),
      Field{"lam_hidden",
            [](ModelConfig& c, std::string_view v) { c.lam_hidden = parse_size_list("lam_hidden", v); },
            [](const ModelConfig& c) { return format_size_list(c.lam_hidden); }},
      POINTCPR_SIZE_FIELD("heads", heads),
      POINTCPR_SIZE_FIELD("ffn_ratio", ffn_ratio),
      POINTCPR_SIZE_FIELD("embed_hidden1", embed_hidden1),
      POINTCPR_SIZE_FIELD("embed_hidden2", embed_hidden2),
      POINTCPR_SIZE_FIELD("pos_hidden", pos_hidden),
      POINTCPR_SIZE_FIELD("recon_hidden", recon_hidden),
      POINTCPR_SIZE_FIELD("cls_hidden", cls_hidden),
      POINTCPR_SIZE_FIELD("classes", classes),
      Field{"encoder",
            [](ModelConfig& c, std::string_view v) {
              c.encoder = parse_enum<EncoderKind>(
                  "encoder", v, {{"compact", EncoderKind::compact}, {"transformer", EncoderKind::transformer}});
            },
            [](const ModelConfig& c) { return to_string(c.encoder); }},
      Field{"decoder",
            [](ModelConfig& c, std::string_view v) {
              c.decoder = parse_enum<DecoderKind>("decoder", v,
                                                  {{"partial", DecoderKind::partial},
                                                   {"vanilla", DecoderKind::vanilla},
                                                   {"vanilla_nopos", DecoderKind::vanilla_nopos}});
            },
            [](const ModelConfig& c) { return to_string(c.decoder); }},
      Field{"mask_query",
            [](ModelConfig& c, std::string_view v) {
              c.mask_query = parse_enum<MaskQueryMode>(
                  "mask_query", v, {{"per_slot", MaskQueryMode::per_slot}, {"shared", MaskQueryMode::shared}});
            },
            [](const ModelConfig& c) { return to_string(c.mask_query); }},
      Field{"fps_start",
            [](ModelConfig& c, std::string_view v) {
              c.fps_start = parse_enum<FpsStart>("fps_start", v,
                                                 {{"first", FpsStart::first}, {"farthest", FpsStart::farthest}});
            },
            [](const ModelConfig& c) { return to_string(c.fps_start); }},
      POINTCPR_DOUBLE_FIELD("lr", optim.lr),
      POINTCPR_DOUBLE_FIELD("min_lr", optim.min_lr),
      POINTCPR_DOUBLE_FIELD("beta1", optim.beta1),
      POINTCPR_DOUBLE_FIELD("beta2", optim.beta2),
      POINTCPR_DOUBLE_FIELD("adam_eps", optim.eps),
      POINTCPR_DOUBLE_FIELD("weight_decay", optim.weight_decay),
      POINTCPR_SIZE_FIELD("warmup_steps", optim.warmup_steps),
      POINTCPR_SIZE_FIELD("schedule_steps", optim.schedule_steps),
      POINTCPR_SIZE_FIELD("steps", steps),
      POINTCPR_SIZE_FIELD("batch_size", batch_size),
      POINTCPR_SIZE_FIELD("epochs", epochs),
      POINTCPR_SIZE_FIELD("finetune_batch", finetune_batch),
      POINTCPR_DOUBLE_FIELD("finetune_lr", finetune_lr),
      POINTCPR_SIZE_FIELD("pretrain_clouds", pretrain_clouds),
      Field{"seed", [](ModelConfig& c, std::string_view v) { c.seed = parse_u64("seed", v); },
            [](const ModelConfig& c) { return std::to_string(c.seed); }},
  };
  return table;
}

#undef POINTCPR_SIZE_FIELD
#undef POINTCPR_DOUBLE_FIELD

const Field& field(std::string_view key) {
  for (const auto& f : fields()) {
    if (f.key == key) return f;
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

void assign(ModelConfig& config, std::string_view line) {
  const auto eq = line.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("expected 'key = value', got '" + std::string(line) + "'");
  }
  const auto key = trim(line.substr(0, eq));
  const auto value = trim(line.substr(eq + 1));
  field(key).set(config, value);
}

}  // namespace

std::size_t ModelConfig::masked_count() const {
  return static_cast<std::size_t>(std::lround(mask_ratio * static_cast<double>(num_patches)));
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string(name) + " must be positive");
  };
  if (format_version != kFormatVersion) {
    throw ConfigError("unsupported format_version " + std::to_string(format_version));
  }
  positive(num_points, "num_points");
  positive(num_patches, "num_patches");
  positive(patch_size, "patch_size");
  positive(dim, "dim");
  positive(encoder_depth, "encoder_depth");
  positive(decoder_depth, "decoder_depth");
  positive(lam_k, "lam_k");
  positive(heads, "heads");
  positive(ffn_ratio, "ffn_ratio");
  positive(embed_hidden1, "embed_hidden1");
  positive(embed_hidden2, "embed_hidden2");
  positive(pos_hidden, "pos_hidden");
  positive(recon_hidden, "recon_hidden");
  positive(cls_hidden, "cls_hidden");
  positive(batch_size, "batch_size");
  positive(finetune_batch, "finetune_batch");
  for (std::size_t w : lam_hidden) positive(w, "lam_hidden entries");
  if (num_patches > num_points) throw ConfigError("num_patches must not exceed num_points");
  if (patch_size > num_points) throw ConfigError("patch_size must not exceed num_points");
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) throw ConfigError("mask_ratio must lie in (0, 1)");
  const std::size_t masked = masked_count();
  if (masked == 0 || masked >= num_patches) {
    throw ConfigError("mask_ratio " + format_double(mask_ratio) + " leaves no masked or no visible patch out of " +
                      std::to_string(num_patches));
  }
  if (dim % heads != 0) {
    throw ConfigError("dim " + std::to_string(dim) + " is not divisible by heads " + std::to_string(heads));
  }
  if (lam_k > visible_count()) {
    throw ConfigError("lam_k " + std::to_string(lam_k) + " exceeds the " + std::to_string(visible_count()) +
                      " visible patches left by mask_ratio");
  }
  if (classes < 2) throw ConfigError("classes must be at least 2");
}

ModelConfig reference_config() { return ModelConfig{}; }

ModelConfig transformer_baseline_config() {
  ModelConfig c;
  c.encoder = EncoderKind::transformer;
  c.dim = 384;
  c.encoder_depth = 12;
  c.heads = 6;
  c.recon_hidden = 384;
  return c;
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.num_points = 32;
  c.num_patches = 8;
  c.patch_size = 4;
  c.dim = 16;
  c.encoder_depth = 2;
  c.decoder_depth = 1;
  c.lam_k = 2;
  c.heads = 2;
  c.ffn_ratio = 2;
  c.embed_hidden1 = 8;
  c.embed_hidden2 = 16;
  c.pos_hidden = 8;
  c.recon_hidden = 16;
  c.cls_hidden = 16;
  c.classes = 3;
  return c;
}

ModelConfig toy_config() {
  ModelConfig c;
  c.num_points = 256;
  c.num_patches = 16;
  c.patch_size = 16;
  c.dim = 32;
  c.encoder_depth = 2;
  c.decoder_depth = 1;
  c.lam_k = 4;
  c.heads = 4;
  c.ffn_ratio = 2;
  c.embed_hidden1 = 32;
  c.embed_hidden2 = 64;
  c.pos_hidden = 32;
  c.recon_hidden = 64;
  c.cls_hidden = 64;
  c.classes = 4;
  c.steps = 200;
  c.batch_size = 8;
  c.optim.schedule_steps = 200;
  c.optim.warmup_steps = 10;
  return c;
}

std::string config_to_text(const ModelConfig& config) {
  std::string out;
  for (const auto& f : fields()) {
    out += f.key;
    out += " = ";
    out += f.get(config);
    out += '\n';
  }
  return out;
}

ModelConfig parse_config(std::string_view text, const std::string& source) {
  ModelConfig config;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (!line.empty()) {
      try {
        assign(config, line);
      } catch (const ConfigError& e) {
        throw ParseError(source, line_no, e.what());
      }
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return config;
}

ModelConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

void apply_override(ModelConfig& config, std::string_view assignment) { assign(config, trim(assignment)); }

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.emplace_back(f.key);
  return keys;
}

std::string to_string(EncoderKind kind) { return kind == EncoderKind::compact ? "compact" : "transformer"; }

std::string to_string(DecoderKind kind) {
  switch (kind) {
    case DecoderKind::partial:
      return "partial";
    case DecoderKind::vanilla:
      return "vanilla";
    case DecoderKind::vanilla_nopos:
      return "vanilla_nopos";
  }
  return "?";
}

std::string to_string(MaskQueryMode mode) { return mode == MaskQueryMode::per_slot ? "per_slot" : "shared"; }

std::string to_string(FpsStart start) { return start == FpsStart::first ? "first" : "farthest"; }

}  // namespace pointcpr
