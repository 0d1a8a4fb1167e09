#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "pointcpr/ablation.hpp"
#include "pointcpr/checkpoint.hpp"
#include "pointcpr/costs.hpp"
#include "pointcpr/downstream.hpp"
#include "pointcpr/errors.hpp"
#include "pointcpr/io.hpp"
#include "pointcpr/pretrain.hpp"
#include "pointcpr/synth.hpp"

namespace fs = std::filesystem;

namespace pointcpr::cli {

namespace {

struct ConfigArgs {
  std::string path;
  std::string preset;
  std::vector<std::string> overrides;
};

void add_config_options(CLI::App* sub, ConfigArgs& args, const std::string& default_preset) {
  args.preset = default_preset;
  sub->add_option("--config", args.path, "key = value config file");
  sub->add_option("--preset", args.preset, "base configuration when no file is given")
      ->check(CLI::IsMember({"reference", "baseline", "tiny", "toy"}))
      ->capture_default_str();
  sub->add_option("--set", args.overrides, "override one key (key=value); repeatable");
}

ModelConfig resolve_config(const ConfigArgs& args) {
  ModelConfig c;
  if (!args.path.empty()) {
    c = load_config(args.path);
  } else if (args.preset == "baseline") {
    c = transformer_baseline_config();
  } else if (args.preset == "tiny") {
    c = tiny_config();
  } else if (args.preset == "toy") {
    c = toy_config();
  } else {
    c = reference_config();
  }
  for (const auto& o : args.overrides) apply_override(c, o);
  c.validate();
  return c;
}

bool has_cloud_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return ext == ".xyz" || ext == ".ply" || ext == ".off";
}

std::vector<fs::path> cloud_files(const std::string& data) {
  std::vector<fs::path> files;
  if (fs::is_directory(data)) {
    for (const auto& e : fs::directory_iterator(data)) {
      if (e.is_regular_file() && has_cloud_extension(e.path())) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  } else if (fs::is_regular_file(data)) {
    files.emplace_back(data);
  } else {
    throw ArgumentError("data path '" + data + "' does not exist");
  }
  if (files.empty()) throw ArgumentError("no .xyz/.ply/.off files under '" + data + "'");
  return files;
}

std::vector<LabeledCloud> labeled_clouds(const std::string& dir) {
  const fs::path index = fs::path(dir) / "labels.csv";
  std::ifstream in(index);
  if (!in) throw ArgumentError("'" + index.string() + "' not found; classification data needs a labels.csv");
  std::vector<LabeledCloud> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line_no == 1) continue;
    std::istringstream row(line);
    std::string file, label;
    if (!std::getline(row, file, ',') || !std::getline(row, label, ',')) {
      throw ParseError(index.string(), line_no, "expected file,label");
    }
    std::size_t value = 0;
    try {
      std::size_t used = 0;
      value = std::stoul(label, &used);
      if (used != label.size()) throw std::invalid_argument(label);
    } catch (const std::exception&) {
      throw ParseError(index.string(), line_no, "invalid label '" + label + "'");
    }
    out.push_back({read_pointcloud((fs::path(dir) / file).string()), value});
  }
  if (out.empty()) throw ArgumentError("'" + index.string() + "' lists no clouds");
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoull(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ArgumentError("invalid seed '" + tok + "'");
    }
  }
  if (seeds.empty()) throw ArgumentError("at least one seed is required");
  return seeds;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

// --- subcommands -----------------------------------------------------------

struct PretrainArgs {
  ConfigArgs config;
  std::string data;
  std::string out;
  std::string log;
  std::size_t steps = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

int cmd_pretrain(const PretrainArgs& a, std::ostream& out, std::ostream& err) {
  ModelConfig c = resolve_config(a.config);
  const std::uint64_t seed = a.seed_set ? a.seed : c.seed;
  const std::size_t steps = a.steps ? a.steps : c.steps;
  std::vector<PatchSet> data;
  for (const auto& f : cloud_files(a.data)) data.push_back(prepare_patches(read_pointcloud(f.string()), c));
  TrainState state = make_train_state(c, seed);
  pretrain(state, data, steps);
  save_checkpoint(a.out, state);
  const std::string log = a.log.empty() ? a.out + ".loss.csv" : a.log;
  std::ofstream lf(log);
  if (!lf) throw ArgumentError("cannot write loss log '" + log + "'");
  write_loss_log(lf, state.history);
  (void)err;
  out << "pretrained " << steps << " steps on " << data.size() << " clouds: loss " << state.history.front().total
      << " -> " << state.history.back().total << "\n";
  out << "checkpoint " << a.out << "\nloss log " << log << "\n";
  return 0;
}

struct ClassifyArgs {
  std::string ckpt;
  std::string data;
  std::vector<std::string> overrides;
  double val_fraction = 0.25;
  std::uint64_t seed = 0;
  bool scratch = false;
  std::string csv;
};

int cmd_classify(const ClassifyArgs& a, std::ostream& out, std::ostream& err) {
  LoadedCheckpoint ck = load_checkpoint(a.ckpt);
  for (const auto& w : ck.warnings) err << "warning: " << w << "\n";
  ModelConfig c = ck.state.model.config;
  const auto data = labeled_clouds(a.data);
  std::size_t classes = 0;
  for (const auto& d : data) classes = std::max(classes, d.label + 1);
  c.classes = classes;
  for (const auto& o : a.overrides) apply_override(c, o);
  c.validate();
  const auto [train, val] = split_dataset(data, a.val_fraction, a.seed);
  const AccuracyReport rep = finetune_classify(train, val, a.scratch ? nullptr : &ck.state.model.params, c, a.seed);
  write_accuracy_csv(out, rep);
  if (!a.csv.empty()) {
    std::ofstream f(a.csv);
    if (!f) throw ArgumentError("cannot write '" + a.csv + "'");
    write_accuracy_csv(f, rep);
  }
  return 0;
}

struct CompleteArgs {
  std::string ckpt;
  std::string in;
  std::string out;
  std::string gt;
  std::size_t slots = 0;
  bool normalize = false;
};

int cmd_complete(const CompleteArgs& a, std::ostream& out, std::ostream& err) {
  LoadedCheckpoint ck = load_checkpoint(a.ckpt);
  for (const auto& w : ck.warnings) err << "warning: " << w << "\n";
  const PointCprModel& model = ck.state.model;
  PointCloud partial = read_pointcloud(a.in);
  Normalization frame;
  if (a.normalize) partial = normalize(partial, &frame);

  CompletionRequest req = make_completion_request(partial, model.config);
  if (a.slots) req.masked_slots = a.slots;
  if (!a.gt.empty()) {
    PointCloud gt = read_pointcloud(a.gt);
    if (a.normalize) {
      std::vector<Point3> pts;
      for (const auto& p : gt.points()) {
        pts.push_back({(p[0] - frame.centroid[0]) / frame.scale, (p[1] - frame.centroid[1]) / frame.scale,
                       (p[2] - frame.centroid[2]) / frame.scale});
      }
      gt = PointCloud(std::move(pts));
    }
    req.ground_truth = std::move(gt);
  }
  CompletionResult res = complete(req, model);
  PointCloud result = res.completed;
  if (a.normalize) {
    std::vector<Point3> pts;
    for (const auto& p : result.points()) {
      pts.push_back({p[0] * frame.scale + frame.centroid[0], p[1] * frame.scale + frame.centroid[1],
                     p[2] * frame.scale + frame.centroid[2]});
    }
    result = PointCloud(std::move(pts));
  }
  write_pointcloud(a.out, result);
  out << "points=" << result.size() << " input=" << partial.size() << " visible_patches=" << res.visible_patches
      << " synthesized=" << res.synthesized_points << "\n";
  if (res.chamfer_l1) {
    out << "chamfer_l1=" << *res.chamfer_l1 << "\nchamfer_l2=" << *res.chamfer_l2
        << "\npartial_chamfer_l2=" << *res.partial_chamfer_l2 << "\n";
  }
  return 0;
}

struct CountArgs {
  ConfigArgs config;
  std::string target = "classifier";
  std::string csv;
  bool no_enumerate = false;
};

int cmd_count(const CountArgs& a, std::ostream& out) {
  const ModelConfig c = resolve_config(a.config);
  const CostReport rep = count_costs(c, parse_target(a.target), !a.no_enumerate);
  out << format_cost_table(rep);
  if (!a.csv.empty()) {
    std::ofstream f(a.csv);
    if (!f) throw ArgumentError("cannot write '" + a.csv + "'");
    write_cost_csv(f, rep);
  }
  if (rep.enumerated_params && *rep.enumerated_params != rep.total_params) {
    throw NumericError("analytic parameter count disagrees with enumeration");
  }
  return 0;
}

struct AblateArgs {
  ConfigArgs config;
  std::string seeds = "0";
  std::vector<std::string> variants;
  std::size_t train_per_class = 20;
  std::size_t val_per_class = 10;
  std::size_t steps = 0;
  std::string csv;
};

int cmd_ablate(const AblateArgs& a, std::ostream& out) {
  const ModelConfig c = resolve_config(a.config);
  std::vector<AblationVariant> variants;
  for (const auto& v : a.variants) variants.push_back(parse_variant(v));
  if (variants.empty()) variants = all_variants();
  AblationOptions opt;
  opt.train_per_class = a.train_per_class;
  opt.val_per_class = a.val_per_class;
  opt.pretrain_steps = a.steps;
  const auto seeds = parse_seeds(a.seeds);
  const AblationReport rep = run_ablation(c, variants, seeds, opt);
  out << format_ablation_table(rep);
  if (!a.csv.empty()) {
    std::ofstream f(a.csv);
    if (!f) throw ArgumentError("cannot write '" + a.csv + "'");
    write_ablation_csv(f, rep);
  }
  return 0;
}

struct SynthArgs {
  std::string spec;
  std::string out;
  std::string format = "xyz";
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  std::ifstream in(a.spec);
  if (!in) throw ArgumentError("cannot read synth spec '" + a.spec + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const SynthSpec spec = parse_synth_spec(buf.str());
  const CloudFormat format = parse_format(a.format);
  fs::create_directories(a.out);
  std::ofstream labels(fs::path(a.out) / "labels.csv");
  if (!labels) throw ArgumentError("cannot write into '" + a.out + "'");
  labels << "file,label,class\n";
  std::map<std::size_t, std::size_t> counters;
  for (const auto& d : synth_dataset(spec)) {
    const std::string cls = to_string(spec.classes[d.label]);
    char name[64];
    std::snprintf(name, sizeof name, "%s_%04zu.%s", cls.c_str(), counters[d.label]++, to_string(format).c_str());
    write_pointcloud((fs::path(a.out) / name).string(), d.cloud, format);
    labels << name << "," << d.label << "," << cls << "\n";
  }
  out << "wrote " << spec.classes.size() * spec.per_class << " clouds to " << a.out << "\n";
  return 0;
}

const char* error_kind(const std::exception& e) {
  if (dynamic_cast<const ParseError*>(&e)) return "parse";
  if (dynamic_cast<const CheckpointError*>(&e)) return "checkpoint";
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const DimensionError*>(&e)) return "dimension";
  if (dynamic_cast<const ValidationError*>(&e)) return "validation";
  if (dynamic_cast<const ArgumentError*>(&e)) return "argument";
  if (dynamic_cast<const NumericError*>(&e)) return "numeric";
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return "io";
  return "runtime";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Point-cloud masked pretraining with a compact encoder and partial-aware decoder", "pointcpr"};
  app.require_subcommand(1);

  PretrainArgs pa;
  auto* pretrain_cmd = app.add_subcommand("pretrain", "pretrain on a directory of point clouds");
  add_config_options(pretrain_cmd, pa.config, "reference");
  pretrain_cmd->add_option("--data", pa.data, "cloud file or directory of .xyz/.ply/.off files")->required();
  pretrain_cmd->add_option("--out", pa.out, "checkpoint path")->required();
  pretrain_cmd->add_option("--log", pa.log, "loss CSV path (default <out>.loss.csv)");
  pretrain_cmd->add_option("--steps", pa.steps, "override the configured step count");
  auto* seed_opt = pretrain_cmd->add_option("--seed", pa.seed, "initialization and masking seed");

  ClassifyArgs ca;
  auto* classify_cmd = app.add_subcommand("classify", "fine-tune a classifier from a checkpoint");
  classify_cmd->add_option("--ckpt", ca.ckpt, "pretrained checkpoint")->required();
  classify_cmd->add_option("--data", ca.data, "directory with labels.csv")->required();
  classify_cmd->add_option("--set", ca.overrides, "override one key (key=value); repeatable");
  classify_cmd->add_option("--val-fraction", ca.val_fraction, "held-out fraction per class")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  classify_cmd->add_option("--seed", ca.seed, "split and fine-tuning seed");
  classify_cmd->add_flag("--scratch", ca.scratch, "ignore the checkpoint weights");
  classify_cmd->add_option("--csv", ca.csv, "also write the accuracy report here");

  CompleteArgs co;
  auto* complete_cmd = app.add_subcommand("complete", "synthesize missing patches of a partial cloud");
  complete_cmd->add_option("--ckpt", co.ckpt, "pretrained checkpoint")->required();
  complete_cmd->add_option("--in", co.in, "partial cloud")->required();
  complete_cmd->add_option("--out", co.out, "completed cloud")->required();
  complete_cmd->add_option("--gt", co.gt, "ground-truth cloud; prints chamfer_l1 and chamfer_l2");
  complete_cmd->add_option("--slots", co.slots, "masked slots to synthesize (default round(mask_ratio*M))");
  complete_cmd->add_flag("--normalize", co.normalize, "normalize the input and map the output back");

  CountArgs cn;
  auto* count_cmd = app.add_subcommand("count", "parameter and FLOP accounting");
  add_config_options(count_cmd, cn.config, "reference");
  count_cmd->add_option("--target", cn.target, "encoder-only, full-pretrain or classifier")->capture_default_str();
  count_cmd->add_option("--csv", cn.csv, "also write the report as CSV");
  count_cmd->add_flag("--no-enumerate", cn.no_enumerate, "skip instantiating the model");

  AblateArgs ab;
  auto* ablate_cmd = app.add_subcommand("ablate", "decoder ablation on synthetic shapes");
  add_config_options(ablate_cmd, ab.config, "toy");
  ablate_cmd->add_option("--seeds", ab.seeds, "comma-separated seeds")->capture_default_str();
  ablate_cmd->add_option("--variants", ab.variants, "subset of scratch, vanilla-no-pos, vanilla, partial-aware")
      ->delimiter(',');
  ablate_cmd->add_option("--train-per-class", ab.train_per_class)->capture_default_str();
  ablate_cmd->add_option("--val-per-class", ab.val_per_class)->capture_default_str();
  ablate_cmd->add_option("--steps", ab.steps, "pretraining steps per variant (default: config steps)");
  ablate_cmd->add_option("--csv", ab.csv, "also write the table as CSV");

  SynthArgs sy;
  auto* synth_cmd = app.add_subcommand("synth", "write a labeled synthetic shape dataset");
  synth_cmd->add_option("--spec", sy.spec, "spec file, e.g. 'classes=sphere,cube count=10 points=1024 noise=0.01'")
      ->required();
  synth_cmd->add_option("--out", sy.out, "output directory")->required();
  synth_cmd->add_option("--format", sy.format, "xyz, ply or off")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error[usage]: " << one_line(e.what()) << "\n";
    err << "run with --help for usage\n";
    return 2;
  }
  pa.seed_set = seed_opt->count() > 0;

  try {
    if (*pretrain_cmd) return cmd_pretrain(pa, out, err);
    if (*classify_cmd) return cmd_classify(ca, out, err);
    if (*complete_cmd) return cmd_complete(co, out, err);
    if (*count_cmd) return cmd_count(cn, out);
    if (*ablate_cmd) return cmd_ablate(ab, out);
    if (*synth_cmd) return cmd_synth(sy, out);
  } catch (const std::exception& e) {
    err << "error[" << error_kind(e) << "]: " << one_line(e.what()) << "\n";
    return 1;
  }
  return 2;
}

}  // namespace pointcpr::cli
