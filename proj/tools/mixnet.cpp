// mixnet: synthesis, training, inference, evaluation and reporting front end.
//
// Exit codes: 0 success, 1 validation failure, 2 missing input.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "mixnet/eval/noise.hpp"
#include "mixnet/fsnet/accounting.hpp"
#include "mixnet/fsnet/checkpoint.hpp"
#include "mixnet/pipeline/experiment.hpp"
#include "mixnet/pipeline/gradsuite.hpp"

namespace fs = std::filesystem;
using namespace mixnet;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kMissing = 2;

class MissingInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void require_file(const std::string& path, const std::string& what) {
  if (!fs::exists(path)) throw MissingInput(what + " not found: " + path);
}

std::vector<std::string> config_dirs() {
  std::vector<std::string> dirs;
  if (const char* env = std::getenv("MIXNET_CONFIG_DIR"); env && *env) dirs.emplace_back(env);
#ifdef MIXNET_DEFAULT_CONFIG_DIR
  dirs.emplace_back(MIXNET_DEFAULT_CONFIG_DIR);
#endif
  return dirs;
}

/// A path, or a name looked up as <dir>/<name>, <dir>/<name>.toml and
/// <dir>/profiles/<name>.toml in MIXNET_CONFIG_DIR and then the shipped configs.
std::string resolve_config(const std::string& name) {
  if (fs::is_regular_file(name)) return name;
  for (const auto& dir : config_dirs()) {
    for (const auto& candidate : {fs::path(dir) / name, fs::path(dir) / (name + ".toml"),
                                  fs::path(dir) / "profiles" / (name + ".toml"),
                                  fs::path(dir) / "models" / (name + ".toml")}) {
      if (fs::is_regular_file(candidate)) return candidate.string();
    }
  }
  throw MissingInput("config '" + name + "' not found (set MIXNET_CONFIG_DIR or pass a path)");
}

Profile load_profile(const std::string& name) { return Profile::load(resolve_config(name)); }

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

eval::SizeBuckets buckets_named(const std::string& name) {
  if (name == "desk") return eval::SizeBuckets::desk();
  if (name == "coco") return eval::SizeBuckets::coco();
  throw ConfigError("unknown bucket set '" + name + "' (expected desk or coco)");
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string profile = "desk";
  std::string out;
  std::string split = "train";
  int count = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool json = false;
};

int cmd_synth(const SynthArgs& a) {
  const auto p = load_profile(a.profile);
  if (a.split != "train" && a.split != "test") throw ConfigError("--split must be train or test");
  const int count = a.count > 0 ? a.count : (a.split == "train" ? p.train_images : p.test_images);
  const auto seed = a.seed_set ? a.seed : (a.split == "train" ? p.train_seed : p.test_seed);
  const auto m = synth::make_dataset(p.synth, count, a.out, seed);
  std::array<int, 3> per_bucket{};
  int instances = 0;
  for (const auto& r : eval::read_jsonl((fs::path(a.out) / m.gt_file).string())) {
    for (const auto& d : r.detections) {
      ++instances;
      ++per_bucket[static_cast<std::size_t>(p.buckets.bucket_of(geom::area(d.polygon)))];
    }
  }
  if (a.json) {
    std::cout << json{{"dir", a.out},       {"images", m.entries.size()},
                      {"seed", seed},       {"instances", instances},
                      {"small", per_bucket[0]}, {"medium", per_bucket[1]},
                      {"large", per_bucket[2]}}
                     .dump(2)
              << "\n";
  } else {
    std::cout << "wrote " << m.entries.size() << " images (" << instances << " instances: " << per_bucket[0]
              << " small, " << per_bucket[1] << " medium, " << per_bucket[2] << " large) to " << a.out << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string profile = "desk";
  std::string data;
  std::string out;
  std::string model;
  int epochs = 0;
  double lr = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int max_images = 0;
  std::string nan_dump;
  bool json = false;
};

int cmd_train(const TrainArgs& a) {
  auto p = load_profile(a.profile);
  if (!a.model.empty()) p.model = ModelConfig::load(resolve_config(a.model));
  if (a.epochs > 0) p.train.epochs = a.epochs;
  if (a.lr > 0) p.train.lr = a.lr;
  if (a.seed_set) p.train.seed = a.seed;
  if (a.max_images > 0) p.train.max_images = a.max_images;
  p.train.validate();
  p.model.fsnet.validate();
  p.model.ctblock.validate();
  require_file((fs::path(a.data) / "manifest.json").string(), "dataset manifest");
  const auto data = load_samples(a.data);

  MixNet model(p.model, p.train.seed);
  const auto curve = train_model(model, data, p.train, a.nan_dump.empty() ? a.out + ".nan.json" : a.nan_dump);
  model.save(a.out);
  write_loss_csv(a.out + ".loss.csv", curve);
  write_text(a.out + ".train.toml", p.to_text());

  const bool decreasing = curve.size() >= 2 && curve.back().total < curve.front().total;
  if (a.json) {
    json epochs = json::array();
    for (const auto& e : curve) {
      epochs.push_back({{"epoch", e.epoch}, {"lr", e.lr}, {"total", e.total}, {"classification", e.classification},
                        {"distance", e.distance}, {"orientation", e.orientation}, {"embedding", e.embedding},
                        {"center", e.center}, {"refine", e.refine}});
    }
    std::cout << json{{"checkpoint", a.out}, {"params", model.params().total_elements()}, {"epochs", epochs},
                      {"loss_decreased", decreasing}}
                     .dump(2)
              << "\n";
  } else {
    std::cout << "checkpoint " << a.out << ".bin / .manifest, loss curve " << a.out << ".loss.csv\n"
              << "loss " << curve.front().total << " -> " << curve.back().total
              << (decreasing ? " (decreasing)\n" : " (NOT decreasing)\n");
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct InferArgs {
  std::string checkpoint;
  std::vector<std::string> images;
  std::string data;
  std::string out;
  std::string svg_dir;
  std::string profile = "desk";
  double threshold = -1;
  int contour_points = 0;
  double min_score = -1;
  bool json = false;
};

int cmd_infer(const InferArgs& a) {
  for (const char* ext : {".bin", ".manifest"}) require_file(a.checkpoint + ext, "checkpoint");
  auto cfg = load_profile(a.profile).infer;
  if (a.threshold >= 0) cfg.threshold = a.threshold;
  if (a.contour_points > 0) cfg.contour_points = a.contour_points;
  if (a.min_score >= 0) cfg.min_score = a.min_score;
  if (!(cfg.threshold > 0 && cfg.threshold < 1)) throw ConfigError("--threshold must lie in (0, 1)");

  std::vector<std::pair<std::string, std::string>> inputs;  // id, path
  for (const auto& path : a.images) inputs.emplace_back(fs::path(path).stem().string(), path);
  if (!a.data.empty()) {
    require_file((fs::path(a.data) / "manifest.json").string(), "dataset manifest");
    for (const auto& e : synth::load_manifest(a.data).entries) {
      inputs.emplace_back(e.image_id, (fs::path(a.data) / e.file).string());
    }
  }
  if (inputs.empty()) throw ConfigError("no input: pass --image or --data");
  for (const auto& [id, path] : inputs) require_file(path, "image");

  const auto model = MixNet::load(a.checkpoint);
  if (!a.svg_dir.empty()) fs::create_directories(a.svg_dir);
  std::ostringstream lines;
  std::size_t total = 0;
  for (const auto& [id, path] : inputs) {
    const auto image = read_png(path);
    const auto result = infer_image(*model, image, cfg);
    total += result.instances.size();
    lines << eval::to_jsonl_line(to_record(id, result), true) << "\n";
    if (!a.svg_dir.empty()) write_text((fs::path(a.svg_dir) / (id + ".svg")).string(), render_svg(image, result));
  }
  write_text(a.out, lines.str());
  if (!a.out.empty() && a.out != "-") {
    if (a.json) {
      std::cout << json{{"images", inputs.size()}, {"detections", total}, {"output", a.out}}.dump(2) << "\n";
    } else {
      std::cout << total << " detections in " << inputs.size() << " images -> " << a.out << "\n";
    }
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string pred;
  std::string gt;
  double iou = 0.5;
  std::string buckets = "desk";
  std::string out;
  bool matches = false;
  bool json = false;
};

int cmd_eval(const EvalArgs& a) {
  require_file(a.pred, "predictions");
  require_file(a.gt, "ground truth");
  if (!(a.iou > 0 && a.iou <= 1)) throw ConfigError("--iou must lie in (0, 1]");
  const auto report = eval::evaluate(eval::read_jsonl(a.pred), eval::read_jsonl(a.gt), a.iou, buckets_named(a.buckets));
  if (!a.out.empty()) write_text(a.out, report.to_json(a.matches) + "\n");
  std::cout << (a.json ? report.to_json(a.matches) + "\n" : report.to_text());
  return kOk;
}

// ---------------------------------------------------------------------------

struct NoiseArgs {
  std::vector<std::string> inputs;
  std::string output;
  std::string output_dir;
  double p = 0.1;
  std::uint64_t seed = 0;
  bool json = false;
};

int cmd_noise(const NoiseArgs& a) {
  if (!(a.p >= 0 && a.p <= 1)) throw ConfigError("--p must lie in [0, 1]");
  if (a.inputs.size() > 1 && a.output_dir.empty()) throw ConfigError("several inputs need --output-dir");
  if (a.output.empty() == a.output_dir.empty()) throw ConfigError("pass exactly one of --output and --output-dir");
  json rows = json::array();
  for (std::size_t i = 0; i < a.inputs.size(); ++i) {
    require_file(a.inputs[i], "image");
    const auto image = read_png(a.inputs[i]);
    const auto seed = a.inputs.size() == 1 ? a.seed : synth::derive_seed(a.seed, i);
    const auto noisy = eval::impulse_noise(image, a.p, seed);
    const auto dest = a.output.empty() ? (fs::path(a.output_dir) / fs::path(a.inputs[i]).filename()).string() : a.output;
    if (fs::path(dest).has_parent_path()) fs::create_directories(fs::path(dest).parent_path());
    write_png(dest, noisy);
    rows.push_back({{"input", a.inputs[i]}, {"output", dest}, {"seed", seed},
                    {"altered_fraction", eval::altered_fraction(image, noisy)}});
  }
  if (a.json) {
    std::cout << json{{"p", a.p}, {"images", rows}}.dump(2) << "\n";
  } else {
    for (const auto& r : rows) {
      std::cout << r["output"].get<std::string>() << "  altered " << r["altered_fraction"].get<double>() << "\n";
    }
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct AblateArgs {
  std::string which;
  std::string profile = "desk";
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::string work = "mixnet_work";
  std::string out;
  bool json = false;
};

int cmd_ablate(const AblateArgs& a) {
  const auto p = load_profile(a.profile);
  const auto splits = prepare_splits(p, a.work);
  ModelCache cache;
  std::vector<std::string> which;
  if (a.which == "all") {
    which = {"shuffle", "noise", "nsweep", "version"};
  } else {
    which = {a.which};
  }
  json all = json::array();
  std::string text;
  for (const auto& w : which) {
    AblationTable t;
    if (w == "shuffle") {
      t = ablate_shuffle(p, splits, a.seeds, cache);
    } else if (w == "noise") {
      t = ablate_noise(p, splits, a.seeds, cache);
    } else if (w == "nsweep") {
      t = ablate_nsweep(p, splits, a.seeds, cache);
    } else {
      t = ablate_version(p, splits, a.seeds, cache);
    }
    all.push_back(json::parse(t.to_json()));
    text += t.to_text() + "\n";
  }
  const std::string body = a.json ? all.dump(2) + "\n" : text;
  if (!a.out.empty()) write_text(a.out, body);
  std::cout << body;
  if (a.seeds.size() < 3) spdlog::warn("ablate: {} seed(s) given, verdicts need at least 3", a.seeds.size());
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_gradcheck(bool as_json) {
  const auto rows = run_gradient_suite();
  std::cout << (as_json ? gradient_suite_json(rows) + "\n" : gradient_suite_text(rows));
  for (const auto& r : rows) {
    if (!r.pass()) return kInvalid;
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct ArchArgs {
  std::string config;
  std::string version;
  std::string fusion;
  int height = 128;
  int width = 128;
  bool json = false;
};

int cmd_arch_report(const ArchArgs& a) {
  FsnetConfig c = a.config.empty() ? FsnetConfig{} : ModelConfig::load(resolve_config(a.config)).fsnet;
  if (!a.version.empty()) {
    c.version = a.version;
    c.depths = FsnetConfig::version_depths(a.version);
  }
  if (!a.fusion.empty()) c.fusion = parse_fusion_mode(a.fusion);
  if (a.height <= 0 || a.width <= 0 || a.height % 32 || a.width % 32) {
    throw ConfigError("--height and --width must be positive multiples of 32");
  }
  const auto r = architecture_report(c, a.height, a.width);
  if (a.json) {
    json rows = json::array();
    long shuffle_params = 0;
    for (const auto& row : r.rows) {
      rows.push_back({{"name", row.name}, {"kind", row.kind}, {"params", row.params}, {"macs", row.macs}});
      if (row.kind == "shuffle") shuffle_params += row.params;
    }
    std::cout << json{{"version", c.version},
                      {"fusion", to_string(c.fusion)},
                      {"widths", c.widths},
                      {"depths", c.depths},
                      {"height", r.height},
                      {"width", r.width},
                      {"total_params", r.total_params},
                      {"total_macs", r.total_macs},
                      {"shuffle_params", shuffle_params},
                      {"rows", rows}}
                     .dump(2)
              << "\n";
  } else {
    std::cout << "FSNet " << c.version << ", fusion " << to_string(c.fusion) << ", input " << a.height << "x"
              << a.width << "\n"
              << r.to_text();
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mixnet: scene-text detection with a feature-shuffle backbone and contour transformer"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")->capture_default_str();

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth_cmd->add_option("--profile", synth_args.profile, "Profile name or path")->capture_default_str();
  synth_cmd->add_option("--out", synth_args.out, "Output directory")->required();
  synth_cmd->add_option("--split", synth_args.split, "train or test: picks the profile's count and seed")
      ->capture_default_str();
  synth_cmd->add_option("--count", synth_args.count, "Number of images (overrides the profile)");
  auto* synth_seed = synth_cmd->add_option("--seed", synth_args.seed, "Dataset seed (overrides the profile)");
  synth_cmd->add_flag("--json", synth_args.json, "Machine-readable summary");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a synthetic dataset");
  train_cmd->add_option("--profile", train_args.profile, "Profile name or path")->capture_default_str();
  train_cmd->add_option("--data", train_args.data, "Dataset directory")->required();
  train_cmd->add_option("--out", train_args.out, "Checkpoint stem")->required();
  train_cmd->add_option("--model", train_args.model, "Model config replacing the profile's [fsnet]/[ctblock]");
  train_cmd->add_option("--epochs", train_args.epochs, "Epochs (overrides the profile)");
  train_cmd->add_option("--lr", train_args.lr, "Initial learning rate (overrides the profile)");
  auto* train_seed = train_cmd->add_option("--seed", train_args.seed, "Initialization and shuffling seed");
  train_cmd->add_option("--max-images", train_args.max_images, "Train on the first N images only");
  train_cmd->add_option("--nan-dump", train_args.nan_dump, "Batch dump path on a non-finite loss");
  train_cmd->add_flag("--json", train_args.json, "Machine-readable summary");

  InferArgs infer_args;
  auto* infer_cmd = app.add_subcommand("infer", "Detect text polygons; write JSONL and optional SVG overlays");
  infer_cmd->add_option("--checkpoint", infer_args.checkpoint, "Checkpoint stem")->required();
  infer_cmd->add_option("--image", infer_args.images, "Input PNG (repeatable)");
  infer_cmd->add_option("--data", infer_args.data, "Dataset directory: every manifest image");
  infer_cmd->add_option("--out", infer_args.out, "JSONL output (default stdout)");
  infer_cmd->add_option("--svg-dir", infer_args.svg_dir, "Directory for SVG overlays");
  infer_cmd->add_option("--profile", infer_args.profile, "Profile supplying [infer] settings")->capture_default_str();
  infer_cmd->add_option("--threshold", infer_args.threshold, "Classification threshold");
  infer_cmd->add_option("--contour-points", infer_args.contour_points, "Contour points N");
  infer_cmd->add_option("--min-score", infer_args.min_score, "Drop detections below this score");
  infer_cmd->add_flag("--json", infer_args.json, "Machine-readable summary");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Score JSONL detections against JSONL ground truth");
  eval_cmd->add_option("--pred", eval_args.pred, "Predictions JSONL")->required();
  eval_cmd->add_option("--gt", eval_args.gt, "Ground truth JSONL")->required();
  eval_cmd->add_option("--iou", eval_args.iou, "IoU threshold")->capture_default_str();
  eval_cmd->add_option("--buckets", eval_args.buckets, "Size buckets: desk or coco")->capture_default_str();
  eval_cmd->add_option("--out", eval_args.out, "Write the JSON report here as well");
  eval_cmd->add_flag("--matches", eval_args.matches, "Include per-image match bookkeeping in JSON");
  eval_cmd->add_flag("--json", eval_args.json, "Print the JSON report");

  NoiseArgs noise_args;
  auto* noise_cmd = app.add_subcommand("noise", "Apply impulse noise to images");
  noise_cmd->add_option("--input", noise_args.inputs, "Input PNG (repeatable)")->required();
  noise_cmd->add_option("--output", noise_args.output, "Output PNG for a single input");
  noise_cmd->add_option("--output-dir", noise_args.output_dir, "Output directory");
  noise_cmd->add_option("--p", noise_args.p, "Fraction of pixels replaced")->capture_default_str();
  noise_cmd->add_option("--seed", noise_args.seed, "Noise seed")->capture_default_str();
  noise_cmd->add_flag("--json", noise_args.json, "Machine-readable summary");

  AblateArgs ablate_args;
  auto* ablate_cmd = app.add_subcommand("ablate", "Run an ablation across seeds and print mean +- sd with a verdict");
  ablate_cmd->add_option("--which", ablate_args.which, "shuffle, noise, nsweep, version or all")
      ->required()
      ->check(CLI::IsMember({"shuffle", "noise", "nsweep", "version", "all"}));
  ablate_cmd->add_option("--profile", ablate_args.profile, "Profile name or path")->capture_default_str();
  ablate_cmd->add_option("--seed", ablate_args.seeds, "Training seed (repeatable; at least 3 for a verdict)");
  ablate_cmd->add_option("--work", ablate_args.work, "Directory for the synthesized splits")->capture_default_str();
  ablate_cmd->add_option("--out", ablate_args.out, "Write the table here as well");
  ablate_cmd->add_flag("--json", ablate_args.json, "Print JSON tables");

  bool grad_json = false;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Central-difference gradient checks at 64-bit");
  grad_cmd->add_flag("--json", grad_json, "Print JSON rows");

  ArchArgs arch_args;
  auto* arch_cmd = app.add_subcommand("arch-report", "Per-layer parameter and MAC accounting of FSNet");
  arch_cmd->add_option("--config", arch_args.config, "Model config name or path (default: toy V1)");
  arch_cmd->add_option("--version", arch_args.version, "Override stacking depths with V1..V4");
  arch_cmd->add_option("--fusion", arch_args.fusion, "shuffle, additive or none");
  arch_cmd->add_option("--height", arch_args.height, "Input height")->capture_default_str();
  arch_cmd->add_option("--width", arch_args.width, "Input width")->capture_default_str();
  arch_cmd->add_flag("--json", arch_args.json, "Print JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalid;
  }
  synth_args.seed_set = synth_seed->count() > 0;
  train_args.seed_set = train_seed->count() > 0;

  try {
    spdlog::set_level(spdlog::level::from_str(log_level));
    spdlog::set_default_logger(spdlog::stderr_color_mt("mixnet"));
    spdlog::set_level(spdlog::level::from_str(log_level));
    if (*synth_cmd) return cmd_synth(synth_args);
    if (*train_cmd) return cmd_train(train_args);
    if (*infer_cmd) return cmd_infer(infer_args);
    if (*eval_cmd) return cmd_eval(eval_args);
    if (*noise_cmd) return cmd_noise(noise_args);
    if (*ablate_cmd) return cmd_ablate(ablate_args);
    if (*grad_cmd) return cmd_gradcheck(grad_json);
    if (*arch_cmd) return cmd_arch_report(arch_args);
  } catch (const MissingInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMissing;
  } catch (const CheckpointMissing& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMissing;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  }
  return kInvalid;
}
