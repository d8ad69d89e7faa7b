#include "mixnet/pipeline/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <sstream>

#include <spdlog/spdlog.h>

#include "json.hpp"
#include "mixnet/eval/noise.hpp"
#include "mixnet/eval/throughput.hpp"
#include "mixnet/fsnet/accounting.hpp"

namespace mixnet {

namespace fs = std::filesystem;

Profile Profile::from_kv(const KeyValueConfig& kv) {
  Profile p;
  p.name = kv.get_string("name", p.name);
  p.synth = synth::SceneSpec::from_kv(kv.section("synth"));
  const auto data = kv.section("data");
  p.train_images = static_cast<int>(data.get_int("train_images", p.train_images));
  p.test_images = static_cast<int>(data.get_int("test_images", p.test_images));
  p.train_seed = static_cast<std::uint64_t>(data.get_int("train_seed", static_cast<long>(p.train_seed)));
  p.test_seed = static_cast<std::uint64_t>(data.get_int("test_seed", static_cast<long>(p.test_seed)));
  p.ablation_images = static_cast<int>(data.get_int("ablation_images", p.ablation_images));
  p.ablation_epochs = static_cast<int>(data.get_int("ablation_epochs", p.ablation_epochs));
  p.model = ModelConfig::from_kv(kv);
  p.train = TrainConfig::from_kv(kv.section("train"));
  p.infer = InferConfig::from_kv(kv.section("infer"));
  const auto ev = kv.section("eval");
  p.buckets.small_max = ev.get_double("small_max_area", p.buckets.small_max);
  p.buckets.medium_max = ev.get_double("medium_max_area", p.buckets.medium_max);
  if (p.train_images < 1 || p.test_images < 1) throw ConfigError("data: image counts must be positive");
  if (!(p.buckets.small_max > 0) || p.buckets.medium_max <= p.buckets.small_max) {
    throw ConfigError("eval: invalid bucket limits");
  }
  return p;
}

Profile Profile::load(const std::string& path) { return from_kv(KeyValueConfig::load(path)); }

std::string Profile::to_text() const {
  std::ostringstream out;
  out.precision(17);
  out << "name = \"" << name << "\"\n\n[synth]\n" << synth.to_text() << "\n[data]\ntrain_images = " << train_images
      << "\ntest_images = " << test_images << "\ntrain_seed = " << train_seed << "\ntest_seed = " << test_seed
      << "\nablation_images = " << ablation_images << "\nablation_epochs = " << ablation_epochs << "\n\n"
      << model.to_text() << "\n[train]\n" << train.to_text() << "\n[infer]\nthreshold = " << infer.threshold
      << "\nmin_area = " << infer.min_area << "\nsimplify_epsilon = " << infer.simplify_epsilon
      << "\ncontour_points = " << infer.contour_points << "\nmin_score = " << infer.min_score
      << "\n\n[eval]\nsmall_max_area = " << buckets.small_max << "\nmedium_max_area = " << buckets.medium_max << "\n";
  return out.str();
}

Splits prepare_splits(const Profile& profile, const std::string& root) {
  auto split = [&](const std::string& name, int count, std::uint64_t seed) {
    const auto dir = fs::path(root) / name;
    bool fresh = false;
    if (fs::exists(dir / "manifest.json")) {
      const auto m = synth::load_manifest(dir.string());
      fresh = m.seed == seed && static_cast<int>(m.entries.size()) == count && m.spec.to_text() == profile.synth.to_text();
    }
    if (!fresh) {
      spdlog::info("synthesizing {} images into {}", count, dir.string());
      fs::remove_all(dir);
      synth::make_dataset(profile.synth, count, dir.string(), seed);
    }
    return load_samples(dir.string());
  };
  Splits s;
  s.train = split("train", profile.train_images, profile.train_seed);
  s.test = split("test", profile.test_images, profile.test_seed);
  return s;
}

std::vector<eval::ImageRecord> gt_records(const std::vector<Sample>& samples) {
  std::vector<eval::ImageRecord> out;
  for (const auto& s : samples) {
    eval::ImageRecord r{s.id, {}};
    for (const auto& p : s.polygons) r.detections.push_back({p, 1.0});
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<eval::ImageRecord> predict(const MixNet& model, const std::vector<Sample>& samples,
                                       const InferConfig& config) {
  std::vector<eval::ImageRecord> out;
  for (const auto& s : samples) out.push_back(to_record(s.id, infer_image(model, s.image, config)));
  return out;
}

std::vector<Sample> corrupt(const std::vector<Sample>& samples, double p, std::uint64_t seed) {
  std::vector<Sample> out = samples;
  for (std::size_t i = 0; i < out.size(); ++i) out[i].image = eval::impulse_noise(out[i].image, p, synth::derive_seed(seed, i));
  return out;
}

eval::EvalReport evaluate_model(const MixNet& model, const std::vector<Sample>& samples, const InferConfig& infer,
                                const eval::SizeBuckets& buckets) {
  return eval::evaluate(predict(model, samples, infer), gt_records(samples), 0.5, buckets);
}

const MixNet& ModelCache::get(const ModelConfig& model, const TrainConfig& train, const std::vector<Sample>& data) {
  const std::string key = model.to_text() + "\n" + train.to_text() + "\n" + std::to_string(data.size()) + ":" +
                          (data.empty() ? std::string() : data.front().id);
  auto it = models_.find(key);
  if (it != models_.end()) return *it->second;
  spdlog::info("training {} / fusion {} / seed {} on {} images for {} epochs", model.fsnet.version,
               to_string(model.fsnet.fusion), train.seed,
               train.max_images > 0 ? std::min<std::size_t>(train.max_images, data.size()) : data.size(), train.epochs);
  auto net = std::make_unique<MixNet>(model, train.seed);
  train_model(*net, data, train);
  return *models_.emplace(key, std::move(net)).first->second;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::string AblationTable::to_text() const {
  std::ostringstream out;
  char buf[96];
  std::snprintf(buf, sizeof buf, "%-14s", which.c_str());
  out << buf;
  for (const auto& c : columns) {
    std::snprintf(buf, sizeof buf, " %20s", c.c_str());
    out << buf;
  }
  out << "\n";
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-14s", r.label.c_str());
    out << buf;
    for (const auto& cell : r.values) {
      std::snprintf(buf, sizeof buf, " %12.4f +- %-5.3f", mean_of(cell), sd_of(cell));
      out << buf;
    }
    out << "\n";
  }
  out << "seeds:";
  for (auto s : seeds) out << " " << s;
  out << "\n";
  if (verdict.empty()) {
    out << "verdict: not printed, at least 3 seeds are required\n";
  } else {
    out << "verdict: " << verdict << " -> " << (verdict_holds ? "HOLDS" : "DOES NOT HOLD") << "\n";
  }
  return out.str();
}

std::string AblationTable::to_json() const {
  nlohmann::json rows_j = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json cells = nlohmann::json::object();
    for (std::size_t c = 0; c < columns.size(); ++c) {
      cells[columns[c]] = {{"values", r.values[c]}, {"mean", mean_of(r.values[c])}, {"sd", sd_of(r.values[c])}};
    }
    rows_j.push_back({{"label", r.label}, {"cells", std::move(cells)}});
  }
  nlohmann::json j{{"ablation", which}, {"columns", columns}, {"seeds", seeds}, {"rows", std::move(rows_j)}};
  if (verdict.empty()) {
    j["verdict"] = nullptr;
  } else {
    j["verdict"] = {{"claim", verdict}, {"holds", verdict_holds}};
  }
  return j.dump(2);
}

TrainConfig ablation_train_config(const Profile& profile, std::uint64_t seed) {
  TrainConfig t = profile.train;
  t.seed = seed;
  if (profile.ablation_images > 0) t.max_images = profile.ablation_images;
  if (profile.ablation_epochs > 0) t.epochs = profile.ablation_epochs;
  return t;
}

namespace {

constexpr std::uint64_t kNoiseSeed = 424242;

AblationTable start(const std::string& which, std::vector<std::string> columns, const std::vector<std::uint64_t>& seeds,
                    const std::vector<std::string>& labels) {
  AblationTable t;
  t.which = which;
  t.columns = std::move(columns);
  t.seeds = seeds;
  for (const auto& l : labels) t.rows.push_back({l, std::vector<std::vector<double>>(t.columns.size())});
  return t;
}

ModelConfig with_fusion(ModelConfig m, FusionMode mode) {
  m.fsnet.fusion = mode;
  return m;
}

}  // namespace

AblationTable ablate_shuffle(const Profile& profile, const Splits& splits, const std::vector<std::uint64_t>& seeds,
                             ModelCache& cache) {
  auto t = start("shuffle", {"F1 clean", "F1 noise 10%"}, seeds, {"shuffle", "none"});
  const auto noisy = corrupt(splits.test, 0.10, kNoiseSeed);
  const std::array<FusionMode, 2> modes = {FusionMode::kShuffle, FusionMode::kNone};
  int widening = 0;
  for (auto seed : seeds) {
    std::array<double, 2> clean{}, noise{};
    for (std::size_t r = 0; r < 2; ++r) {
      const auto& model = cache.get(with_fusion(profile.model, modes[r]), ablation_train_config(profile, seed), splits.train);
      clean[r] = evaluate_model(model, splits.test, profile.infer, profile.buckets).f1;
      noise[r] = evaluate_model(model, noisy, profile.infer, profile.buckets).f1;
      t.rows[r].values[0].push_back(clean[r]);
      t.rows[r].values[1].push_back(noise[r]);
    }
    if (noise[0] - noise[1] >= clean[0] - clean[1]) ++widening;
  }
  if (seeds.size() >= 3) {
    const bool clean_ok = mean_of(t.rows[0].values[0]) >= mean_of(t.rows[1].values[0]);
    const bool noisy_ok = mean_of(t.rows[0].values[1]) >= mean_of(t.rows[1].values[1]);
    const int need = static_cast<int>((2 * seeds.size() + 2) / 3);
    t.verdict = "mean F1 shuffle >= none on clean (" + std::string(clean_ok ? "yes" : "no") + ") and 10% noise (" +
                (noisy_ok ? "yes" : "no") + "); noisy gap >= clean gap in " + std::to_string(widening) + "/" +
                std::to_string(seeds.size()) + " seeds (need " + std::to_string(need) + ")";
    t.verdict_holds = clean_ok && noisy_ok && widening >= need;
  }
  return t;
}

AblationTable ablate_noise(const Profile& profile, const Splits& splits, const std::vector<std::uint64_t>& seeds,
                           ModelCache& cache) {
  auto t = start("noise", {"Prec.", "Recall", "F1", "Small", "Medium", "Large"}, seeds, {"0%", "5%", "10%"});
  const std::array<double, 3> levels = {0.0, 0.05, 0.10};
  std::vector<double> small_drop, large_drop;
  for (auto seed : seeds) {
    const auto& model = cache.get(with_fusion(profile.model, FusionMode::kShuffle), ablation_train_config(profile, seed),
                                  splits.train);
    std::array<eval::EvalReport, 3> reps;
    for (std::size_t r = 0; r < 3; ++r) {
      reps[r] = evaluate_model(model, levels[r] > 0 ? corrupt(splits.test, levels[r], kNoiseSeed) : splits.test,
                               profile.infer, profile.buckets);
      const auto& rep = reps[r];
      t.rows[r].values[0].push_back(rep.precision);
      t.rows[r].values[1].push_back(rep.recall);
      t.rows[r].values[2].push_back(rep.f1);
      for (std::size_t b = 0; b < 3; ++b) {
        t.rows[r].values[3 + b].push_back(rep.bucket_recall[b] ? *rep.bucket_recall[b] : std::nan(""));
      }
    }
    small_drop.push_back(reps[0].bucket_recall[0].value_or(0) - reps[2].bucket_recall[0].value_or(0));
    large_drop.push_back(reps[0].bucket_recall[2].value_or(0) - reps[2].bucket_recall[2].value_or(0));
  }
  if (seeds.size() >= 3) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "mean small-recall drop at 10%% noise (%.4f) >= mean large-recall drop (%.4f)",
                  mean_of(small_drop), mean_of(large_drop));
    t.verdict = buf;
    t.verdict_holds = mean_of(small_drop) >= mean_of(large_drop);
  }
  return t;
}

std::vector<std::pair<int, double>> ctblock_throughput(const MixNet& model, const std::vector<Sample>& samples,
                                                       const InferConfig& infer, const std::vector<int>& ns,
                                                       int runs) {
  struct Cached {
    Tensor<float> fused, heatmaps;
    std::map<int, std::vector<ContourInstance>> instances;
  };
  std::vector<Cached> cache;
  for (const auto& s : samples) {
    Graph<float> g;
    g.set_grad_enabled(false);
    const auto maps = model.run_heads(g, g.constant(image_to_tensor(pad_to_multiple(s.image, 32))));
    Cached c{maps.fused.value(), maps.heatmaps.value(), {}};
    const auto prob = probability_grid(maps.heads.classification);
    for (int n : ns) {
      for (auto& r : rough_contours(prob, infer, n)) c.instances[n].push_back({0, std::move(r)});
    }
    if (!c.instances[ns.front()].empty()) cache.push_back(std::move(c));
  }
  if (cache.empty()) {
    spdlog::warn("ctblock throughput: no image produced a rough contour, nothing to time");
    std::vector<std::pair<int, double>> none;
    for (int n : ns) none.emplace_back(n, std::nan(""));
    return none;
  }
  const auto rows = eval::bench_throughput(
      [&](int n) {
        for (const auto& c : cache) {
          const auto& inst = c.instances.at(n);
          if (inst.empty()) continue;
          Graph<float> g;
          g.set_grad_enabled(false);
          model.ctblock().forward(g, g.constant(c.fused), g.constant(c.heatmaps), inst);
        }
      },
      static_cast<int>(cache.size()), ns, runs, 1);
  std::vector<std::pair<int, double>> out;
  for (const auto& r : rows) out.emplace_back(r.n, r.images_per_second);
  return out;
}

AblationTable ablate_nsweep(const Profile& profile, const Splits& splits, const std::vector<std::uint64_t>& seeds,
                            ModelCache& cache) {
  const std::vector<int> ns = {12, 16, 20, 24, 28};
  std::vector<std::string> labels;
  for (int n : ns) labels.push_back("N=" + std::to_string(n));
  auto t = start("nsweep", {"F1", "CTBlock img/s"}, seeds, labels);
  for (auto seed : seeds) {
    const auto& model = cache.get(with_fusion(profile.model, FusionMode::kShuffle), ablation_train_config(profile, seed),
                                  splits.train);
    const auto speed = ctblock_throughput(model, splits.test, profile.infer, ns);
    for (std::size_t r = 0; r < ns.size(); ++r) {
      InferConfig ic = profile.infer;
      ic.contour_points = ns[r];
      t.rows[r].values[0].push_back(evaluate_model(model, splits.test, ic, profile.buckets).f1);
      t.rows[r].values[1].push_back(speed[r].second);
    }
  }
  if (seeds.size() >= 3) {
    int inversions = 0;
    double worst = 0;
    for (std::size_t r = 1; r < ns.size(); ++r) {
      const double prev = mean_of(t.rows[r - 1].values[1]), cur = mean_of(t.rows[r].values[1]);
      if (cur > prev) {
        ++inversions;
        worst = std::max(worst, cur / prev - 1);
      }
    }
    const double f20 = mean_of(t.rows[2].values[0]), f12 = mean_of(t.rows[0].values[0]);
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "throughput non-increasing in N (%d inversions, worst +%.2f%%, limit 2%%); F1(N=20) %.4f >= "
                  "F1(N=12) %.4f - 0.01",
                  inversions, 100 * worst, f20, f12);
    t.verdict = buf;
    t.verdict_holds = worst <= 0.02 && f20 >= f12 - 0.01;
  }
  return t;
}

AblationTable ablate_version(const Profile& profile, const Splits& splits, const std::vector<std::uint64_t>& seeds,
                             ModelCache& cache) {
  const std::vector<std::string> versions = {"V1", "V2", "V3", "V4"};
  auto t = start("version", {"Params", "F1"}, seeds, versions);
  for (std::size_t r = 0; r < versions.size(); ++r) {
    ModelConfig m = profile.model;
    m.fsnet.version = versions[r];
    m.fsnet.depths = FsnetConfig::version_depths(versions[r]);
    const double params = static_cast<double>(architecture_report(m.fsnet, 128, 128).total_params);
    for (auto seed : seeds) {
      t.rows[r].values[0].push_back(params);
      t.rows[r].values[1].push_back(
          evaluate_model(cache.get(m, ablation_train_config(profile, seed), splits.train), splits.test, profile.infer,
                         profile.buckets)
              .f1);
    }
  }
  if (seeds.size() >= 3) {
    const auto p = [&](std::size_t r) { return t.rows[r].values[0].front(); };
    const bool order = p(1) < p(2) && p(2) < p(3) && p(3) < p(0);
    const bool f1 = mean_of(t.rows[0].values[1]) >= mean_of(t.rows[1].values[1]);
    t.verdict = std::string("params V2 < V3 < V4 < V1 (") + (order ? "yes" : "no") + "); mean F1 V1 >= V2 (" +
                (f1 ? "yes" : "no") + ")";
    t.verdict_holds = order && f1;
  }
  return t;
}

}  // namespace mixnet
