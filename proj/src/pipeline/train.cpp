#include "mixnet/pipeline/train.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <spdlog/spdlog.h>

#include "json.hpp"
#include "mixnet/eval/records.hpp"
#include "mixnet/geometry/iou.hpp"
#include "mixnet/geometry/raster.hpp"
#include "mixnet/pipeline/infer.hpp"
#include "mixnet/synth/synth.hpp"
#include "mixnet/tensor/optim.hpp"

namespace mixnet {

using geom::Point;
using geom::Polygon;

void TrainConfig::validate() const {
  if (epochs < 0 || batch_size < 1) throw ConfigError("train: epochs must be >= 0 and batch_size >= 1");
  if (!(lr > 0) || !(decay > 0) || decay_every < 1) throw ConfigError("train: invalid learning-rate schedule");
  if (min_points < 3 || max_points < min_points) throw ConfigError("train: invalid contour point range");
  if (max_images < 0 || proposal_warmup < 0) throw ConfigError("train: max_images and proposal_warmup must be >= 0");
}

TrainConfig TrainConfig::from_kv(const KeyValueConfig& kv) {
  TrainConfig c;
  c.epochs = static_cast<int>(kv.get_int("epochs", c.epochs));
  c.lr = kv.get_double("lr", c.lr);
  c.decay = kv.get_double("decay", c.decay);
  c.decay_every = static_cast<int>(kv.get_int("decay_every", c.decay_every));
  c.batch_size = static_cast<int>(kv.get_int("batch_size", c.batch_size));
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long>(c.seed)));
  c.max_images = static_cast<int>(kv.get_int("max_images", c.max_images));
  c.min_points = static_cast<int>(kv.get_int("min_points", c.min_points));
  c.max_points = static_cast<int>(kv.get_int("max_points", c.max_points));
  c.proposal_jitter = kv.get_double("proposal_jitter", c.proposal_jitter);
  c.match_iou = kv.get_double("match_iou", c.match_iou);
  c.proposal_warmup = static_cast<int>(kv.get_int("proposal_warmup", c.proposal_warmup));
  c.delta_pull = kv.get_double("delta_pull", c.delta_pull);
  c.delta_push = kv.get_double("delta_push", c.delta_push);
  auto& w = c.weights;
  w.classification = kv.get_double("weight_classification", w.classification);
  w.distance = kv.get_double("weight_distance", w.distance);
  w.orientation = kv.get_double("weight_orientation", w.orientation);
  w.embedding = kv.get_double("weight_embedding", w.embedding);
  w.center = kv.get_double("weight_center", w.center);
  w.refine = kv.get_double("weight_refine", w.refine);
  c.augment = AugmentConfig::from_kv(kv.section("augment"));
  c.validate();
  return c;
}

std::string TrainConfig::to_text() const {
  std::ostringstream out;
  out.precision(17);
  out << "epochs = " << epochs << "\nlr = " << lr << "\ndecay = " << decay << "\ndecay_every = " << decay_every
      << "\nbatch_size = " << batch_size << "\nseed = " << seed << "\nmax_images = " << max_images
      << "\nmin_points = " << min_points << "\nmax_points = " << max_points
      << "\nproposal_jitter = " << proposal_jitter << "\nmatch_iou = " << match_iou
      << "\nproposal_warmup = " << proposal_warmup << "\ndelta_pull = " << delta_pull
      << "\ndelta_push = " << delta_push << "\nweight_classification = " << weights.classification
      << "\nweight_distance = " << weights.distance << "\nweight_orientation = " << weights.orientation
      << "\nweight_embedding = " << weights.embedding << "\nweight_center = " << weights.center
      << "\nweight_refine = " << weights.refine << "\n";
  std::istringstream aug(augment.to_text());
  for (std::string line; std::getline(aug, line);) out << "augment." << line << "\n";
  return out.str();
}

double TrainConfig::lr_at(int epoch) const { return lr * std::pow(decay, epoch / decay_every); }

std::vector<Sample> load_samples(const std::string& dir, int max_images) {
  const auto manifest = synth::load_manifest(dir);
  const auto gt = eval::read_jsonl((std::filesystem::path(dir) / manifest.gt_file).string());
  std::map<std::string, const eval::ImageRecord*> by_id;
  for (const auto& r : gt) by_id[r.image_id] = &r;
  std::vector<Sample> out;
  for (const auto& e : manifest.entries) {
    if (max_images > 0 && static_cast<int>(out.size()) >= max_images) break;
    Sample s;
    s.id = e.image_id;
    s.image = read_png((std::filesystem::path(dir) / e.file).string());
    const auto it = by_id.find(e.image_id);
    if (it != by_id.end()) {
      for (const auto& d : it->second->detections) s.polygons.push_back(d.polygon);
    }
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

struct BatchLabels {
  Tensor<float> image, cls, dist, orient, mask, orient_mask;
  std::vector<int> ids;
};

BatchLabels make_labels(const std::vector<Sample>& batch) {
  const int b = static_cast<int>(batch.size());
  const int h = batch.front().image.height, w = batch.front().image.width;
  BatchLabels l;
  l.image = Tensor<float>({b, 3, h, w});
  l.cls = Tensor<float>({b, 1, h, w});
  l.dist = Tensor<float>({b, 1, h, w});
  l.mask = Tensor<float>({b, 1, h, w});
  l.orient = Tensor<float>({b, 2, h, w});
  l.orient_mask = Tensor<float>({b, 2, h, w});
  l.ids.assign(static_cast<std::size_t>(b) * h * w, 0);
  for (int n = 0; n < b; ++n) {
    const auto& s = batch[static_cast<std::size_t>(n)];
    if (s.image.width != w || s.image.height != h) throw TrainingError("train: batch images must share extents");
    const auto one = image_to_tensor(s.image);
    std::copy(one.storage().begin(), one.storage().end(),
              l.image.storage().begin() + static_cast<std::ptrdiff_t>(n) * 3 * h * w);
    const auto labels = geom::label_fields(s.polygons, h, w);
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        const float inside = labels.classification.at(i, j);
        l.cls.at(n, 0, i, j) = inside;
        l.mask.at(n, 0, i, j) = inside;
        l.dist.at(n, 0, i, j) = labels.distance.at(i, j);
        l.orient.at(n, 0, i, j) = labels.orientation_x.at(i, j);
        l.orient.at(n, 1, i, j) = labels.orientation_y.at(i, j);
        l.orient_mask.at(n, 0, i, j) = inside;
        l.orient_mask.at(n, 1, i, j) = inside;
        l.ids[(static_cast<std::size_t>(n) * h + i) * w + j] = labels.instance.at(i, j);
      }
  }
  return l;
}

/// GT contour at `n` points, scaled, shifted and perturbed the way thresholded
/// heatmaps err.
std::vector<Point> jittered_proposal(const Polygon& gt, int n, double jitter, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, jitter);
  std::uniform_real_distribution<double> scale(0.9, 1.1), shift(-jitter, jitter);
  const Point c = geom::centroid(gt);
  const double sx = scale(rng), sy = scale(rng);
  const Point d{shift(rng), shift(rng)};
  std::vector<Point> pts;
  for (const Point& p : geom::resample_contour(gt, n)) {
    pts.push_back({c.x + (p.x - c.x) * sx + d.x + noise(rng), c.y + (p.y - c.y) * sy + d.y + noise(rng)});
  }
  return orient_canonical(pts);
}

double finite_or_nan(const Var<float>& v) { return v.valid() ? static_cast<double>(v.value()[0]) : 0.0; }

void dump_batch(const std::string& path, int epoch, int step, const std::vector<Sample>& batch,
                const std::map<std::string, double>& terms) {
  nlohmann::json j{{"epoch", epoch}, {"step", step}, {"terms", terms}};
  for (const auto& s : batch) {
    nlohmann::json polys = nlohmann::json::array();
    for (const auto& p : s.polygons) {
      nlohmann::json pts = nlohmann::json::array();
      for (const auto& q : p) pts.push_back({q.x, q.y});
      polys.push_back(std::move(pts));
    }
    j["images"].push_back({{"image_id", s.id}, {"polygons", std::move(polys)}});
  }
  std::ofstream(path) << j.dump(2) << "\n";
}

}  // namespace

std::vector<EpochStats> train_model(MixNet& model, const std::vector<Sample>& data, const TrainConfig& config,
                                    const std::string& nan_dump_path,
                                    const std::function<void(const EpochStats&)>& on_epoch) {
  config.validate();
  if (data.empty()) throw TrainingError("train: no training images");
  std::mt19937_64 rng(config.seed);
  const int count = config.max_images > 0 ? std::min<int>(config.max_images, static_cast<int>(data.size()))
                                          : static_cast<int>(data.size());
  const int c_points = model.config().ctblock.center_points;
  auto params = model.params().all();
  AdamState<float> adam;
  std::vector<EpochStats> curve;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochStats stats;
    stats.epoch = epoch + 1;
    stats.lr = config.lr_at(epoch);
    std::vector<int> order(static_cast<std::size_t>(count));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    int steps = 0;
    for (int start = 0; start < count; start += config.batch_size) {
      std::vector<Sample> batch;
      for (int k = start; k < std::min(count, start + config.batch_size); ++k) {
        batch.push_back(augment(data[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])], config.augment, rng));
      }
      const auto labels = make_labels(batch);
      const int h = labels.image.dim(2), w = labels.image.dim(3);

      Graph<float> g;
      const auto maps = model.run_heads(g, g.constant(labels.image));
      const auto& heads = maps.heads;
      const auto l_cls = ops::bce_with_logits(heads.class_logits, labels.cls);
      const auto l_dist = ops::masked_mse(heads.distance, labels.dist, labels.mask);
      const auto l_orient = ops::masked_mse(heads.orientation, labels.orient, labels.orient_mask);
      const auto l_emb = ops::discriminative_loss(heads.embedding, labels.ids, static_cast<float>(config.delta_pull),
                                                  static_cast<float>(config.delta_push));
      const auto& wt = config.weights;
      Var<float> total = ops::add(
          ops::add(ops::scale(l_cls, static_cast<float>(wt.classification)),
                   ops::scale(l_dist, static_cast<float>(wt.distance))),
          ops::add(ops::scale(l_orient, static_cast<float>(wt.orientation)),
                   ops::scale(l_emb, static_cast<float>(wt.embedding))));

      const int n = std::uniform_int_distribution<int>(config.min_points, config.max_points)(rng);
      std::vector<ContourInstance> instances;
      std::vector<CtblockTarget> targets;
      for (int b = 0; b < static_cast<int>(batch.size()); ++b) {
        const auto& polys = batch[static_cast<std::size_t>(b)].polygons;
        for (const auto& gt : polys) {
          auto rough = jittered_proposal(gt, n, config.proposal_jitter, rng);
          targets.push_back(make_ctblock_target(gt, rough, n, c_points));
          instances.push_back({b, std::move(rough)});
        }
        if (epoch < config.proposal_warmup || polys.empty()) continue;
        InferConfig ic;
        for (auto& rough : rough_contours(probability_grid(heads.classification, b), ic, n)) {
          double best = 0;
          std::size_t best_k = 0;
          for (std::size_t k = 0; k < polys.size(); ++k) {
            const double iou = geom::polygon_iou(rough, polys[k]);
            if (iou > best) best = iou, best_k = k;
          }
          if (best < config.match_iou) continue;
          targets.push_back(make_ctblock_target(polys[best_k], rough, n, c_points));
          instances.push_back({b, std::move(rough)});
        }
      }
      Var<float> l_center, l_refine;
      if (!instances.empty()) {
        const auto out = model.ctblock().forward(g, maps.fused, maps.heatmaps, instances);
        const auto l = model.ctblock().loss(g, out, targets, w, h);
        l_center = l.center;
        l_refine = l.refine;
        total = ops::add(total, ops::add(ops::scale(l_center, static_cast<float>(wt.center)),
                                         ops::scale(l_refine, static_cast<float>(wt.refine))));
      }

      const std::map<std::string, double> terms{
          {"total", finite_or_nan(total)},         {"classification", finite_or_nan(l_cls)},
          {"distance", finite_or_nan(l_dist)},     {"orientation", finite_or_nan(l_orient)},
          {"embedding", finite_or_nan(l_emb)},     {"center", finite_or_nan(l_center)},
          {"refine", finite_or_nan(l_refine)}};
      if (!std::isfinite(terms.at("total"))) {
        if (!nan_dump_path.empty()) dump_batch(nan_dump_path, epoch + 1, steps, batch, terms);
        throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch + 1) + " step " +
                            std::to_string(steps) + " (first image " + batch.front().id + ")" +
                            (nan_dump_path.empty() ? "" : ", batch dumped to " + nan_dump_path));
      }
      model.params().zero_grad();
      g.backward(total);
      adam_step(params, adam, AdamConfig{stats.lr});

      stats.total += terms.at("total");
      stats.classification += terms.at("classification");
      stats.distance += terms.at("distance");
      stats.orientation += terms.at("orientation");
      stats.embedding += terms.at("embedding");
      stats.center += terms.at("center");
      stats.refine += terms.at("refine");
      ++steps;
    }
    for (double* v : {&stats.total, &stats.classification, &stats.distance, &stats.orientation, &stats.embedding,
                      &stats.center, &stats.refine}) {
      *v /= std::max(steps, 1);
    }
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    spdlog::info("epoch {:3d}  lr {:.6f}  loss {:.5f}  cls {:.4f}  center {:.5f}  refine {:.5f}  ({:.1f} s)",
                 stats.epoch, stats.lr, stats.total, stats.classification, stats.center, stats.refine, stats.seconds);
    curve.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return curve;
}

void write_loss_csv(const std::string& path, const std::vector<EpochStats>& curve) {
  std::ofstream out(path);
  if (!out) throw TrainingError("cannot write " + path);
  out.precision(9);
  out << "epoch,lr,total,classification,distance,orientation,embedding,center,refine,seconds\n";
  for (const auto& s : curve) {
    out << s.epoch << "," << s.lr << "," << s.total << "," << s.classification << "," << s.distance << ","
        << s.orientation << "," << s.embedding << "," << s.center << "," << s.refine << "," << s.seconds << "\n";
  }
}

}  // namespace mixnet
