#include "mixnet/eval/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include <spdlog/spdlog.h>

#include "json.hpp"
#include "mixnet/geometry/iou.hpp"

namespace mixnet::eval {

using nlohmann::json;

int ImageMatches::true_positives() const {
  return static_cast<int>(std::count_if(pred_to_gt.begin(), pred_to_gt.end(), [](int g) { return g >= 0; }));
}

int ImageMatches::false_positives() const { return static_cast<int>(pred_to_gt.size()) - true_positives(); }

int ImageMatches::false_negatives() const { return static_cast<int>(gt_areas.size()) - true_positives(); }

namespace {

bool vertices_less(const geom::Polygon& a, const geom::Polygon& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), [](geom::Point p, geom::Point q) {
    return p.x < q.x || (p.x == q.x && p.y < q.y);
  });
}

double safe_ratio(int num, int den) { return den > 0 ? static_cast<double>(num) / den : 0.0; }

}  // namespace

ImageMatches match_detections(const std::vector<Detection>& preds, const std::vector<Detection>& gts,
                              double iou_threshold, const std::string& image_id) {
  ImageMatches m;
  m.image_id = image_id;
  for (const auto& g : gts) m.gt_areas.push_back(geom::area(g.polygon));

  std::vector<double> pred_area(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) pred_area[i] = geom::area(preds[i].polygon);
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (preds[a].score != preds[b].score) return preds[a].score > preds[b].score;
    if (pred_area[a] != pred_area[b]) return pred_area[a] < pred_area[b];
    return vertices_less(preds[a].polygon, preds[b].polygon);
  });

  std::vector<bool> taken(gts.size(), false);
  for (std::size_t i : order) {
    int best = -1;
    double best_iou = 0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;
      const double iou = geom::polygon_iou(preds[i].polygon, gts[g].polygon);
      if (iou > best_iou) {
        best_iou = iou;
        best = static_cast<int>(g);
      }
    }
    const bool hit = best >= 0 && best_iou >= iou_threshold;
    if (hit) taken[static_cast<std::size_t>(best)] = true;
    m.pred_scores.push_back(preds[i].score);
    m.pred_to_gt.push_back(hit ? best : -1);
    m.pred_iou.push_back(best_iou);
  }
  return m;
}

int SizeBuckets::bucket_of(double area) const {
  if (area < small_max) return 0;
  return area < medium_max ? 1 : 2;
}

EvalReport bucketed_report(const std::vector<ImageMatches>& matches, const SizeBuckets& buckets) {
  EvalReport r;
  r.buckets = buckets;
  r.images = matches;
  for (const auto& m : matches) {
    r.tp += m.true_positives();
    r.fp += m.false_positives();
    r.fn += m.false_negatives();
    std::vector<bool> hit(m.gt_areas.size(), false);
    for (int g : m.pred_to_gt)
      if (g >= 0) hit[static_cast<std::size_t>(g)] = true;
    for (std::size_t g = 0; g < m.gt_areas.size(); ++g) {
      const auto b = static_cast<std::size_t>(buckets.bucket_of(m.gt_areas[g]));
      ++r.bucket_gt[b];
      if (hit[g]) ++r.bucket_tp[b];
    }
  }
  r.precision = safe_ratio(r.tp, r.tp + r.fp);
  r.recall = safe_ratio(r.tp, r.tp + r.fn);
  r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  for (std::size_t b = 0; b < 3; ++b) {
    if (r.bucket_gt[b] > 0) r.bucket_recall[b] = safe_ratio(r.bucket_tp[b], r.bucket_gt[b]);
  }
  return r;
}

EvalReport evaluate(const std::vector<ImageRecord>& preds, const std::vector<ImageRecord>& gts, double iou_threshold,
                    const SizeBuckets& buckets) {
  std::map<std::string, const ImageRecord*> by_id;
  for (const auto& p : preds) {
    if (!by_id.emplace(p.image_id, &p).second) throw RecordError("duplicate prediction record for " + p.image_id);
  }
  std::vector<ImageMatches> matches;
  for (const auto& g : gts) {
    const auto it = by_id.find(g.image_id);
    static const std::vector<Detection> kNone;
    matches.push_back(match_detections(it == by_id.end() ? kNone : it->second->detections, g.detections,
                                       iou_threshold, g.image_id));
    if (it != by_id.end()) by_id.erase(it);
  }
  for (const auto& [id, rec] : by_id) {
    spdlog::warn("eval: predictions for unknown image {} count as false positives", id);
    matches.push_back(match_detections(rec->detections, {}, iou_threshold, id));
  }
  return bucketed_report(matches, buckets);
}

std::string EvalReport::to_json(bool with_matches) const {
  static const char* kNames[3] = {"small", "medium", "large"};
  json j{{"precision", precision}, {"recall", recall}, {"f1", f1}, {"tp", tp}, {"fp", fp}, {"fn", fn},
         {"bucket_limits", {buckets.small_max, buckets.medium_max}}};
  json per = json::object();
  for (std::size_t b = 0; b < 3; ++b) {
    per[kNames[b]] = {{"gt", bucket_gt[b]},
                      {"tp", bucket_tp[b]},
                      {"recall", bucket_recall[b] ? json(*bucket_recall[b]) : json(nullptr)}};
  }
  j["buckets"] = std::move(per);
  if (with_matches) {
    json images = json::array();
    for (const auto& m : this->images) {
      images.push_back({{"image_id", m.image_id},
                        {"pred_scores", m.pred_scores},
                        {"pred_to_gt", m.pred_to_gt},
                        {"pred_iou", m.pred_iou},
                        {"gt_areas", m.gt_areas}});
    }
    j["images"] = std::move(images);
  }
  return j.dump(2);
}

EvalReport EvalReport::from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    SizeBuckets b{j.at("bucket_limits").at(0).get<double>(), j.at("bucket_limits").at(1).get<double>()};
    std::vector<ImageMatches> matches;
    for (const auto& m : j.at("images")) {
      ImageMatches im;
      im.image_id = m.at("image_id").get<std::string>();
      im.pred_scores = m.at("pred_scores").get<std::vector<double>>();
      im.pred_to_gt = m.at("pred_to_gt").get<std::vector<int>>();
      im.pred_iou = m.at("pred_iou").get<std::vector<double>>();
      im.gt_areas = m.at("gt_areas").get<std::vector<double>>();
      if (im.pred_scores.size() != im.pred_to_gt.size() || im.pred_iou.size() != im.pred_to_gt.size()) {
        throw RecordError("match list lengths disagree for " + im.image_id);
      }
      for (int g : im.pred_to_gt) {
        if (g >= static_cast<int>(im.gt_areas.size())) throw RecordError("match index out of range in " + im.image_id);
      }
      matches.push_back(std::move(im));
    }
    return bucketed_report(matches, b);
  } catch (const json::exception& e) {
    throw RecordError(std::string("malformed report: ") + e.what());
  }
}

std::string EvalReport::to_text() const {
  auto pct = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%6.2f", 100 * v);
    return std::string(buf);
  };
  auto bucket = [&](std::size_t b) { return bucket_recall[b] ? pct(*bucket_recall[b]) : std::string("   N/A"); };
  std::ostringstream out;
  out << "Prec.(%) Recall(%)  F1(%) Small(%) Medium(%) Large(%)\n";
  out << "  " << pct(precision) << "    " << pct(recall) << " " << pct(f1) << "   " << bucket(0) << "    " << bucket(1)
      << "   " << bucket(2) << "\n";
  out << "TP " << tp << "  FP " << fp << "  FN " << fn << "  GT per bucket " << bucket_gt[0] << "/" << bucket_gt[1]
      << "/" << bucket_gt[2] << "  (limits " << buckets.small_max << ", " << buckets.medium_max << " px)\n";
  return out.str();
}

}  // namespace mixnet::eval
