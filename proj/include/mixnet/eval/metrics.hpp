#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "mixnet/eval/records.hpp"

namespace mixnet::eval {

/// Outcome of matching one image. Predictions are listed in the order they
/// were considered (descending score, then ascending area).
struct ImageMatches {
  std::string image_id;
  std::vector<double> pred_scores;
  /// Matched GT index per prediction, -1 for a false positive.
  std::vector<int> pred_to_gt;
  /// IoU with the best still-unmatched GT at the time of the decision.
  std::vector<double> pred_iou;
  std::vector<double> gt_areas;

  int true_positives() const;
  int false_positives() const;
  int false_negatives() const;
};

/// Greedy matching: the highest-scoring prediction claims the unmatched GT
/// with the largest IoU, if that IoU reaches `iou_threshold`. Equal scores are
/// ordered by smaller polygon area, then by vertex coordinates.
ImageMatches match_detections(const std::vector<Detection>& preds, const std::vector<Detection>& gts,
                              double iou_threshold = 0.5, const std::string& image_id = "");

/// GT area limits: small below `small_max`, medium below `medium_max`.
struct SizeBuckets {
  double small_max = 32.0 * 32.0;
  double medium_max = 96.0 * 96.0;

  static SizeBuckets coco() { return {}; }
  static SizeBuckets desk() { return {16.0 * 16.0, 48.0 * 48.0}; }
  int bucket_of(double area) const;
};

struct EvalReport {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  int tp = 0;
  int fp = 0;
  int fn = 0;
  SizeBuckets buckets;
  std::array<int, 3> bucket_gt{};
  std::array<int, 3> bucket_tp{};
  /// Recall per size bucket; empty when the bucket has no GT.
  std::array<std::optional<double>, 3> bucket_recall{};
  std::vector<ImageMatches> images;

  std::string to_json(bool with_matches = true) const;
  static EvalReport from_json(const std::string& text);
  std::string to_text() const;
};

EvalReport bucketed_report(const std::vector<ImageMatches>& matches, const SizeBuckets& buckets = {});

/// Matches records by image_id. GT images without predictions count as all
/// misses; predictions for unknown images count as false positives.
EvalReport evaluate(const std::vector<ImageRecord>& preds, const std::vector<ImageRecord>& gts,
                    double iou_threshold = 0.5, const SizeBuckets& buckets = {});

}  // namespace mixnet::eval
