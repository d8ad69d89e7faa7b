#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mixnet/pipeline/augment.hpp"
#include "mixnet/pipeline/model.hpp"

namespace mixnet {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unpublished weighting of the six loss terms.
struct LossWeights {
  double classification = 1.0;
  double distance = 0.5;
  double orientation = 0.5;
  double embedding = 0.25;
  double center = 1.0;
  double refine = 1.0;
};

struct TrainConfig {
  int epochs = 20;
  double lr = 1e-3;
  /// Learning rate multiplier applied every `decay_every` epochs.
  double decay = 0.9;
  int decay_every = 5;
  int batch_size = 2;
  std::uint64_t seed = 1;
  /// Use at most this many training images; 0 keeps all.
  int max_images = 0;
  AugmentConfig augment;
  LossWeights weights;
  /// Contour point count is drawn per step from [min_points, max_points].
  int min_points = 12;
  int max_points = 28;
  /// Pixel noise on the GT-derived CTBlock proposals.
  double proposal_jitter = 1.5;
  /// Predicted rough contours with at least this IoU to a GT also train CTBlock.
  double match_iou = 0.3;
  /// Epochs before predicted contours join the proposals.
  int proposal_warmup = 1;
  double delta_pull = 0.5;
  double delta_push = 1.5;

  void validate() const;
  static TrainConfig from_kv(const KeyValueConfig& kv);
  std::string to_text() const;
  double lr_at(int epoch) const;
};

struct EpochStats {
  int epoch = 0;
  double lr = 0;
  double total = 0;
  double classification = 0;
  double distance = 0;
  double orientation = 0;
  double embedding = 0;
  double center = 0;
  double refine = 0;
  double seconds = 0;
};

/// Images and GT polygons of a synthetic dataset directory, in manifest order.
std::vector<Sample> load_samples(const std::string& dir, int max_images = 0);

/// Trains `model` in place. On a non-finite loss, writes a JSON dump of the
/// batch to `nan_dump_path` (when non-empty) and throws TrainingError.
std::vector<EpochStats> train_model(MixNet& model, const std::vector<Sample>& data, const TrainConfig& config,
                                    const std::string& nan_dump_path = "",
                                    const std::function<void(const EpochStats&)>& on_epoch = {});

void write_loss_csv(const std::string& path, const std::vector<EpochStats>& curve);

}  // namespace mixnet
