#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mixnet/eval/metrics.hpp"
#include "mixnet/pipeline/infer.hpp"
#include "mixnet/pipeline/train.hpp"
#include "mixnet/synth/synth.hpp"

namespace mixnet {

/// Everything a desk-scale run needs: data generation, model, training,
/// inference and scoring settings. Text form uses [synth], [data], [fsnet],
/// [ctblock], [train] (with augment.* keys), [infer] and [eval] sections.
struct Profile {
  std::string name = "desk";
  synth::SceneSpec synth;
  int train_images = 500;
  int test_images = 100;
  std::uint64_t train_seed = 1000;
  std::uint64_t test_seed = 2000;
  ModelConfig model;
  TrainConfig train;
  InferConfig infer;
  eval::SizeBuckets buckets = eval::SizeBuckets::desk();
  /// Reduced budget for ablation trainings (0 keeps the main values).
  int ablation_images = 0;
  int ablation_epochs = 0;

  static Profile from_kv(const KeyValueConfig& kv);
  static Profile load(const std::string& path);
  std::string to_text() const;
};

/// Synthesizes (when absent) and loads the train and test splits of a profile under `root`.
struct Splits {
  std::vector<Sample> train;
  std::vector<Sample> test;
};
Splits prepare_splits(const Profile& profile, const std::string& root);

std::vector<eval::ImageRecord> gt_records(const std::vector<Sample>& samples);
std::vector<eval::ImageRecord> predict(const MixNet& model, const std::vector<Sample>& samples,
                                       const InferConfig& config);

/// Per-image impulse noise with seeds derived from `seed` and the image index.
std::vector<Sample> corrupt(const std::vector<Sample>& samples, double p, std::uint64_t seed);

eval::EvalReport evaluate_model(const MixNet& model, const std::vector<Sample>& samples, const InferConfig& infer,
                                const eval::SizeBuckets& buckets);

/// Trains one model per (variant, seed) pair and memoizes it for the process.
class ModelCache {
 public:
  const MixNet& get(const ModelConfig& model, const TrainConfig& train, const std::vector<Sample>& data);
  std::size_t size() const { return models_.size(); }

 private:
  std::map<std::string, std::unique_ptr<MixNet>> models_;
};

struct AblationRow {
  std::string label;
  /// values[column][seed]
  std::vector<std::vector<double>> values;
};

struct AblationTable {
  std::string which;
  std::vector<std::string> columns;
  std::vector<std::uint64_t> seeds;
  std::vector<AblationRow> rows;
  /// Empty when fewer than three seeds were run.
  std::string verdict;
  bool verdict_holds = false;

  std::string to_text() const;
  std::string to_json() const;
};

double mean_of(const std::vector<double>& v);
double sd_of(const std::vector<double>& v);

/// The four ablations. Each trains on `splits.train` with the profile's
/// ablation budget for every seed.
AblationTable ablate_shuffle(const Profile& profile, const Splits& splits, const std::vector<std::uint64_t>& seeds,
                             ModelCache& cache);
AblationTable ablate_noise(const Profile& profile, const Splits& splits, const std::vector<std::uint64_t>& seeds,
                           ModelCache& cache);
AblationTable ablate_nsweep(const Profile& profile, const Splits& splits, const std::vector<std::uint64_t>& seeds,
                            ModelCache& cache);
AblationTable ablate_version(const Profile& profile, const Splits& splits, const std::vector<std::uint64_t>& seeds,
                             ModelCache& cache);

/// Profile's train config with the ablation budget and `seed` applied.
TrainConfig ablation_train_config(const Profile& profile, std::uint64_t seed);

/// CTBlock-only images per second on `samples` for each N: backbone maps are
/// computed once, then contours resampled to N are refined. Median of `runs`.
std::vector<std::pair<int, double>> ctblock_throughput(const MixNet& model, const std::vector<Sample>& samples,
                                                       const InferConfig& infer, const std::vector<int>& ns,
                                                       int runs = 5);

}  // namespace mixnet
