#pragma once

#include <memory>
#include <string>

#include "mixnet/ctblock/ctblock.hpp"
#include "mixnet/fsnet/fsnet.hpp"

namespace mixnet {

/// Backbone and refinement settings; text form uses [fsnet] and [ctblock] sections.
struct ModelConfig {
  FsnetConfig fsnet;
  CtblockConfig ctblock;

  static ModelConfig from_kv(const KeyValueConfig& kv);
  static ModelConfig load(const std::string& path);
  std::string to_text() const;
};

/// Heads concatenated as CTBlock heatmaps: classification, distance,
/// orientation (2), embedding.
struct HeadMaps {
  HeadOutput<float> heads;
  Var<float> fused;
  Var<float> heatmaps;
};

/// FSNet + CTBlock with one parameter set.
class MixNet {
 public:
  MixNet(const ModelConfig& config, std::uint64_t seed);

  HeadMaps run_heads(Graph<float>& g, Var<float> image) const;

  const ModelConfig& config() const { return config_; }
  ParameterSet<float>& params() { return params_; }
  const ParameterSet<float>& params() const { return params_; }
  const Fsnet<float>& fsnet() const { return *fsnet_; }
  const Ctblock<float>& ctblock() const { return *ctblock_; }

  void save(const std::string& stem) const;
  /// Rebuilds the model from the configuration embedded in a checkpoint.
  static std::unique_ptr<MixNet> load(const std::string& stem);

 private:
  ModelConfig config_;
  ParameterSet<float> params_;
  std::unique_ptr<Fsnet<float>> fsnet_;
  std::unique_ptr<Ctblock<float>> ctblock_;
};

}  // namespace mixnet
