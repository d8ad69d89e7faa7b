#include "mixnet/pipeline/model.hpp"

#include "mixnet/fsnet/checkpoint.hpp"

namespace mixnet {

ModelConfig ModelConfig::from_kv(const KeyValueConfig& kv) {
  ModelConfig c;
  c.fsnet = FsnetConfig::from_kv(kv.section("fsnet"));
  c.ctblock = CtblockConfig::from_kv(kv.section("ctblock"));
  return c;
}

ModelConfig ModelConfig::load(const std::string& path) { return from_kv(KeyValueConfig::load(path)); }

std::string ModelConfig::to_text() const {
  return "[fsnet]\n" + fsnet.to_text() + "\n[ctblock]\n" + ctblock.to_text();
}

MixNet::MixNet(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  nn::Rng rng(seed);
  fsnet_ = std::make_unique<Fsnet<float>>(config_.fsnet, params_, rng);
  const int heatmaps = 4 + config_.fsnet.embedding_dim;
  ctblock_ = std::make_unique<Ctblock<float>>(config_.ctblock, config_.fsnet.fused_channels(), heatmaps, params_, rng);
}

HeadMaps MixNet::run_heads(Graph<float>& g, Var<float> image) const {
  HeadMaps out;
  const auto pyramid = fsnet_->backbone(g, image);
  out.fused = pyramid.fused;
  out.heads = fsnet_->heads(g, pyramid.fused);
  out.heatmaps = ops::concat_channels<float>(
      {out.heads.classification, out.heads.distance, out.heads.orientation, out.heads.embedding});
  return out;
}

void MixNet::save(const std::string& stem) const { save_checkpoint(stem, params_, config_.to_text()); }

std::unique_ptr<MixNet> MixNet::load(const std::string& stem) {
  const auto config = ModelConfig::from_kv(KeyValueConfig::parse(read_checkpoint_config(stem), stem + ".manifest"));
  auto model = std::make_unique<MixNet>(config, 0);
  load_checkpoint(stem, model->params_);
  return model;
}

}  // namespace mixnet
