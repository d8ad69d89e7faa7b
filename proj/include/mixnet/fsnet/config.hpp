#pragma once

#include <array>
#include <string>

#include "mixnet/util/kvconfig.hpp"

namespace mixnet {

enum class FusionMode { kShuffle, kAdditive, kNone };

std::string to_string(FusionMode mode);
FusionMode parse_fusion_mode(const std::string& text);

/// Convolution-stack positions in network order:
///   0: scale1@stage1
///   1-2: scale1..2@stage2
///   3-5: scale1..3@stage3
///   6-9: scale1..4@stage4
constexpr int kDepthPositions = 10;
using DepthVector = std::array<int, kDepthPositions>;

struct FsnetConfig {
  std::string version = "V1";
  int stem_channels = 24;
  std::array<int, 4> widths = {24, 48, 96, 192};
  DepthVector depths = {4, 4, 4, 4, 4, 4, 4, 4, 4, 4};
  FusionMode fusion = FusionMode::kShuffle;
  int head_hidden = 8;
  int embedding_dim = 4;
  /// Nearest up-sampling inside fusion and final concat (routing-oracle mode).
  bool nearest_upsampling = false;

  /// Throws ConfigError naming the offending scale or position.
  void validate() const;
  /// Stacking depths for V1..V4. V3 and V4 integers are inferred, not published.
  static DepthVector version_depths(const std::string& version);
  static FsnetConfig from_kv(const KeyValueConfig& kv);
  static FsnetConfig load(const std::string& path);
  std::string to_text() const;
  int fused_channels() const { return widths[0] + widths[1] + widths[2] + widths[3]; }
};

/// Stage (1-4) and scale (1-4) of a depth position.
struct DepthSlot {
  int stage;
  int scale;
};
DepthSlot depth_slot(int position);

/// Largest divisor of `channels` not above 8.
int group_count(int channels);

}  // namespace mixnet
