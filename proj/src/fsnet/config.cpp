#include "mixnet/fsnet/config.hpp"

#include <sstream>

namespace mixnet {

std::string to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::kShuffle:
      return "shuffle";
    case FusionMode::kAdditive:
      return "additive";
    case FusionMode::kNone:
      return "none";
  }
  return "?";
}

FusionMode parse_fusion_mode(const std::string& text) {
  if (text == "shuffle") return FusionMode::kShuffle;
  if (text == "additive" || text == "hrnet") return FusionMode::kAdditive;
  if (text == "none") return FusionMode::kNone;
  throw ConfigError("unknown fusion mode '" + text + "' (expected shuffle, additive or none)");
}

DepthSlot depth_slot(int position) {
  static constexpr std::array<DepthSlot, kDepthPositions> kSlots = {
      DepthSlot{1, 1}, {2, 1}, {2, 2}, {3, 1}, {3, 2}, {3, 3}, {4, 1}, {4, 2}, {4, 3}, {4, 4}};
  return kSlots.at(static_cast<std::size_t>(position));
}

int group_count(int channels) {
  for (int g = 8; g > 1; --g)
    if (channels % g == 0) return g;
  return 1;
}

DepthVector FsnetConfig::version_depths(const std::string& version) {
  if (version == "V1") return {4, 4, 4, 4, 4, 4, 4, 4, 4, 4};
  if (version == "V2") return {2, 2, 2, 2, 2, 2, 2, 2, 2, 2};
  // Fewer high-resolution blocks, more low-resolution ones.
  if (version == "V3") return {1, 1, 2, 1, 2, 4, 1, 2, 5, 4};
  if (version == "V4") return {2, 2, 3, 2, 3, 4, 2, 3, 5, 4};
  throw ConfigError("unknown FSNet version '" + version + "' (expected V1..V4 or custom with explicit depths)");
}

void FsnetConfig::validate() const {
  if (stem_channels <= 0) throw ConfigError("stem_channels must be positive");
  for (int s = 0; s < 4; ++s) {
    if (widths[static_cast<std::size_t>(s)] <= 0) {
      throw ConfigError("width of scale " + std::to_string(s + 1) + " must be positive");
    }
  }
  for (int p = 0; p < kDepthPositions; ++p) {
    if (depths[static_cast<std::size_t>(p)] <= 0) {
      const auto slot = depth_slot(p);
      throw ConfigError("stacking depth at scale " + std::to_string(slot.scale) + ", stage " +
                        std::to_string(slot.stage) + " must be a positive integer");
    }
  }
  if (fusion != FusionMode::kNone) {
    for (int s = 0; s < 2; ++s) {
      if (widths[static_cast<std::size_t>(s)] % 2 != 0) {
        throw ConfigError("scale " + std::to_string(s + 1) + " width " + std::to_string(widths[static_cast<std::size_t>(s)]) +
                          " must be divisible by 2 (first shuffle layer has 2 inputs)");
      }
    }
    for (int s = 0; s < 3; ++s) {
      if (widths[static_cast<std::size_t>(s)] % 3 != 0) {
        throw ConfigError("scale " + std::to_string(s + 1) + " width " + std::to_string(widths[static_cast<std::size_t>(s)]) +
                          " must be divisible by 3 (second shuffle layer has 3 inputs)");
      }
    }
  }
  if (version == "V1" || version == "V2") {
    const int expect = version == "V1" ? 4 : 2;
    for (int d : depths) {
      if (d != expect) throw ConfigError("version " + version + " requires every depth to be " + std::to_string(expect));
    }
  }
  if (head_hidden <= 0 || embedding_dim <= 0) throw ConfigError("head_hidden and embedding_dim must be positive");
}

FsnetConfig FsnetConfig::from_kv(const KeyValueConfig& kv) {
  FsnetConfig c;
  c.version = kv.get_string("version", c.version);
  if (c.version != "custom") c.depths = version_depths(c.version);
  if (kv.has("depths")) {
    const auto d = kv.get_int_list("depths");
    if (d.size() != kDepthPositions) {
      throw ConfigError("depths must list " + std::to_string(kDepthPositions) + " values, got " +
                        std::to_string(d.size()));
    }
    for (int i = 0; i < kDepthPositions; ++i) c.depths[static_cast<std::size_t>(i)] = static_cast<int>(d[static_cast<std::size_t>(i)]);
  } else if (c.version == "custom") {
    throw ConfigError("version custom requires an explicit depths list");
  }
  c.stem_channels = static_cast<int>(kv.get_int("stem_channels", c.stem_channels));
  if (kv.has("widths")) {
    const auto w = kv.get_int_list("widths");
    if (w.size() != 4) throw ConfigError("widths must list 4 values, got " + std::to_string(w.size()));
    for (int i = 0; i < 4; ++i) c.widths[static_cast<std::size_t>(i)] = static_cast<int>(w[static_cast<std::size_t>(i)]);
  }
  c.fusion = parse_fusion_mode(kv.get_string("fusion", to_string(c.fusion)));
  c.head_hidden = static_cast<int>(kv.get_int("head_hidden", c.head_hidden));
  c.embedding_dim = static_cast<int>(kv.get_int("embedding_dim", c.embedding_dim));
  c.nearest_upsampling = kv.get_bool("nearest_upsampling", c.nearest_upsampling);
  c.validate();
  return c;
}

FsnetConfig FsnetConfig::load(const std::string& path) { return from_kv(KeyValueConfig::load(path)); }

std::string FsnetConfig::to_text() const {
  std::ostringstream out;
  auto list = [&](const auto& xs) {
    out << "[";
    for (std::size_t i = 0; i < xs.size(); ++i) out << (i ? ", " : "") << xs[i];
    out << "]";
  };
  out << "version = " << version << "\n";
  out << "stem_channels = " << stem_channels << "\n";
  out << "widths = ";
  list(widths);
  out << "\ndepths = ";
  list(depths);
  out << "\nfusion = " << to_string(fusion) << "\n";
  out << "head_hidden = " << head_hidden << "\n";
  out << "embedding_dim = " << embedding_dim << "\n";
  out << "nearest_upsampling = " << (nearest_upsampling ? "true" : "false") << "\n";
  return out.str();
}

}  // namespace mixnet
