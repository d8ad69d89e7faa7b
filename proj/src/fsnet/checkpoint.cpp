#include "mixnet/fsnet/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace mixnet {

namespace {

constexpr const char* kConfigBegin = "config-begin";
constexpr const char* kConfigEnd = "config-end";

unsigned long crc_of(const float* data, std::size_t count) {
  uLong crc = crc32(0L, Z_NULL, 0);
  return crc32(crc, reinterpret_cast<const Bytef*>(data), static_cast<uInt>(count * sizeof(float)));
}

std::string shape_text(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out.empty() ? "scalar" : out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointMissing("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void save_checkpoint(const std::string& stem, const ParameterSet<float>& params, const std::string& config_text) {
  const std::filesystem::path bin_path = stem + ".bin";
  if (bin_path.has_parent_path()) std::filesystem::create_directories(bin_path.parent_path());
  std::ofstream bin(bin_path, std::ios::binary);
  std::ofstream man(stem + ".manifest");
  if (!bin || !man) throw CheckpointMissing("cannot write checkpoint " + stem);
  man << "mixnet-checkpoint 1\n";
  man << "binary " << bin_path.filename().string() << "\n";
  std::size_t offset = 0;
  for (const auto* p : params.all()) {
    const auto& v = p->value;
    bin.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.numel() * sizeof(float)));
    man << "tensor " << p->name << " " << shape_text(v.shape()) << " " << offset << " " << v.numel() << " " << std::hex
        << crc_of(v.data(), v.numel()) << std::dec << "\n";
    offset += v.numel();
  }
  man << kConfigBegin << "\n" << config_text;
  if (!config_text.empty() && config_text.back() != '\n') man << "\n";
  man << kConfigEnd << "\n";
  if (!bin || !man) throw CheckpointMissing("failed writing checkpoint " + stem);
}

std::string read_checkpoint_config(const std::string& stem) {
  const std::string text = read_file(stem + ".manifest");
  const auto b = text.find(std::string(kConfigBegin) + "\n");
  const auto e = text.find(std::string(kConfigEnd) + "\n");
  if (b == std::string::npos || e == std::string::npos || e < b) {
    throw CheckpointCorrupt(stem + ".manifest: missing embedded configuration");
  }
  const auto start = b + std::strlen(kConfigBegin) + 1;
  return text.substr(start, e - start);
}

void load_checkpoint(const std::string& stem, ParameterSet<float>& params) {
  const std::string manifest = read_file(stem + ".manifest");
  const std::string blob = read_file(stem + ".bin");
  std::istringstream in(manifest);
  std::string line;
  std::size_t loaded = 0;
  while (std::getline(in, line)) {
    if (line == kConfigBegin) break;
    if (line.rfind("tensor ", 0) != 0) continue;
    std::istringstream ls(line.substr(7));
    std::string name, shape;
    std::size_t offset = 0, count = 0;
    unsigned long crc = 0;
    ls >> name >> shape >> offset >> count >> std::hex >> crc;
    if (!ls) throw CheckpointCorrupt("malformed manifest line: " + line);
    auto* p = params.find(name);
    if (!p) throw CheckpointCorrupt("checkpoint tensor '" + name + "' has no matching parameter");
    if (shape_text(p->value.shape()) != shape || p->value.numel() != count) {
      throw CheckpointCorrupt("checkpoint tensor '" + name + "' has shape " + shape + ", model expects " +
                              shape_text(p->value.shape()));
    }
    if ((offset + count) * sizeof(float) > blob.size()) {
      throw CheckpointCorrupt("checkpoint tensor '" + name + "' extends past the end of " + stem + ".bin");
    }
    std::memcpy(p->value.data(), blob.data() + offset * sizeof(float), count * sizeof(float));
    if (crc_of(p->value.data(), count) != crc) throw CheckpointCorrupt("checksum mismatch for tensor '" + name + "'");
    ++loaded;
  }
  if (loaded != params.size()) {
    throw CheckpointCorrupt("checkpoint holds " + std::to_string(loaded) + " tensors, model has " +
                            std::to_string(params.size()));
  }
}

}  // namespace mixnet
