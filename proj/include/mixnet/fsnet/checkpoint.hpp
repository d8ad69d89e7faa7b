#pragma once

#include <stdexcept>
#include <string>

#include "mixnet/tensor/graph.hpp"

namespace mixnet {

/// Missing or unreadable checkpoint files.
class CheckpointMissing : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Manifest and binary disagree (names, shapes, sizes or checksums).
class CheckpointCorrupt : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes `<stem>.bin` (little-endian float32 arrays back to back) and
/// `<stem>.manifest` (one line per array: name, shape, offset, count, crc32,
/// followed by the embedded configuration text).
void save_checkpoint(const std::string& stem, const ParameterSet<float>& params, const std::string& config_text);

/// Embedded configuration text of a checkpoint.
std::string read_checkpoint_config(const std::string& stem);

/// Fills every parameter of `params` from the checkpoint. All manifest entries
/// must match a parameter by name and shape, and every checksum must agree.
void load_checkpoint(const std::string& stem, ParameterSet<float>& params);

}  // namespace mixnet
