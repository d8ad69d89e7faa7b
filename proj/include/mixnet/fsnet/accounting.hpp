#pragma once

#include <string>
#include <vector>

#include "mixnet/fsnet/fsnet.hpp"

namespace mixnet {

struct AccountingRow {
  std::string name;
  std::string kind;
  long params = 0;
  long long macs = 0;
};

struct ArchReport {
  std::vector<AccountingRow> rows;
  long total_params = 0;
  long long total_macs = 0;
  int height = 0;
  int width = 0;

  /// Aligned table, one row per layer plus a total line.
  std::string to_text() const;
};

/// Exact parameter counts and analytic convolution MACs for an input of H x W.
ArchReport count_params_flops(const std::vector<LayerRecord>& layers, int height, int width);

template <typename T>
ArchReport count_params_flops(const Fsnet<T>& net, int height, int width) {
  return count_params_flops(net.layers(), height, width);
}

/// Builds a throwaway network from `config` and reports on it.
ArchReport architecture_report(const FsnetConfig& config, int height, int width);

}  // namespace mixnet
