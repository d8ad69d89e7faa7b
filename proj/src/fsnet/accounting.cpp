#include "mixnet/fsnet/accounting.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

namespace mixnet {

ArchReport count_params_flops(const std::vector<LayerRecord>& layers, int height, int width) {
  ArchReport r;
  r.height = height;
  r.width = width;
  for (const auto& l : layers) {
    AccountingRow row{l.name, l.kind, l.params, 0};
    const long long pixels = static_cast<long long>(height / l.stride) * (width / l.stride);
    row.macs = static_cast<long long>(l.macs_per_pixel) * pixels;
    r.total_params += row.params;
    r.total_macs += row.macs;
    r.rows.push_back(row);
  }
  return r;
}

ArchReport architecture_report(const FsnetConfig& config, int height, int width) {
  ParameterSet<float> params;
  nn::Rng rng(0);
  Fsnet<float> net(config, params, rng);
  return count_params_flops(net, height, width);
}

std::string ArchReport::to_text() const {
  std::size_t name_w = 5;
  for (const auto& r : rows) name_w = std::max(name_w, r.name.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(name_w)) << "layer" << "  " << std::setw(8) << "kind" << std::right
      << std::setw(12) << "params" << std::setw(16) << "MACs" << "\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(static_cast<int>(name_w)) << r.name << "  " << std::setw(8) << r.kind << std::right
        << std::setw(12) << r.params << std::setw(16) << r.macs << "\n";
  }
  out << std::left << std::setw(static_cast<int>(name_w)) << "total" << "  " << std::setw(8) << "" << std::right
      << std::setw(12) << total_params << std::setw(16) << total_macs << "\n";
  out << "input " << height << "x" << width << "\n";
  return out.str();
}

}  // namespace mixnet
