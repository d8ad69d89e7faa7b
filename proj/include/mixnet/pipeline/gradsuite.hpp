#pragma once

#include <string>
#include <vector>

namespace mixnet {

struct GradSuiteRow {
  std::string name;
  /// "op" or "composite".
  std::string kind;
  double max_relative_error = 0;
  double tolerance = 0;
  std::size_t checked = 0;
  std::size_t nan_count = 0;
  bool pass() const { return nan_count == 0 && checked > 0 && max_relative_error < tolerance; }
};

/// Central-difference checks at 64-bit of every differentiable op (tolerance
/// 1e-4) and of the composed backbone+heads and CTBlock (1e-3, inputs and
/// sampled parameters).
std::vector<GradSuiteRow> run_gradient_suite();

std::string gradient_suite_text(const std::vector<GradSuiteRow>& rows);
std::string gradient_suite_json(const std::vector<GradSuiteRow>& rows);

}  // namespace mixnet
