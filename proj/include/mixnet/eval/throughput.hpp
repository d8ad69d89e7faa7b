#pragma once

#include <functional>
#include <vector>

namespace mixnet::eval {

struct ThroughputRow {
  int n = 0;
  double images_per_second = 0;
  std::vector<double> run_seconds;
};

/// Times `run(n)`, which must process `images` images, `runs` times per N
/// after `warmup` untimed calls. Reports the median run.
std::vector<ThroughputRow> bench_throughput(const std::function<void(int)>& run, int images,
                                            const std::vector<int>& ns, int runs = 5, int warmup = 1);

/// Median of `values` (mean of the middle pair for even sizes).
double median(std::vector<double> values);

}  // namespace mixnet::eval
