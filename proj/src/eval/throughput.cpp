#include "mixnet/eval/throughput.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>

namespace mixnet::eval {

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

std::vector<ThroughputRow> bench_throughput(const std::function<void(int)>& run, int images,
                                            const std::vector<int>& ns, int runs, int warmup) {
  if (runs < 5) throw std::invalid_argument("bench_throughput: at least 5 timed runs are required");
  if (images < 1) throw std::invalid_argument("bench_throughput: image count must be positive");
  std::vector<ThroughputRow> rows;
  for (int n : ns) {
    for (int w = 0; w < warmup; ++w) run(n);
    ThroughputRow row;
    row.n = n;
    for (int r = 0; r < runs; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      run(n);
      row.run_seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    const double t = median(row.run_seconds);
    row.images_per_second = t > 0 ? images / t : 0.0;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace mixnet::eval
