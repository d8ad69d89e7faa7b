#include <algorithm>
#include <random>
#include <thread>

#include "doctest.h"
#include "mixnet/eval/metrics.hpp"
#include "mixnet/eval/noise.hpp"
#include "mixnet/eval/throughput.hpp"

using namespace mixnet;
using namespace mixnet::eval;

namespace {

Detection box(double x0, double y0, double x1, double y1, double score = 1.0) {
  return {{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}, score};
}

Image gray(int w, int h) { return Image(w, h, 128); }

}  // namespace

TEST_CASE("one perfect prediction against two GT") {
  const auto m = match_detections({box(0, 0, 10, 10)}, {box(0, 0, 10, 10), box(50, 50, 60, 60)});
  const auto r = bucketed_report({m});
  CHECK(r.precision == 1.0);
  CHECK(r.recall == 0.5);
  CHECK(r.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("duplicates on one GT give one TP and one FP") {
  const auto m = match_detections({box(0, 0, 10, 10, 0.9), box(0, 0, 10, 10.5, 0.8)}, {box(0, 0, 10, 10)});
  CHECK(m.true_positives() == 1);
  CHECK(m.false_positives() == 1);
  CHECK(m.pred_to_gt == std::vector<int>{0, -1});
}

TEST_CASE("IoU just below the threshold is a false positive") {
  const auto gt = box(0, 0, 10, 10);
  CHECK(match_detections({box(0, 0, 10, 4.9)}, {gt}).true_positives() == 0);
  CHECK(match_detections({box(0, 0, 10, 5.1)}, {gt}).true_positives() == 1);
}

TEST_CASE("five-instance fixture matches a hand tally") {
  // GT areas: 100 small, 800 small, 2500 medium, 10000 large, 2400 medium (COCO limits 1024 / 9216).
  const std::vector<Detection> gts = {box(0, 0, 10, 10), box(20, 0, 40, 40), box(100, 0, 150, 50),
                                      box(200, 0, 300, 100), box(0, 100, 40, 160)};
  const std::vector<Detection> preds = {
      box(0, 0, 10, 10, 0.9),       // TP on gt 0
      box(0, 0, 10, 10, 0.5),       // duplicate on gt 0
      box(102, 0, 152, 50, 0.8),    // TP on gt 2, IoU 48/52
      box(200, 0, 240, 100, 0.7),   // IoU 0.4 with gt 3
      box(400, 400, 410, 410, 0.6)  // nothing there
  };
  const auto r = bucketed_report({match_detections(preds, gts)});
  CHECK(r.tp == 2);
  CHECK(r.fp == 3);
  CHECK(r.fn == 3);
  CHECK(r.precision == doctest::Approx(0.4));
  CHECK(r.recall == doctest::Approx(0.4));
  CHECK(r.f1 == doctest::Approx(0.4));
  CHECK(r.bucket_gt == std::array<int, 3>{2, 2, 1});
  CHECK(*r.bucket_recall[0] == doctest::Approx(0.5));
  CHECK(*r.bucket_recall[1] == doctest::Approx(0.5));
  CHECK(*r.bucket_recall[2] == 0.0);
  CHECK(r.images[0].pred_iou[1] == doctest::Approx(48.0 / 52.0));
}

TEST_CASE("buckets: all large matched, empty buckets are N/A") {
  const std::vector<Detection> gts = {box(0, 0, 100, 100), box(200, 0, 300, 120)};
  const auto r = bucketed_report({match_detections(gts, gts)});
  CHECK(*r.bucket_recall[2] == 1.0);
  CHECK_FALSE(r.bucket_recall[0].has_value());
  CHECK_FALSE(r.bucket_recall[1].has_value());
  CHECK(r.to_text().find("N/A") != std::string::npos);
  CHECK(r.to_json().find("null") != std::string::npos);

  const auto desk = SizeBuckets::desk();
  CHECK(desk.bucket_of(255.9) == 0);
  CHECK(desk.bucket_of(256) == 1);
  CHECK(desk.bucket_of(2304) == 2);
}

TEST_CASE("report invariants and conventions") {
  const std::vector<Detection> gts = {box(0, 0, 10, 10), box(20, 0, 30, 10)};
  const auto empty = bucketed_report({match_detections({}, gts)});
  CHECK(empty.precision == 0.0);
  CHECK(empty.recall == 0.0);
  CHECK(empty.f1 == 0.0);
  CHECK(empty.tp + empty.fn == 2);

  const auto self = evaluate({{"a", gts}}, {{"a", gts}});
  CHECK(self.precision == 1.0);
  CHECK(self.recall == 1.0);
  CHECK(self.f1 == 1.0);

  const auto missing = evaluate({{"ghost", gts}}, {{"a", gts}});
  CHECK(missing.fn == 2);
  CHECK(missing.fp == 2);
}

TEST_CASE("scoring ignores prediction order at equal confidence") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> pos(0, 200), size(5, 40);
  std::vector<Detection> gts, preds;
  for (int i = 0; i < 12; ++i) {
    const double x = pos(rng), y = pos(rng), s = size(rng);
    gts.push_back(box(x, y, x + s, y + s * 0.6));
  }
  for (int i = 0; i < 20; ++i) {
    const auto& g = gts[static_cast<std::size_t>(i) % gts.size()];
    const double dx = std::uniform_real_distribution<double>(-4, 4)(rng);
    preds.push_back(box(g.polygon[0].x + dx, g.polygon[0].y, g.polygon[2].x + dx, g.polygon[2].y, i % 3 ? 0.5 : 0.7));
  }
  const auto reference = bucketed_report({match_detections(preds, gts)}).to_json();
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(preds.begin(), preds.end(), rng);
    CHECK(bucketed_report({match_detections(preds, gts)}).to_json() == reference);
  }
}

TEST_CASE("report recomputed from serialized match lists is identical") {
  const std::vector<Detection> gts = {box(0, 0, 10, 10), box(20, 0, 60, 30), box(100, 0, 220, 120)};
  const std::vector<Detection> preds = {box(0.3, 0, 10.3, 10, 0.3), box(21, 1, 59, 33, 0.123456789),
                                        box(5, 5, 9, 9, 0.9)};
  const auto r = evaluate({{"x", preds}}, {{"x", gts}, {"y", gts}}, 0.5, SizeBuckets::desk());
  const auto text = r.to_json();
  const auto back = EvalReport::from_json(text);
  CHECK(back.to_json() == text);
  CHECK(back.f1 == r.f1);
  CHECK(back.precision == r.precision);
  CHECK_THROWS_AS(EvalReport::from_json("{\"bucket_limits\": [1, 2]}"), RecordError);
}

TEST_CASE("impulse noise: identity, saturation, rate") {
  const auto img = gray(64, 48);
  CHECK(impulse_noise(img, 0.0, 1) == img);
  const auto full = impulse_noise(img, 1.0, 1);
  int white = 0;
  for (int y = 0; y < full.height; ++y)
    for (int x = 0; x < full.width; ++x) {
      const auto v = full.at(x, y, 0);
      CHECK((v == 0 || v == 255));
      CHECK(full.at(x, y, 1) == v);
      CHECK(full.at(x, y, 2) == v);
      white += v == 255;
    }
  CHECK(static_cast<double>(white) / (64 * 48) == doctest::Approx(0.5).epsilon(0.1));
  CHECK_THROWS(impulse_noise(img, 1.5, 1));

  const auto big = gray(640, 640);
  for (double p : {0.05, 0.10}) {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
      const double f = altered_fraction(big, impulse_noise(big, p, seed));
      INFO("p " << p << " seed " << seed << " fraction " << f);
      CHECK(std::abs(f - p) <= 0.005);
    }
  }
}

TEST_CASE("impulse noise is deterministic and commutes with cropping") {
  Image img(40, 30);
  for (std::size_t i = 0; i < img.rgb.size(); ++i) img.rgb[i] = static_cast<std::uint8_t>(i * 37 % 251);
  const auto noisy = impulse_noise(img, 0.3, 77);
  CHECK(noisy == impulse_noise(img, 0.3, 77));
  CHECK_FALSE(noisy == impulse_noise(img, 0.3, 78));
  CHECK(impulse_noise(crop(img, 7, 5, 20, 16), 0.3, 77, 7, 5) == crop(noisy, 7, 5, 20, 16));
}

TEST_CASE("throughput reports the median of the timed runs") {
  CHECK(median({3, 1, 2}) == 2);
  CHECK(median({4, 1, 2, 3}) == 2.5);
  int calls = 0;
  const auto rows = bench_throughput(
      [&](int n) {
        ++calls;
        std::this_thread::sleep_for(std::chrono::milliseconds(n));
      },
      2, {4, 20}, 5, 1);
  CHECK(calls == 12);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].run_seconds.size() == 5);
  CHECK(rows[1].images_per_second < rows[0].images_per_second);
  CHECK_THROWS(bench_throughput([](int) {}, 1, {1}, 4));
}
