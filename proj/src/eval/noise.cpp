#include "mixnet/eval/noise.hpp"

#include <stdexcept>

namespace mixnet::eval {

namespace {

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t pixel_hash(std::uint64_t seed, std::int64_t x, std::int64_t y) {
  return splitmix(splitmix(splitmix(seed) ^ static_cast<std::uint64_t>(x)) ^ static_cast<std::uint64_t>(y));
}

}  // namespace

Image impulse_noise(const Image& image, double p, std::uint64_t seed, int origin_x, int origin_y) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("impulse_noise: p must lie in [0, 1]");
  Image out = image;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      const std::uint64_t h = pixel_hash(seed, x + origin_x, y + origin_y);
      // Top 53 bits give the uniform draw, the lowest bit picks the colour.
      const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
      if (u >= p) continue;
      const std::uint8_t v = (h & 1u) ? 255 : 0;
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = v;
    }
  return out;
}

double altered_fraction(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) throw std::invalid_argument("altered_fraction: size mismatch");
  if (a.width == 0 || a.height == 0) return 0.0;
  long changed = 0;
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x) {
      bool diff = false;
      for (int c = 0; c < 3; ++c) diff = diff || a.at(x, y, c) != b.at(x, y, c);
      changed += diff;
    }
  return static_cast<double>(changed) / (static_cast<double>(a.width) * a.height);
}

}  // namespace mixnet::eval
