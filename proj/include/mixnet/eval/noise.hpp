#pragma once

#include <cstdint>

#include "mixnet/util/image.hpp"

namespace mixnet::eval {

/// Salt-and-pepper corruption. Each pixel is replaced with probability `p`
/// by all-black or all-white (equal odds). The draw for a pixel depends only
/// on (seed, x + origin_x, y + origin_y), so a crop taken at the origin
/// receives the same noise as the full image.
Image impulse_noise(const Image& image, double p, std::uint64_t seed, int origin_x = 0, int origin_y = 0);

/// Fraction of pixels whose RGB value differs between `a` and `b`.
double altered_fraction(const Image& a, const Image& b);

}  // namespace mixnet::eval
