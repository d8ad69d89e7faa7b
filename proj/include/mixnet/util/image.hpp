#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mixnet/tensor/tensor.hpp"

namespace mixnet {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 8-bit interleaved RGB.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(int w, int h, std::uint8_t fill = 0) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, fill) {}

  std::uint8_t& at(int x, int y, int c) { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::uint8_t at(int x, int y, int c) const { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  bool operator==(const Image&) const = default;
};

Image read_png(const std::string& path);
void write_png(const std::string& path, const Image& image);
/// PNG file bytes.
std::vector<std::uint8_t> encode_png(const Image& image);

/// [1,3,H,W] tensor with values mapped from [0,255] to [-1,1].
Tensor<float> image_to_tensor(const Image& image);

/// Copy of `image` padded with black to extents divisible by `multiple`.
Image pad_to_multiple(const Image& image, int multiple);

/// Window of `image` at (x0, y0) with extents w x h; must lie inside the image.
Image crop(const Image& image, int x0, int y0, int w, int h);

}  // namespace mixnet
