#include "mixnet/util/image.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

namespace mixnet {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Image read_png(const std::string& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw ImageError("cannot read PNG " + path + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  Image out(static_cast<int>(img.width), static_cast<int>(img.height));
  if (!png_image_finish_read(&img, nullptr, out.rgb.data(), 0, nullptr)) {
    png_image_free(&img);
    throw ImageError("cannot decode PNG " + path + ": " + img.message);
  }
  return out;
}

void write_png(const std::string& path, const Image& image) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_RGB;
  File f(std::fopen(path.c_str(), "wb"));
  if (!f) throw ImageError("cannot open " + path + " for writing");
  if (!png_image_write_to_stdio(&img, f.get(), 0, image.rgb.data(), 0, nullptr)) {
    throw ImageError("cannot write PNG " + path + ": " + img.message);
  }
}

std::vector<std::uint8_t> encode_png(const Image& image) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, image.rgb.data(), 0, nullptr)) {
    throw ImageError(std::string("cannot encode PNG: ") + img.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, image.rgb.data(), 0, nullptr)) {
    throw ImageError(std::string("cannot encode PNG: ") + img.message);
  }
  out.resize(size);
  return out;
}

Tensor<float> image_to_tensor(const Image& image) {
  Tensor<float> t({1, 3, image.height, image.width});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width; ++x) t.at(0, c, y, x) = image.at(x, y, c) / 127.5f - 1.0f;
  return t;
}

Image pad_to_multiple(const Image& image, int multiple) {
  const int w = (image.width + multiple - 1) / multiple * multiple;
  const int h = (image.height + multiple - 1) / multiple * multiple;
  if (w == image.width && h == image.height) return image;
  Image out(w, h);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = image.at(x, y, c);
  return out;
}

Image crop(const Image& image, int x0, int y0, int w, int h) {
  if (x0 < 0 || y0 < 0 || w < 0 || h < 0 || x0 + w > image.width || y0 + h > image.height) {
    throw ImageError("crop window outside the image");
  }
  Image out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = image.at(x0 + x, y0 + y, c);
  return out;
}

}  // namespace mixnet
