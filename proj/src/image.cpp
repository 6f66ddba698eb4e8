#include "cdaae/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "cdaae/model.hpp"

namespace cdaae {

std::vector<std::uint8_t> encode_png(const Image& image) {
  if (image.width == 0 || image.height == 0 || image.rgb.size() != image.width * image.height * 3) {
    throw ValidationError("encode_png: inconsistent image buffer");
  }
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, image.rgb.data(), 0, nullptr)) {
    throw ValidationError(std::string("png encode failed: ") + png.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, image.rgb.data(), 0, nullptr)) {
    throw ValidationError(std::string("png encode failed: ") + png.message);
  }
  out.resize(size);
  return out;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    throw ValidationError(std::string("undecodable image: ") + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  Image img(png.width, png.height);
  if (!png_image_finish_read(&png, nullptr, img.rgb.data(), 0, nullptr)) {
    png_image_free(&png);
    throw ValidationError(std::string("undecodable image: ") + png.message);
  }
  return img;
}

Image read_png(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open image " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_png(bytes);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_png(const std::filesystem::path& path, const Image& image) {
  const auto bytes = encode_png(image);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Image resize_bilinear(const Image& image, std::size_t width, std::size_t height) {
  if (image.width == width && image.height == height) return image;
  Image out(width, height);
  const double sx = static_cast<double>(image.width) / static_cast<double>(width);
  const double sy = static_cast<double>(image.height) / static_cast<double>(height);
  const auto max_x = static_cast<long>(image.width) - 1;
  const auto max_y = static_cast<long>(image.height) - 1;
  for (std::size_t y = 0; y < height; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(max_y));
    const long y0 = static_cast<long>(std::floor(fy));
    const long y1 = std::min(y0 + 1, max_y);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(max_x));
      const long x0 = static_cast<long>(std::floor(fx));
      const long x1 = std::min(x0 + 1, max_x);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < 3; ++c) {
        const double top = (1 - wx) * image.at(x0, y0, c) + wx * image.at(x1, y0, c);
        const double bottom = (1 - wx) * image.at(x0, y1, c) + wx * image.at(x1, y1, c);
        out.at(x, y, c) = static_cast<std::uint8_t>(std::lround(std::clamp((1 - wy) * top + wy * bottom, 0.0, 255.0)));
      }
    }
  }
  return out;
}

Tensor<float> preprocess(const Image& image) {
  if (image.width == 0 || image.height == 0) throw ValidationError("preprocess: empty image");
  const Image img = resize_bilinear(image, kImageSize, kImageSize);
  Tensor<float> t(Shape{kImageChannels, kImageSize, kImageSize});
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < kImageSize; ++y) {
      for (std::size_t x = 0; x < kImageSize; ++x) {
        t[(c * kImageSize + y) * kImageSize + x] = static_cast<float>(img.at(x, y, c)) / 127.5f - 1.0f;
      }
    }
  }
  return t;
}

Image postprocess(const Tensor<float>& tensor) {
  Shape s = tensor.shape();
  if (s.size() == 4 && s[0] == 1) s.erase(s.begin());
  if (s.size() != 3 || s[0] != 3) throw DimensionError("postprocess expects [3,H,W], got " + shape_to_string(tensor.shape()));
  const std::size_t h = s[1], w = s[2];
  Image img(w, h);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const float v = std::clamp(tensor[(c * h + y) * w + x], -1.0f, 1.0f);
        img.at(x, y, c) = static_cast<std::uint8_t>(std::lround((v + 1.0f) * 127.5f));
      }
    }
  }
  return img;
}

Image tile_images(const std::vector<Image>& tiles, std::size_t columns) {
  if (tiles.empty() || columns == 0) throw UsageError("tile_images: nothing to tile");
  const std::size_t tw = tiles[0].width, th = tiles[0].height;
  const std::size_t rows = (tiles.size() + columns - 1) / columns;
  Image out(tw * columns, th * rows);
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    if (tiles[i].width != tw || tiles[i].height != th) throw DimensionError("tile_images: tiles differ in size");
    const std::size_t ox = (i % columns) * tw, oy = (i / columns) * th;
    for (std::size_t y = 0; y < th; ++y) {
      std::copy_n(tiles[i].rgb.data() + y * tw * 3, tw * 3, out.rgb.data() + ((oy + y) * out.width + ox) * 3);
    }
  }
  return out;
}

}  // namespace cdaae
