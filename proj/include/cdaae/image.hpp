#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cdaae/tensor.hpp"

namespace cdaae {

/// 8-bit RGB image, interleaved row-major.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(std::size_t w, std::size_t h) : width(w), height(h), rgb(w * h * 3, 0) {}

  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) { return rgb[(y * width + x) * 3 + c]; }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const { return rgb[(y * width + x) * 3 + c]; }

  bool operator==(const Image&) const = default;
};

std::vector<std::uint8_t> encode_png(const Image& image);
/// Any PNG colour type is converted to 8-bit RGB. Throws ValidationError.
Image decode_png(std::span<const std::uint8_t> bytes);
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);

/// Bilinear resampling with half-pixel centres.
Image resize_bilinear(const Image& image, std::size_t width, std::size_t height);

/// Resizes to 32x32 when needed and maps [0,255] to [-1,1] as a [3,32,32] tensor.
Tensor<float> preprocess(const Image& image);
/// Inverse of preprocess for a [3,H,W] or [1,3,H,W] tensor: clamps to
/// [-1,1] and rounds to the nearest 8-bit level.
Image postprocess(const Tensor<float>& tensor);

/// Places equally sized tiles row-major into one image.
Image tile_images(const std::vector<Image>& tiles, std::size_t columns);

}  // namespace cdaae
