#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "cdaae/image.hpp"
#include "cdaae/synthetic.hpp"
#include "cdaae/tensor.hpp"

namespace cdaae {

struct OracleOptions {
  std::size_t samples = 3000;      // random renders used for the fit
  double ridge = 1.0;              // linear stage penalty
  double kernel_ridge = 1e-3;      // kernel stage penalty
  double gamma = 1.0;              // RBF width, relative to the mean squared pixel distance
  double blur_probability = 0.5;   // fraction of renders softened before fitting
  double max_blur_sigma = 1.0;     // Gaussian sigma in pixels, drawn uniformly from (0, max]
  double noise_probability = 0.5;  // fraction of renders with additive pixel noise
  double max_noise_sigma = 0.05;   // per-pixel Gaussian sigma on the [-1,1] scale, uniform in (0, max]
  std::uint64_t seed = 2024;
};

/// Least-squares decoder from pixels to the eight synthetic face
/// parameters: a ridge-regularised linear map plus an RBF kernel ridge
/// correction fit to its residuals.
class OracleRegressor {
 public:
  static OracleRegressor fit(const OracleOptions& options = {});

  /// `image` is [3,32,32] or [1,3,32,32] in [-1,1]; values are clamped.
  std::array<double, 8> predict(const Tensor<float>& image) const;
  std::array<double, 8> predict(const Image& image) const;

  const OracleOptions& options() const;

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

/// Separable Gaussian blur with clamped borders.
Image gaussian_blur(const Image& image, double sigma);

}  // namespace cdaae
