#include "cdaae/oracle.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

#include "cdaae/error.hpp"
#include "cdaae/model.hpp"

namespace cdaae {

namespace {

constexpr std::size_t kPixels = kImageChannels * kImageSize * kImageSize;

Eigen::VectorXd pixels(const Tensor<float>& image) {
  Shape s = image.shape();
  if (s.size() == 4 && s[0] == 1) s.erase(s.begin());
  if (s != Shape{kImageChannels, kImageSize, kImageSize}) {
    throw DimensionError("oracle expects a [3,32,32] image, got " + shape_to_string(image.shape()));
  }
  Eigen::VectorXd v(kPixels);
  for (std::size_t i = 0; i < kPixels; ++i) v[static_cast<Eigen::Index>(i)] = std::clamp(image[i], -1.0f, 1.0f);
  return v;
}

}  // namespace

struct OracleRegressor::Impl {
  OracleOptions options;
  Eigen::MatrixXd linear;       // [kPixels + 1, 8], last row is the intercept
  Eigen::MatrixXd train;        // [N, kPixels]
  Eigen::VectorXd train_sq;     // squared norms of the rows of `train`
  Eigen::MatrixXd dual;         // [N, 8]
  double scale = 1.0;           // gamma / mean squared distance

  std::array<double, 8> predict(const Eigen::VectorXd& x) const {
    const Eigen::Index p = static_cast<Eigen::Index>(kPixels);
    Eigen::VectorXd out = linear.topRows(p).transpose() * x + linear.row(p).transpose();
    const Eigen::VectorXd d2 = (train_sq.array() - 2.0 * (train * x).array() + x.squaredNorm()).matrix();
    const Eigen::VectorXd k = (-scale * d2.array().max(0.0)).exp().matrix();
    out += dual.transpose() * k;
    std::array<double, 8> r{};
    for (std::size_t i = 0; i < 8; ++i) r[i] = out[static_cast<Eigen::Index>(i)];
    return r;
  }
};

Image gaussian_blur(const Image& image, double sigma) {
  if (!(sigma > 0.0)) return image;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0;
  for (int i = -radius; i <= radius; ++i) total += kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& k : kernel) k /= total;

  const int w = static_cast<int>(image.width), h = static_cast<int>(image.height);
  std::vector<double> tmp(image.rgb.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double s = 0;
        for (int i = -radius; i <= radius; ++i) s += kernel[i + radius] * image.at(std::clamp(x + i, 0, w - 1), y, c);
        tmp[(y * w + x) * 3 + c] = s;
      }
    }
  }
  Image out(image.width, image.height);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double s = 0;
        for (int i = -radius; i <= radius; ++i) s += kernel[i + radius] * tmp[(std::clamp(y + i, 0, h - 1) * w + x) * 3 + c];
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(s), 0L, 255L));
      }
    }
  }
  return out;
}

OracleRegressor OracleRegressor::fit(const OracleOptions& options) {
  if (options.samples < 16) throw UsageError("oracle needs at least 16 samples");
  auto impl = std::make_shared<Impl>();
  impl->options = options;
  const auto n = static_cast<Eigen::Index>(options.samples);
  const auto p = static_cast<Eigen::Index>(kPixels);

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd x(n, p + 1);
  Eigen::MatrixXd y(n, 8);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::array<double, 8> v{};
    for (auto& e : v) e = unit(rng);
    for (std::size_t k = 4; k < 8; ++k) {
      if (unit(rng) < 0.3) v[k] = 0.0;
    }
    Image img = render_synthetic_face(SyntheticFaceSpec::from_values(v));
    const bool blur = unit(rng) < options.blur_probability;
    const double sigma = unit(rng) * options.max_blur_sigma;
    if (blur) img = gaussian_blur(img, sigma);
    Tensor<float> t = preprocess(img);
    const bool noisy = unit(rng) < options.noise_probability;
    std::normal_distribution<float> noise(0.0f, static_cast<float>(unit(rng) * options.max_noise_sigma));
    if (noisy) {
      for (auto& e : t.storage()) e += noise(rng);
    }
    x.row(i).head(p) = pixels(t).transpose();
    x(i, p) = 1.0;
    for (Eigen::Index k = 0; k < 8; ++k) y(i, k) = v[static_cast<std::size_t>(k)];
  }

  Eigen::MatrixXd gram = x.transpose() * x;
  gram.diagonal().array() += options.ridge;
  impl->linear = gram.ldlt().solve(x.transpose() * y);
  const Eigen::MatrixXd residual = y - x * impl->linear;

  impl->train = x.leftCols(p);
  impl->train_sq = impl->train.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = -2.0 * impl->train * impl->train.transpose();
  d2.colwise() += impl->train_sq;
  d2.rowwise() += impl->train_sq.transpose();
  d2 = d2.cwiseMax(0.0);
  impl->scale = options.gamma / d2.mean();
  Eigen::MatrixXd kernel = (-impl->scale * d2.array()).exp().matrix();
  kernel.diagonal().array() += options.kernel_ridge;
  impl->dual = kernel.ldlt().solve(residual);

  OracleRegressor r;
  r.impl_ = std::move(impl);
  return r;
}

std::array<double, 8> OracleRegressor::predict(const Tensor<float>& image) const {
  if (!impl_) throw UsageError("oracle regressor is not fitted");
  return impl_->predict(pixels(image));
}

std::array<double, 8> OracleRegressor::predict(const Image& image) const { return predict(preprocess(image)); }

const OracleOptions& OracleRegressor::options() const {
  if (!impl_) throw UsageError("oracle regressor is not fitted");
  return impl_->options;
}

}  // namespace cdaae
